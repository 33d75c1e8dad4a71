//! Augmented parity supports.
//!
//! A parity system fixes, per context, the sections satisfying its
//! equation. An [`AugmentationPlan`] adds opposite-parity sections to some
//! contexts; the resulting support is kept when it is still strongly
//! contextual and possibilistically no-signaling.

use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EmpiricalModel;
use crate::parity::ParitySystem;
use crate::possibilistic::{
    possibilistic_no_signaling, strong_contextuality, SectionSet, SupportModel,
};
use crate::rational::Rational;
use crate::scenario::MeasurementScenario;
use crate::support::{
    classify, solve_support, AffineEntry, AffineFamily, Classification, ParameterBounds,
};

const PLAN_DATA: &str = include_str!("../data/augmentation_plan.json");
const TABLE_DATA: &str = include_str!("../data/nonamcc_family.csv");

/// Base parity system plus, per context, extra opposite-parity sections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentationPlan {
    base: ParitySystem,
    additions: Vec<SectionSet>,
}

impl AugmentationPlan {
    /// Validates that every addition violates its context's parity equation.
    pub fn new(base: ParitySystem, additions: Vec<SectionSet>) -> Result<Self> {
        let scenario = base.scenario();
        if additions.len() != scenario.num_contexts() {
            return Err(Error::invalid(format!(
                "{} addition sets for {} contexts",
                additions.len(),
                scenario.num_contexts()
            )));
        }
        for (c, add) in additions.iter().enumerate() {
            if add.universe() != scenario.num_sections(c) {
                return Err(Error::invalid(format!(
                    "addition set of context {c} has wrong width"
                )));
            }
            if let Some(s) = add.iter().find(|&s| base.section_satisfies(c, s)) {
                return Err(Error::invalid(format!(
                    "section {} of context {} already satisfies its parity equation",
                    bit_label(scenario, c, s),
                    scenario.context_label(c)
                )));
            }
        }
        Ok(AugmentationPlan { base, additions })
    }

    /// The plan with no additions.
    pub fn empty(base: ParitySystem) -> Self {
        let additions = (0..base.scenario().num_contexts())
            .map(|c| SectionSet::empty(base.scenario().num_sections(c)))
            .collect();
        AugmentationPlan { base, additions }
    }

    pub fn base(&self) -> &ParitySystem {
        &self.base
    }

    pub fn additions(&self) -> &[SectionSet] {
        &self.additions
    }

    pub fn addition_counts(&self) -> Vec<usize> {
        self.additions.iter().map(SectionSet::len).collect()
    }

    pub fn to_json(&self) -> PlanJson {
        let scenario = self.base.scenario();
        PlanJson {
            scenario: scenario.clone(),
            parities: self.base.to_hex(),
            additions: self
                .additions
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_empty())
                .map(|(c, a)| ContextAdditions {
                    context: scenario.context_label(c),
                    sections: a.iter().map(|s| bit_label(scenario, c, s)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: PlanJson) -> Result<Self> {
        let base = ParitySystem::from_hex(json.scenario, &json.parities)?;
        let mut plan = AugmentationPlan::empty(base);
        for entry in &json.additions {
            let c = find_context(plan.base.scenario(), &entry.context)?;
            for label in &entry.sections {
                let s = parse_bits(plan.base.scenario(), c, label)?;
                plan.additions[c].insert(s);
            }
        }
        AugmentationPlan::new(plan.base, plan.additions)
    }
}

/// Wire form of a plan; sections are outcome strings such as `"1011"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanJson {
    pub scenario: MeasurementScenario,
    pub parities: String,
    pub additions: Vec<ContextAdditions>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContextAdditions {
    pub context: String,
    pub sections: Vec<String>,
}

fn bit_label(scenario: &MeasurementScenario, c: usize, s: usize) -> String {
    scenario
        .section_assignment(c, s)
        .iter()
        .map(|d| char::from_digit(*d as u32, 36).expect("small outcome"))
        .collect()
}

fn parse_bits(scenario: &MeasurementScenario, c: usize, label: &str) -> Result<usize> {
    let digits = label
        .chars()
        .map(|ch| ch.to_digit(36).map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Parse(format!("invalid section {label:?}")))?;
    scenario
        .section_index(c, &digits)
        .map_err(|e| Error::Parse(format!("section {label:?}: {e}")))
}

fn find_context(scenario: &MeasurementScenario, label: &str) -> Result<usize> {
    (0..scenario.num_contexts())
        .find(|&c| scenario.context_label(c) == label)
        .ok_or_else(|| Error::Parse(format!("unknown context {label:?}")))
}

#[derive(Deserialize)]
struct PlanData {
    scenario: MeasurementScenario,
    odd_propositions: Vec<usize>,
    additions: Vec<PropositionAdditions>,
    corrections: Vec<Correction>,
}

#[derive(Deserialize)]
struct PropositionAdditions {
    proposition: usize,
    context: String,
    sections: Vec<String>,
}

#[derive(Deserialize)]
struct Correction {
    proposition: usize,
    remove: String,
    add: String,
}

fn load_plan(corrected: bool) -> AugmentationPlan {
    let data: PlanData = serde_json::from_str(PLAN_DATA).expect("bundled plan parses");
    let scenario = data.scenario;
    let mut parities = vec![false; scenario.num_contexts()];
    for p in &data.odd_propositions {
        parities[p - 1] = true;
    }
    let base = ParitySystem::new(scenario.clone(), parities).expect("binary scenario");
    let mut plan = AugmentationPlan::empty(base);
    for entry in &data.additions {
        let c = entry.proposition - 1;
        assert_eq!(
            scenario.context_label(c),
            entry.context,
            "proposition index maps to context"
        );
        for label in &entry.sections {
            plan.additions[c].insert(parse_bits(&scenario, c, label).expect("bundled section"));
        }
    }
    if corrected {
        for fix in &data.corrections {
            let c = fix.proposition - 1;
            assert!(plan.additions[c]
                .remove(parse_bits(&scenario, c, &fix.remove).expect("bundled section")));
            plan.additions[c].insert(parse_bits(&scenario, c, &fix.add).expect("bundled section"));
        }
    }
    AugmentationPlan::new(plan.base, plan.additions).expect("bundled plan is valid")
}

/// The nine-proposition (4,2,2) plan on the parity vector `1c00`, with the
/// bundled correction to proposition 13 applied.
pub fn paper_plan() -> AugmentationPlan {
    load_plan(true)
}

/// The same plan exactly as listed, without corrections.
pub fn paper_plan_verbatim() -> AugmentationPlan {
    load_plan(false)
}

/// Proposition number `B_i` (1-based) and the context it constrains, for
/// every context of a Bell scenario.
pub fn proposition_contexts(scenario: &MeasurementScenario) -> Vec<(usize, String)> {
    (0..scenario.num_contexts())
        .map(|c| (c + 1, scenario.context_label(c)))
        .collect()
}

/// Per context, the parity-satisfying sections plus the plan's additions.
pub fn apply_plan(plan: &AugmentationPlan) -> Result<SupportModel> {
    let base = &plan.base;
    let scenario = base.scenario();
    let supports = (0..scenario.num_contexts())
        .map(|c| {
            let mut set = plan.additions[c].clone();
            for s in 0..scenario.num_sections(c) {
                if base.section_satisfies(c, s) {
                    if set.contains(s) {
                        return Err(Error::invalid(format!(
                            "addition {} to context {} is already in the parity support",
                            bit_label(scenario, c, s),
                            scenario.context_label(c)
                        )));
                    }
                    set.insert(s);
                }
            }
            Ok(set)
        })
        .collect::<Result<Vec<_>>>()?;
    SupportModel::new(scenario.clone(), supports)
}

/// A plan accepted by [`search_plans`], tagged with its trial number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchHit {
    pub trial: u64,
    pub plan: AugmentationPlan,
}

/// Draws `trials` random plans with the given per-context addition counts
/// and keeps those whose support is strongly contextual and
/// possibilistically no-signaling.
///
/// Trial `t` uses ChaCha8 seeded with `seed` on stream `t`, so the hit list
/// depends only on `(base, counts, trials, seed)`.
pub fn search_plans(
    base: &ParitySystem,
    counts: &[usize],
    trials: u64,
    seed: u64,
) -> Result<Vec<SearchHit>> {
    let scenario = base.scenario();
    if counts.len() != scenario.num_contexts() {
        return Err(Error::invalid(format!(
            "{} addition counts for {} contexts",
            counts.len(),
            scenario.num_contexts()
        )));
    }
    let opposite: Vec<Vec<usize>> = (0..scenario.num_contexts())
        .map(|c| {
            (0..scenario.num_sections(c))
                .filter(|&s| !base.section_satisfies(c, s))
                .collect()
        })
        .collect();
    for (c, (&k, pool)) in counts.iter().zip(&opposite).enumerate() {
        if k > pool.len() {
            return Err(Error::invalid(format!(
                "context {} has {} opposite-parity sections, {k} requested",
                scenario.context_label(c),
                pool.len()
            )));
        }
    }
    let hits = (0..trials)
        .into_par_iter()
        .filter_map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let additions = opposite
                .iter()
                .zip(counts)
                .enumerate()
                .map(|(c, (pool, &k))| {
                    let picks = sample(&mut rng, pool.len(), k);
                    SectionSet::from_indices(
                        scenario.num_sections(c),
                        picks.iter().map(|i| pool[i]),
                    )
                })
                .collect();
            let plan = AugmentationPlan {
                base: base.clone(),
                additions,
            };
            let support = apply_plan(&plan).expect("additions drawn from the opposite-parity set");
            (strong_contextuality(&support) && possibilistic_no_signaling(&support))
                .then_some(SearchHit { trial, plan })
        })
        .collect();
    Ok(hits)
}

/// Parses a comma-separated list of per-context counts.
pub fn parse_counts(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            if t.is_empty() || t == "." || t == "·" {
                Ok(0)
            } else {
                t.parse()
                    .map_err(|_| Error::Parse(format!("invalid addition count {t:?}")))
            }
        })
        .collect()
}

/// One entry where the solved family and the bundled table disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableDiff {
    pub context: String,
    pub section: String,
    pub expected: String,
    pub actual: String,
}

/// Classification of one instance of the family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceCheck {
    pub q: Rational,
    pub classification: Classification,
}

/// Outcome of solving a plan's support and comparing it with the bundled
/// one-parameter table.
#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub dimension: Option<usize>,
    pub strongly_contextual: bool,
    pub possibilistic_no_signaling: bool,
    pub interval: Option<ParameterBounds>,
    pub diffs: Vec<TableDiff>,
    pub instances: Vec<InstanceCheck>,
    /// Strong contextuality of the support at the upper endpoint `q = 1/4`,
    /// where further entries vanish.
    pub upper_endpoint_strongly_contextual: Option<bool>,
    pub seconds: f64,
}

impl TableReport {
    /// Dimension one, no diffs, interval `[1/8, 1/4]`, AMCC at 1/8 and
    /// non-AMCC with cf = 1 at 3/16.
    pub fn passes(&self) -> bool {
        use crate::support::MaximalClass;
        let interval_ok = self.interval
            == Some(ParameterBounds {
                lower: Some(Rational::new(1, 8)),
                upper: Some(Rational::new(1, 4)),
            });
        let class_at = |q: Rational| {
            self.instances
                .iter()
                .find(|i| i.q == q)
                .map(|i| i.classification.class)
        };
        self.dimension == Some(1)
            && self.diffs.is_empty()
            && interval_ok
            && class_at(Rational::new(1, 8)) == Some(MaximalClass::Amcc)
            && class_at(Rational::new(3, 16)) == Some(MaximalClass::NonAmcc)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.dimension {
            Some(1) => {}
            Some(d) => out.push(format!("family dimension {d}, expected 1")),
            None => out.push("support admits no no-signaling model".into()),
        }
        for d in &self.diffs {
            out.push(format!(
                "context {} section {}: expected {}, got {}",
                d.context, d.section, d.expected, d.actual
            ));
        }
        if !self.passes() && out.is_empty() {
            out.push(
                "interval or classification differs from [1/8, 1/4], AMCC at 1/8, non-AMCC at 3/16"
                    .into(),
            );
        }
        out
    }
}

/// The bundled table as symbolic entries, rows = contexts, columns = sections.
pub fn expected_table() -> Result<Vec<Vec<AffineEntry>>> {
    let scenario = MeasurementScenario::bell(4, 2, 2)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(TABLE_DATA.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    for s in 0..16 {
        if header.get(s + 1) != Some(scenario.section_label(0, s).as_str()) {
            return Err(Error::Parse(format!(
                "table header column {} is not section {s}",
                s + 1
            )));
        }
    }
    let mut rows = Vec::new();
    for (c, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.get(0) != Some(scenario.context_label(c).as_str()) {
            return Err(Error::Parse(format!(
                "table row {c} is not context {}",
                scenario.context_label(c)
            )));
        }
        rows.push(
            record
                .iter()
                .skip(1)
                .map(str::parse)
                .collect::<Result<Vec<AffineEntry>>>()?,
        );
    }
    if rows.len() != 16 || rows.iter().any(|r| r.len() != 16) {
        return Err(Error::Parse("table is not 16 x 16".into()));
    }
    Ok(rows)
}

/// Solves the support of `plan`, compares the family with the bundled
/// table and classifies it at `q = 1/8` and `q = 3/16`.
pub fn table_report(plan: &AugmentationPlan) -> Result<(Option<AffineFamily>, TableReport)> {
    let start = Instant::now();
    let support = apply_plan(plan)?;
    let strongly_contextual = strong_contextuality(&support);
    let pns = possibilistic_no_signaling(&support);
    let family = solve_support(&support)?.family();
    let mut report = TableReport {
        dimension: family.as_ref().map(AffineFamily::dimension),
        strongly_contextual,
        possibilistic_no_signaling: pns,
        interval: family.as_ref().and_then(|f| f.parameter_bounds.clone()),
        diffs: Vec::new(),
        instances: Vec::new(),
        upper_endpoint_strongly_contextual: None,
        seconds: 0.0,
    };
    if let Some(f) = family.as_ref().filter(|f| f.dimension() <= 1) {
        let scenario = f.scenario();
        let offsets = scenario.slot_offsets();
        let expected = expected_table()?;
        for (c, row) in expected.iter().enumerate() {
            for (s, want) in row.iter().enumerate() {
                let got = f.entry(offsets[c] + s).expect("dimension <= 1");
                if &got != want {
                    report.diffs.push(TableDiff {
                        context: scenario.context_label(c),
                        section: scenario.section_label(c, s),
                        expected: want.to_string(),
                        actual: got.to_string(),
                    });
                }
            }
        }
    }
    if let Some(f) = family.as_ref().filter(|f| f.dimension() == 1) {
        let bounds = f.parameter_bounds.clone().expect("dimension 1 has bounds");
        for q in [Rational::new(1, 8), Rational::new(3, 16)] {
            if bounds.contains(&q) {
                let model = f.model_at(std::slice::from_ref(&q))?;
                report.instances.push(InstanceCheck {
                    classification: classify(&model)?,
                    q,
                });
            }
        }
        let quarter = Rational::new(1, 4);
        if bounds.contains(&quarter) {
            let model = f.model_at(&[quarter])?;
            report.upper_endpoint_strongly_contextual = Some(strong_contextuality(
                &crate::possibilistic::support_of(&model),
            ));
        }
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok((family, report))
}

/// Full reconstruction pipeline on [`paper_plan`]; fails with a located
/// diff unless the family is one-dimensional and matches the bundled table.
pub fn reconstruct_tables() -> Result<(AffineFamily, TableReport)> {
    let (family, report) = table_report(&paper_plan())?;
    match family {
        Some(f) if report.passes() => Ok((f, report)),
        _ => Err(Error::Verification(report.failures().join("; "))),
    }
}

/// Model of a one-parameter family at `q`.
pub fn family_model(family: &AffineFamily, q: &Rational) -> Result<EmpiricalModel> {
    family.model_at(std::slice::from_ref(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parity::build_symmetric_model;
    use crate::possibilistic::support_of;

    const PROFILE: [usize; 16] = [3, 1, 0, 2, 0, 4, 3, 0, 0, 1, 3, 0, 5, 3, 0, 0];

    #[test]
    fn plan_sizes() {
        let support = apply_plan(&paper_plan()).unwrap();
        let sizes: Vec<usize> = support.supports().iter().map(SectionSet::len).collect();
        assert_eq!(
            sizes,
            vec![11, 9, 8, 10, 8, 12, 11, 8, 8, 9, 11, 8, 13, 11, 8, 8]
        );
        assert_eq!(paper_plan().addition_counts(), PROFILE.to_vec());
        assert_eq!(paper_plan_verbatim().addition_counts(), PROFILE.to_vec());
        assert_eq!(paper_plan().base(), &ParitySystem::paper_422());
    }

    #[test]
    fn both_plans_pass_the_filters() {
        for plan in [paper_plan(), paper_plan_verbatim()] {
            let support = apply_plan(&plan).unwrap();
            assert!(strong_contextuality(&support));
            assert!(possibilistic_no_signaling(&support));
        }
    }

    #[test]
    fn empty_plan_is_the_parity_support() {
        let base = ParitySystem::paper_422();
        let support = apply_plan(&AugmentationPlan::empty(base.clone())).unwrap();
        assert_eq!(support, support_of(&build_symmetric_model(&base).unwrap()));
    }

    #[test]
    fn full_plan_is_not_strongly_contextual() {
        let base = ParitySystem::paper_422();
        let additions = (0..16)
            .map(|c| {
                SectionSet::from_indices(16, (0..16).filter(|&s| !base.section_satisfies(c, s)))
            })
            .collect();
        let plan = AugmentationPlan::new(base, additions).unwrap();
        let support = apply_plan(&plan).unwrap();
        assert_eq!(support, SupportModel::full(support.scenario()));
        assert!(!strong_contextuality(&support));
    }

    #[test]
    fn additions_must_have_opposite_parity() {
        let base = ParitySystem::paper_422();
        let mut additions: Vec<SectionSet> = (0..16).map(|_| SectionSet::empty(16)).collect();
        additions[0].insert(0);
        assert!(matches!(
            AugmentationPlan::new(base, additions),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = paper_plan();
        let text = serde_json::to_string(&plan.to_json()).unwrap();
        let back = AugmentationPlan::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn search_is_deterministic_and_filters() {
        let base = ParitySystem::paper_422();
        let a = search_plans(&base, &PROFILE, 64, 7).unwrap();
        let b = search_plans(&base, &PROFILE, 64, 7).unwrap();
        assert_eq!(a, b);
        for hit in &a {
            assert_eq!(hit.plan.addition_counts(), PROFILE.to_vec());
            let support = apply_plan(&hit.plan).unwrap();
            assert!(strong_contextuality(&support));
            assert!(possibilistic_no_signaling(&support));
        }
    }

    #[test]
    fn search_extremes() {
        let base = ParitySystem::paper_422();
        assert_eq!(search_plans(&base, &[0; 16], 5, 1).unwrap().len(), 5);
        assert!(search_plans(&base, &[8; 16], 5, 1).unwrap().is_empty());
        assert!(matches!(
            search_plans(&base, &[9; 16], 1, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn counts_parse() {
        assert_eq!(parse_counts("3,1,·,2").unwrap(), vec![3, 1, 0, 2]);
        assert!(parse_counts("3,x").is_err());
    }

    #[test]
    fn bundled_table_shape() {
        let t = expected_table().unwrap();
        assert_eq!(t[0][0].to_string(), "q");
        assert_eq!(t[12][0].to_string(), "2q-1/4");
    }
}
