//! Possibilistic (Boolean) models: supports, the propositional formula
//! `B_e`, compatible global sections and strong contextuality.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EmpiricalModel;
use crate::scenario::{intersect, MeasurementScenario};

/// Set of section indices of one context, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SectionSet {
    words: Vec<u64>,
    universe: usize,
}

impl SectionSet {
    pub fn empty(universe: usize) -> Self {
        SectionSet {
            words: vec![0; universe.div_ceil(64)],
            universe,
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for i in 0..universe {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.universe && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) -> bool {
        assert!(
            i < self.universe,
            "section {i} outside universe {}",
            self.universe
        );
        let fresh = !self.contains(i);
        self.words[i / 64] |= 1 << (i % 64);
        fresh
    }

    pub fn remove(&mut self, i: usize) -> bool {
        let had = self.contains(i);
        if had {
            self.words[i / 64] &= !(1 << (i % 64));
        }
        had
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&i| self.contains(i))
    }

    pub fn is_subset(&self, other: &SectionSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for SectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Per context, the set of sections allowed with nonzero weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportModel {
    scenario: MeasurementScenario,
    supports: Vec<SectionSet>,
}

impl SupportModel {
    pub fn new(scenario: MeasurementScenario, supports: Vec<SectionSet>) -> Result<Self> {
        if supports.len() != scenario.num_contexts() {
            return Err(Error::invalid(format!(
                "{} supports for {} contexts",
                supports.len(),
                scenario.num_contexts()
            )));
        }
        for (c, s) in supports.iter().enumerate() {
            if s.universe() != scenario.num_sections(c) {
                return Err(Error::invalid(format!(
                    "support of context {c} has wrong width"
                )));
            }
            if s.is_empty() {
                return Err(Error::invalid(format!("support of context {c} is empty")));
            }
        }
        Ok(SupportModel { scenario, supports })
    }

    pub fn full(scenario: &MeasurementScenario) -> Self {
        let supports = (0..scenario.num_contexts())
            .map(|c| SectionSet::full(scenario.num_sections(c)))
            .collect();
        SupportModel {
            scenario: scenario.clone(),
            supports,
        }
    }

    pub fn scenario(&self) -> &MeasurementScenario {
        &self.scenario
    }

    pub fn supports(&self) -> &[SectionSet] {
        &self.supports
    }

    pub fn support(&self, c: usize) -> &SectionSet {
        &self.supports[c]
    }

    pub fn allows(&self, c: usize, s: usize) -> bool {
        self.supports[c].contains(s)
    }

    pub fn to_json(&self) -> SupportJson {
        SupportJson {
            scenario: self.scenario.clone(),
            tables: self
                .supports
                .iter()
                .map(|s| (0..s.universe()).map(|i| s.contains(i) as u8).collect())
                .collect(),
        }
    }

    pub fn from_json(json: SupportJson) -> Result<Self> {
        let supports = json
            .tables
            .iter()
            .enumerate()
            .map(|(c, row)| {
                if let Some(v) = row.iter().find(|&&v| v > 1) {
                    return Err(Error::Parse(format!(
                        "support entry {v} in context {c} is not 0/1"
                    )));
                }
                Ok(SectionSet::from_indices(
                    row.len(),
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v == 1)
                        .map(|(i, _)| i),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(json.scenario, supports)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("support serializes")
    }
}

/// Wire form: same shape as a model, with 0/1 entries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportJson {
    pub scenario: MeasurementScenario,
    pub tables: Vec<Vec<u8>>,
}

/// Sections with strictly positive weight.
pub fn support_of(model: &EmpiricalModel) -> SupportModel {
    let supports = model
        .tables()
        .iter()
        .map(|t| SectionSet::from_indices(t.len(), (0..t.len()).filter(|&s| t[s].is_positive())))
        .collect();
    SupportModel {
        scenario: model.scenario().clone(),
        supports,
    }
}

/// Global sections whose restriction to every context lies in its support,
/// by exhaustive scan, in canonical order.
pub fn compatible_globals(support: &SupportModel) -> Vec<usize> {
    let scenario = &support.scenario;
    (0..scenario.num_global_sections())
        .into_par_iter()
        .filter(|&g| {
            (0..scenario.num_contexts())
                .all(|c| support.supports[c].contains(scenario.restrict_index(g, c)))
        })
        .collect()
}

/// No global section is consistent with every context's support.
pub fn strong_contextuality(support: &SupportModel) -> bool {
    let scenario = &support.scenario;
    !(0..scenario.num_global_sections())
        .into_par_iter()
        .any(|g| {
            (0..scenario.num_contexts())
                .all(|c| support.supports[c].contains(scenario.restrict_index(g, c)))
        })
}

/// Projections of the supports of every overlapping pair agree as sets.
pub fn possibilistic_no_signaling(support: &SupportModel) -> bool {
    possibilistic_signaling_witness(support).is_none()
}

/// First pair of contexts `(a, b)` whose support projections differ.
pub fn possibilistic_signaling_witness(support: &SupportModel) -> Option<(usize, usize)> {
    let scenario = &support.scenario;
    let n = scenario.num_contexts();
    for a in 0..n {
        for b in (a + 1)..n {
            let overlap = intersect(scenario.context(a), scenario.context(b));
            if overlap.is_empty() {
                continue;
            }
            if project(support, a, &overlap) != project(support, b, &overlap) {
                return Some((a, b));
            }
        }
    }
    None
}

fn project(support: &SupportModel, c: usize, overlap: &[usize]) -> BTreeSet<Vec<usize>> {
    let scenario = &support.scenario;
    let ctx = scenario.context(c);
    let positions: Vec<usize> = overlap
        .iter()
        .map(|m| ctx.binary_search(m).expect("overlap inside context"))
        .collect();
    support.supports[c]
        .iter()
        .map(|s| {
            let a = scenario.section_assignment(c, s);
            positions.iter().map(|&p| a[p]).collect()
        })
        .collect()
}

/// Disjunction of section statements `b_s` for one context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanProposition {
    pub context: usize,
    pub statements: Vec<usize>,
}

/// Conjunction over contexts of their propositions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanFormula {
    scenario: MeasurementScenario,
    pub propositions: Vec<BooleanProposition>,
}

pub fn formula_of(support: &SupportModel) -> BooleanFormula {
    BooleanFormula {
        scenario: support.scenario.clone(),
        propositions: support
            .supports
            .iter()
            .enumerate()
            .map(|(c, s)| BooleanProposition {
                context: c,
                statements: s.iter().collect(),
            })
            .collect(),
    }
}

impl BooleanFormula {
    /// Truth value of the formula under a global assignment (by index).
    pub fn evaluate(&self, global: usize) -> bool {
        self.propositions.iter().all(|p| {
            let s = self.scenario.restrict_index(global, p.context);
            p.statements.binary_search(&s).is_ok()
        })
    }

    pub fn is_satisfiable(&self) -> bool {
        (0..self.scenario.num_global_sections()).any(|g| self.evaluate(g))
    }

    /// Renders one proposition as a disjunction of conjunctions.
    pub fn render_proposition(&self, i: usize) -> String {
        let p = &self.propositions[i];
        let names = self.scenario.measurements();
        let ctx = self.scenario.context(p.context);
        p.statements
            .iter()
            .map(|&s| {
                let a = self.scenario.section_assignment(p.context, s);
                let lits: Vec<String> = ctx
                    .iter()
                    .zip(&a)
                    .map(|(&m, &v)| match (self.scenario.outcomes()[m], v) {
                        (2, 0) => format!("¬{}", names[m]),
                        (2, _) => names[m].clone(),
                        (_, v) => format!("{}={v}", names[m]),
                    })
                    .collect();
                format!("({})", lits.join(" ∧ "))
            })
            .collect::<Vec<_>>()
            .join(" ∨ ")
    }
}

impl fmt::Display for BooleanFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.propositions.len() {
            writeln!(f, "B{} = {}", i + 1, self.render_proposition(i))?;
        }
        Ok(())
    }
}
