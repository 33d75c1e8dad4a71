//! No-signaling models with a prescribed support.
//!
//! Normalization, pairwise no-signaling and "zero outside the support" are
//! linear equalities over the (context, section) slots. Their solution set
//! is returned as an [`AffineFamily`]; nonnegativity is imposed afterwards,
//! exactly for families of dimension at most one.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank, solve_affine, AffineSolution};
use crate::lp::contextual_fraction;
use crate::model::{render_csv, EmpiricalModel, MarginalWitness};
use crate::possibilistic::{SectionSet, SupportModel};
use crate::rational::Rational;
use crate::scenario::{intersect, MeasurementScenario};

/// Sparse equality rows over slots: normalization of every context and
/// marginal agreement of every overlapping pair of contexts.
fn equality_rows(scenario: &MeasurementScenario) -> Vec<(Vec<(usize, i64)>, Rational)> {
    let offsets = scenario.slot_offsets();
    let mut rows = Vec::new();
    for (c, &off) in offsets.iter().enumerate().take(scenario.num_contexts()) {
        let row = (0..scenario.num_sections(c))
            .map(|s| (off + s, 1))
            .collect();
        rows.push((row, Rational::one()));
    }
    let mut seen = BTreeSet::new();
    let n = scenario.num_contexts();
    for a in 0..n {
        for b in (a + 1)..n {
            let overlap = intersect(scenario.context(a), scenario.context(b));
            if overlap.is_empty() {
                continue;
            }
            let arities: Vec<usize> = overlap.iter().map(|&m| scenario.outcomes()[m]).collect();
            let size: usize = arities.iter().product();
            let mut per_section: Vec<Vec<(usize, i64)>> = vec![Vec::new(); size];
            for (ctx, sign) in [(a, 1), (b, -1)] {
                let pos: Vec<usize> = overlap
                    .iter()
                    .map(|m| scenario.context(ctx).binary_search(m).expect("in context"))
                    .collect();
                for s in 0..scenario.num_sections(ctx) {
                    let assignment = scenario.section_assignment(ctx, s);
                    let u = pos
                        .iter()
                        .zip(&arities)
                        .fold(0, |acc, (&p, &ar)| acc * ar + assignment[p]);
                    per_section[u].push((offsets[ctx] + s, sign));
                }
            }
            for mut row in per_section {
                row.sort_unstable();
                if seen.insert(row.clone()) {
                    rows.push((row, Rational::zero()));
                }
            }
        }
    }
    rows
}

/// Dimension of the affine hull of no-signaling models on `scenario`.
pub fn ns_dimension(scenario: &MeasurementScenario) -> usize {
    let slots = scenario.num_slots();
    let dense: Vec<Vec<Rational>> = equality_rows(scenario)
        .into_iter()
        .map(|(row, _)| {
            let mut d = vec![Rational::zero(); slots];
            for (j, v) in row {
                d[j] = Rational::from_integer(v);
            }
            d
        })
        .collect();
    slots - rank(dense, slots)
}

/// `constant + slope * q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineEntry {
    pub constant: Rational,
    pub slope: Rational,
}

impl AffineEntry {
    pub fn at(&self, q: &Rational) -> Rational {
        &self.constant + &(&self.slope * q)
    }
}

fn short(r: &Rational) -> String {
    if r.denom() == &num::BigInt::from(1) {
        r.numer().to_string()
    } else {
        r.to_string()
    }
}

impl fmt::Display for AffineEntry {
    /// Positive term first: `q`, `0`, `1/4-q`, `2q-1/4`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q_term = |slope: &Rational| {
            if slope.is_one() {
                "q".to_string()
            } else {
                format!("{}q", short(slope))
            }
        };
        let (c, m) = (&self.constant, &self.slope);
        if m.is_zero() {
            return write!(f, "{}", short(c));
        }
        if m.is_positive() {
            write!(f, "{}", q_term(m))?;
            if c.is_positive() {
                write!(f, "+{}", short(c))?;
            } else if c.is_negative() {
                write!(f, "-{}", short(&c.abs()))?;
            }
            Ok(())
        } else {
            if !c.is_zero() {
                write!(f, "{}", short(c))?;
            }
            write!(f, "-{}", q_term(&m.abs()))
        }
    }
}

impl FromStr for AffineEntry {
    type Err = Error;

    /// Parses sums of rational constants and rational multiples of `q`,
    /// such as `q`, `0`, `1/4-q`, `2q-1/4`.
    fn from_str(s: &str) -> Result<Self> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if text.is_empty() {
            return Err(Error::Parse("empty symbolic entry".into()));
        }
        let mut constant = Rational::zero();
        let mut slope = Rational::zero();
        let mut rest = text.as_str();
        while !rest.is_empty() {
            let (negative, body) = match rest.as_bytes()[0] {
                b'-' => (true, &rest[1..]),
                b'+' => (false, &rest[1..]),
                _ => (false, rest),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let (value, is_q) = match term.strip_suffix('q') {
                Some(coef) => {
                    let coef = coef.trim_end_matches('*');
                    let v = if coef.is_empty() {
                        Rational::one()
                    } else {
                        coef.parse()?
                    };
                    (v, true)
                }
                None => (term.parse::<Rational>()?, false),
            };
            let value = if negative { -value } else { value };
            if is_q {
                slope += value;
            } else {
                constant += value;
            }
        }
        Ok(AffineEntry { constant, slope })
    }
}

/// Closed interval of a one-parameter family where all entries are `>= 0`.
/// A missing endpoint is unbounded on that side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl ParameterBounds {
    pub fn is_empty(&self) -> bool {
        matches!((&self.lower, &self.upper), (Some(l), Some(u)) if l > u)
    }

    pub fn contains(&self, q: &Rational) -> bool {
        self.lower.as_ref().is_none_or(|l| q >= l) && self.upper.as_ref().is_none_or(|u| q <= u)
    }
}

/// Affine set `base + Σ t_i directions[i]` of slot vectors (stacked in
/// context order) satisfying the equality system of a support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineFamily {
    scenario: MeasurementScenario,
    pub base: Vec<Rational>,
    pub directions: Vec<Vec<Rational>>,
    /// Nonnegativity interval, computed only for dimension 1.
    pub parameter_bounds: Option<ParameterBounds>,
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SupportSolution {
    Family(AffineFamily),
    Infeasible,
}

impl SupportSolution {
    pub fn family(self) -> Option<AffineFamily> {
        match self {
            SupportSolution::Family(f) => Some(f),
            SupportSolution::Infeasible => None,
        }
    }
}

/// Solves normalization, no-signaling and the zero constraints of `support`.
///
/// For one-parameter families the parameter is normalized so that the
/// first slot (in context, then section order) with a nonzero direction
/// coefficient equals the parameter itself; this is the first in-support
/// section of the first context whenever that slot varies.
pub fn solve_support(support: &SupportModel) -> Result<SupportSolution> {
    let scenario = support.scenario();
    if let Some(c) = support.supports().iter().position(SectionSet::is_empty) {
        return Err(Error::invalid(format!("support of context {c} is empty")));
    }
    let offsets = scenario.slot_offsets();
    let slots = scenario.num_slots();
    // variable index of every in-support slot
    let mut var_of = vec![None; slots];
    let mut slot_of = Vec::new();
    for c in 0..scenario.num_contexts() {
        for s in support.support(c).iter() {
            var_of[offsets[c] + s] = Some(slot_of.len());
            slot_of.push(offsets[c] + s);
        }
    }
    let nvars = slot_of.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut seen = BTreeSet::new();
    for (row, rhs) in equality_rows(scenario) {
        let reduced: Vec<(usize, i64)> = row
            .iter()
            .filter_map(|&(slot, v)| var_of[slot].map(|j| (j, v)))
            .collect();
        if reduced.is_empty() {
            if !rhs.is_zero() {
                return Ok(SupportSolution::Infeasible);
            }
            continue;
        }
        if !seen.insert((reduced.clone(), rhs.clone())) {
            continue;
        }
        let mut dense = vec![Rational::zero(); nvars];
        for (j, v) in reduced {
            dense[j] += Rational::from_integer(v);
        }
        a.push(dense);
        b.push(rhs);
    }
    let (particular, nullspace) = match solve_affine(&a, &b, nvars) {
        AffineSolution::Inconsistent => return Ok(SupportSolution::Infeasible),
        AffineSolution::Solutions {
            particular,
            nullspace,
        } => (particular, nullspace),
    };
    let lift = |v: &[Rational]| {
        let mut full = vec![Rational::zero(); slots];
        for (j, &slot) in slot_of.iter().enumerate() {
            full[slot] = v[j].clone();
        }
        full
    };
    let mut family = AffineFamily {
        scenario: scenario.clone(),
        base: lift(&particular),
        directions: nullspace.iter().map(|v| lift(v)).collect(),
        parameter_bounds: None,
    };
    if family.directions.len() == 1 {
        family.normalize_parameter();
        family.parameter_bounds = Some(family.nonnegative_interval());
    }
    Ok(SupportSolution::Family(family))
}

impl AffineFamily {
    pub fn scenario(&self) -> &MeasurementScenario {
        &self.scenario
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Slot used as the parameter of a one-dimensional family.
    pub fn parameter_slot(&self) -> Option<usize> {
        if self.dimension() != 1 {
            return None;
        }
        self.directions[0].iter().position(|d| !d.is_zero())
    }

    fn normalize_parameter(&mut self) {
        let Some(slot) = self.parameter_slot() else {
            return;
        };
        // reparametrize so that entry `slot` equals the parameter
        let d = self.directions[0][slot].clone();
        let shift = self.base[slot].clone();
        let dir: Vec<Rational> = self.directions[0].iter().map(|x| x / &d).collect();
        self.base = self
            .base
            .iter()
            .zip(&dir)
            .map(|(b, x)| b - &(&shift * x))
            .collect();
        self.directions[0] = dir;
    }

    fn nonnegative_interval(&self) -> ParameterBounds {
        let mut lower: Option<Rational> = None;
        let mut upper: Option<Rational> = None;
        let mut empty = false;
        for (b, d) in self.base.iter().zip(&self.directions[0]) {
            if d.is_zero() {
                empty |= b.is_negative();
                continue;
            }
            // b + d q >= 0
            let bound = -b / d;
            if d.is_positive() {
                if lower.as_ref().is_none_or(|l| bound > *l) {
                    lower = Some(bound);
                }
            } else if upper.as_ref().is_none_or(|u| bound < *u) {
                upper = Some(bound);
            }
        }
        if empty {
            // no parameter makes every entry nonnegative
            return ParameterBounds {
                lower: Some(Rational::one()),
                upper: Some(Rational::zero()),
            };
        }
        ParameterBounds { lower, upper }
    }

    /// Slot entry as `constant + slope q` (dimension 0 or 1).
    pub fn entry(&self, slot: usize) -> Option<AffineEntry> {
        match self.dimension() {
            0 => Some(AffineEntry {
                constant: self.base[slot].clone(),
                slope: Rational::zero(),
            }),
            1 => Some(AffineEntry {
                constant: self.base[slot].clone(),
                slope: self.directions[0][slot].clone(),
            }),
            _ => None,
        }
    }

    /// `base + Σ params[i] directions[i]`.
    pub fn point(&self, params: &[Rational]) -> Result<Vec<Rational>> {
        if params.len() != self.dimension() {
            return Err(Error::invalid(format!(
                "{} parameters for a family of dimension {}",
                params.len(),
                self.dimension()
            )));
        }
        let mut x = self.base.clone();
        for (t, dir) in params.iter().zip(&self.directions) {
            if t.is_zero() {
                continue;
            }
            for (xi, di) in x.iter_mut().zip(dir) {
                if !di.is_zero() {
                    *xi += &(t * di);
                }
            }
        }
        Ok(x)
    }

    /// The model at the given parameters; fails when an entry is negative.
    pub fn model_at(&self, params: &[Rational]) -> Result<EmpiricalModel> {
        EmpiricalModel::from_stacked(self.scenario.clone(), &self.point(params)?)
    }

    /// Parameters placing `model` in the family, if any.
    pub fn parameters_of(&self, model: &EmpiricalModel) -> Option<Vec<Rational>> {
        if model.scenario() != &self.scenario {
            return None;
        }
        let target: Vec<Rational> = model
            .stacked()
            .iter()
            .zip(&self.base)
            .map(|(v, b)| v - b)
            .collect();
        let k = self.dimension();
        let a: Vec<Vec<Rational>> = (0..target.len())
            .map(|i| self.directions.iter().map(|d| d[i].clone()).collect())
            .collect();
        match solve_affine(&a, &target, k) {
            AffineSolution::Inconsistent => None,
            AffineSolution::Solutions { particular, .. } => Some(particular),
        }
    }

    /// Checks every equality of the family's scenario at the given point,
    /// ignoring nonnegativity.
    pub fn satisfies_equalities(&self, x: &[Rational]) -> bool {
        equality_rows(&self.scenario).iter().all(|(row, rhs)| {
            let lhs: Rational = row
                .iter()
                .map(|&(j, v)| &x[j] * &Rational::from_integer(v))
                .sum();
            lhs == *rhs
        })
    }

    /// Symbolic CSV of a one-dimensional (or rigid) family over the column range.
    pub fn to_symbolic_csv(&self, cols: std::ops::Range<usize>) -> Result<String> {
        if self.dimension() > 1 {
            return Err(Error::invalid("symbolic tables need dimension at most 1"));
        }
        let offsets = self.scenario.slot_offsets();
        Ok(render_csv(&self.scenario, cols, |c, s| {
            self.entry(offsets[c] + s)
                .expect("dimension <= 1")
                .to_string()
        }))
    }

    pub fn to_json(&self) -> FamilyJson {
        let offsets = self.scenario.slot_offsets();
        let split = |v: &[Rational]| -> Vec<Vec<Rational>> {
            (0..self.scenario.num_contexts())
                .map(|c| v[offsets[c]..offsets[c] + self.scenario.num_sections(c)].to_vec())
                .collect()
        };
        FamilyJson {
            scenario: self.scenario.clone(),
            dimension: self.dimension(),
            base: split(&self.base),
            directions: self.directions.iter().map(|d| split(d)).collect(),
            parameter_bounds: self.parameter_bounds.clone(),
        }
    }

    pub fn from_json(json: FamilyJson) -> Result<Self> {
        let scenario = json.scenario;
        let flatten = |t: Vec<Vec<Rational>>| -> Result<Vec<Rational>> {
            if t.len() != scenario.num_contexts()
                || t.iter()
                    .enumerate()
                    .any(|(c, row)| row.len() != scenario.num_sections(c))
            {
                return Err(Error::Parse("family table has wrong shape".into()));
            }
            Ok(t.into_iter().flatten().collect())
        };
        let base = flatten(json.base)?;
        let directions = json
            .directions
            .into_iter()
            .map(flatten)
            .collect::<Result<Vec<_>>>()?;
        if directions.len() != json.dimension {
            return Err(Error::Parse(
                "dimension does not match direction count".into(),
            ));
        }
        Ok(AffineFamily {
            scenario,
            base,
            directions,
            parameter_bounds: json.parameter_bounds,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("family serializes")
    }
}

/// Wire form of an affine family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyJson {
    pub scenario: MeasurementScenario,
    pub dimension: usize,
    pub base: Vec<Vec<Rational>>,
    pub directions: Vec<Vec<Vec<Rational>>>,
    pub parameter_bounds: Option<ParameterBounds>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Contextuality {
    Noncontextual,
    Contextual,
    MaximallyContextual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MaximalClass {
    #[serde(rename = "AMCC")]
    Amcc,
    #[serde(rename = "non-AMCC")]
    NonAmcc,
    #[serde(rename = "not maximal")]
    NotMaximal,
}

impl fmt::Display for MaximalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaximalClass::Amcc => "AMCC",
            MaximalClass::NonAmcc => "non-AMCC",
            MaximalClass::NotMaximal => "not maximal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub cf: Rational,
    pub contextuality: Contextuality,
    pub maximal_marginals: bool,
    pub class: MaximalClass,
    pub marginal_witness: Option<MarginalWitness>,
}

/// Contextual fraction plus maximal-marginals check.
pub fn classify(model: &EmpiricalModel) -> Result<Classification> {
    let cf = contextual_fraction(model)?.cf;
    let marginal_witness = model.maximal_marginals_witness()?;
    let maximal_marginals = marginal_witness.is_none();
    let contextuality = if cf.is_zero() {
        Contextuality::Noncontextual
    } else if cf.is_one() {
        Contextuality::MaximallyContextual
    } else {
        Contextuality::Contextual
    };
    let class = match (contextuality, maximal_marginals) {
        (Contextuality::MaximallyContextual, true) => MaximalClass::Amcc,
        (Contextuality::MaximallyContextual, false) => MaximalClass::NonAmcc,
        _ => MaximalClass::NotMaximal,
    };
    Ok(Classification {
        cf,
        contextuality,
        maximal_marginals,
        class,
        marginal_witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::possibilistic::support_of;
    use crate::rational::r;

    #[test]
    fn ns_dimensions() {
        assert_eq!(
            ns_dimension(&MeasurementScenario::bell(1, 1, 2).unwrap()),
            1
        );
        assert_eq!(
            ns_dimension(&MeasurementScenario::bell(2, 2, 2).unwrap()),
            8
        );
        assert_eq!(
            ns_dimension(&MeasurementScenario::bell(3, 2, 2).unwrap()),
            26
        );
    }

    #[test]
    fn pr_box_support_is_rigid() {
        let pr = corpus::pr_box(0).unwrap();
        let fam = solve_support(&support_of(&pr)).unwrap().family().unwrap();
        assert_eq!(fam.dimension(), 0);
        assert_eq!(fam.model_at(&[]).unwrap(), pr);
    }

    #[test]
    fn full_support_222_has_dimension_8() {
        let s = MeasurementScenario::bell(2, 2, 2).unwrap();
        let fam = solve_support(&SupportModel::full(&s))
            .unwrap()
            .family()
            .unwrap();
        assert_eq!(fam.dimension(), 8);
        assert!(fam.parameter_bounds.is_none());
        let ones = vec![Rational::one(); 8];
        assert!(fam.satisfies_equalities(&fam.point(&ones).unwrap()));
        let u = corpus::uniform(&s);
        assert!(fam.parameters_of(&u).is_some());
    }

    #[test]
    fn infeasible_support() {
        // Alice's Y1 outcome is 0 with Y2 but 1 with Y2'
        let s = MeasurementScenario::bell(2, 2, 2).unwrap();
        let supports = vec![
            SectionSet::from_indices(4, [0]),
            SectionSet::from_indices(4, [3]),
            SectionSet::full(4),
            SectionSet::full(4),
        ];
        let sup = SupportModel::new(s, supports).unwrap();
        assert_eq!(solve_support(&sup).unwrap(), SupportSolution::Infeasible);
    }

    #[test]
    fn one_parameter_family_and_interval() {
        // (1,2,2): one party, two settings, no overlaps; restrict Y1 to one
        // outcome and leave Y1' free: p(Y1' = 0) = q, p(Y1' = 1) = 1 - q
        let s = MeasurementScenario::bell(1, 2, 2).unwrap();
        let sup = SupportModel::new(
            s,
            vec![SectionSet::full(2), SectionSet::from_indices(2, [0])],
        )
        .unwrap();
        let fam = solve_support(&sup).unwrap().family().unwrap();
        assert_eq!(fam.dimension(), 1);
        assert_eq!(fam.parameter_slot(), Some(0));
        assert_eq!(fam.entry(0).unwrap().to_string(), "q");
        assert_eq!(fam.entry(1).unwrap().to_string(), "1-q");
        let b = fam.parameter_bounds.clone().unwrap();
        assert_eq!(
            b,
            ParameterBounds {
                lower: Some(r(0, 1)),
                upper: Some(r(1, 1))
            }
        );
        assert!(fam.model_at(&[r(1, 3)]).is_ok());
        assert!(fam.model_at(&[r(3, 2)]).is_err());
    }

    #[test]
    fn symbolic_entries() {
        for (text, c, m) in [
            ("q", (0, 1), (1, 1)),
            ("0", (0, 1), (0, 1)),
            ("1/4-q", (1, 4), (-1, 1)),
            ("2q-1/4", (-1, 4), (2, 1)),
        ] {
            let e: AffineEntry = text.parse().unwrap();
            assert_eq!(
                e,
                AffineEntry {
                    constant: r(c.0, c.1),
                    slope: r(m.0, m.1)
                }
            );
            assert_eq!(e.to_string(), text);
        }
        assert_eq!("-q".parse::<AffineEntry>().unwrap().to_string(), "-q");
        assert_eq!(
            "1/2q+3".parse::<AffineEntry>().unwrap().to_string(),
            "1/2q+3"
        );
        assert!("".parse::<AffineEntry>().is_err());
        assert!("x".parse::<AffineEntry>().is_err());
    }

    #[test]
    fn classify_extremes() {
        let c = classify(&corpus::pr_box(5).unwrap()).unwrap();
        assert_eq!(c.class, MaximalClass::Amcc);
        let u = classify(&corpus::uniform(
            &MeasurementScenario::bell(2, 2, 2).unwrap(),
        ))
        .unwrap();
        assert_eq!(u.contextuality, Contextuality::Noncontextual);
        assert!(u.maximal_marginals);
        assert_eq!(u.class, MaximalClass::NotMaximal);
    }

    #[test]
    fn family_json_round_trip() {
        let s = MeasurementScenario::bell(1, 2, 2).unwrap();
        let sup = SupportModel::new(
            s,
            vec![SectionSet::full(2), SectionSet::from_indices(2, [0])],
        )
        .unwrap();
        let fam = solve_support(&sup).unwrap().family().unwrap();
        let back =
            AffineFamily::from_json(serde_json::from_str(&fam.to_json_string()).unwrap()).unwrap();
        assert_eq!(back, fam);
    }
}
