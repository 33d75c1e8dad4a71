//! Exact-rational empirical models over a measurement scenario.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::scenario::{intersect, MeasurementScenario};

/// One probability distribution per context, indexed by section.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalModel {
    scenario: MeasurementScenario,
    tables: Vec<Vec<Rational>>,
}

/// Marginal of one context's distribution onto a subset of its measurements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalTable {
    /// Sorted measurement indices.
    pub subset: Vec<usize>,
    /// Weight per section of `subset`, big-endian mixed-radix order.
    pub weights: Vec<Rational>,
}

/// Two contexts whose marginals disagree on their common measurements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignalingWitness {
    pub first: usize,
    pub second: usize,
    pub overlap: Vec<usize>,
    pub section: Vec<usize>,
    pub lhs: Rational,
    pub rhs: Rational,
}

impl fmt::Display for SignalingWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "contexts {} and {} disagree on measurements {:?} at outcome {:?}: {} vs {}",
            self.first, self.second, self.overlap, self.section, self.lhs, self.rhs
        )
    }
}

/// A proper marginal that is not uniform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalWitness {
    pub context: usize,
    pub subset: Vec<usize>,
    pub section: Vec<usize>,
    pub weight: Rational,
    pub expected: Rational,
}

impl fmt::Display for MarginalWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "marginal of context {} on measurements {:?} at {:?} is {}, expected {}",
            self.context, self.subset, self.section, self.weight, self.expected
        )
    }
}

impl EmpiricalModel {
    /// Validates nonnegativity, normalization and table shapes.
    pub fn new(scenario: MeasurementScenario, tables: Vec<Vec<Rational>>) -> Result<Self> {
        if tables.len() != scenario.num_contexts() {
            return Err(Error::invalid(format!(
                "{} tables for {} contexts",
                tables.len(),
                scenario.num_contexts()
            )));
        }
        for (c, t) in tables.iter().enumerate() {
            if t.len() != scenario.num_sections(c) {
                return Err(Error::invalid(format!(
                    "context {c} has {} entries, expected {}",
                    t.len(),
                    scenario.num_sections(c)
                )));
            }
            if let Some(w) = t.iter().find(|w| w.is_negative()) {
                return Err(Error::invalid(format!(
                    "negative weight {w} in context {c}"
                )));
            }
            let total: Rational = t.iter().sum();
            if !total.is_one() {
                return Err(Error::invalid(format!(
                    "context {c} sums to {total}, not 1"
                )));
            }
        }
        Ok(EmpiricalModel { scenario, tables })
    }

    pub fn from_fn(
        scenario: MeasurementScenario,
        mut weight: impl FnMut(usize, usize) -> Rational,
    ) -> Result<Self> {
        let tables = (0..scenario.num_contexts())
            .map(|c| {
                (0..scenario.num_sections(c))
                    .map(|s| weight(c, s))
                    .collect()
            })
            .collect();
        Self::new(scenario, tables)
    }

    /// Builds a model from the stacked (context, section) vector.
    pub fn from_stacked(scenario: MeasurementScenario, values: &[Rational]) -> Result<Self> {
        if values.len() != scenario.num_slots() {
            return Err(Error::invalid("stacked vector has wrong length"));
        }
        let offsets = scenario.slot_offsets();
        Self::from_fn(scenario, |c, s| values[offsets[c] + s].clone())
    }

    pub fn scenario(&self) -> &MeasurementScenario {
        &self.scenario
    }

    pub fn tables(&self) -> &[Vec<Rational>] {
        &self.tables
    }

    pub fn table(&self, c: usize) -> &[Rational] {
        &self.tables[c]
    }

    pub fn weight(&self, c: usize, s: usize) -> &Rational {
        &self.tables[c][s]
    }

    /// All tables concatenated in context order (the vector `v` of `M d = v`).
    pub fn stacked(&self) -> Vec<Rational> {
        self.tables.iter().flatten().cloned().collect()
    }

    /// `lambda * a + (1 - lambda) * b`.
    pub fn mix(lambda: &Rational, a: &EmpiricalModel, b: &EmpiricalModel) -> Result<Self> {
        if a.scenario != b.scenario {
            return Err(Error::invalid("cannot mix models over different scenarios"));
        }
        if lambda.is_negative() || *lambda > 1 {
            return Err(Error::invalid(format!(
                "mixing weight {lambda} outside [0,1]"
            )));
        }
        let rest = Rational::one() - lambda;
        Self::from_fn(a.scenario.clone(), |c, s| {
            lambda * a.weight(c, s) + &rest * b.weight(c, s)
        })
    }

    /// Marginal of context `c` onto the measurement subset `subset`.
    pub fn marginalize(&self, c: usize, subset: &[usize]) -> Result<MarginalTable> {
        if c >= self.scenario.num_contexts() {
            return Err(Error::invalid(format!("unknown context {c}")));
        }
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        let ctx = self.scenario.context(c);
        let positions: Vec<usize> = subset
            .iter()
            .map(|m| {
                ctx.binary_search(m)
                    .map_err(|_| Error::invalid(format!("measurement {m} is not in context {c}")))
            })
            .collect::<Result<_>>()?;
        Ok(self.marginal_at_positions(c, &positions))
    }

    fn marginal_at_positions(&self, c: usize, positions: &[usize]) -> MarginalTable {
        let ctx = self.scenario.context(c);
        let arities = self.scenario.outcomes();
        let subset: Vec<usize> = positions.iter().map(|&p| ctx[p]).collect();
        let size: usize = subset.iter().map(|&m| arities[m]).product();
        let mut weights = vec![Rational::zero(); size];
        for (s, w) in self.tables[c].iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let assignment = self.scenario.section_assignment(c, s);
            let idx = positions
                .iter()
                .fold(0, |acc, &p| acc * arities[ctx[p]] + assignment[p]);
            weights[idx] += w;
        }
        MarginalTable { subset, weights }
    }

    /// First pair of contexts whose marginals on their overlap differ.
    pub fn no_signaling_witness(&self) -> Option<SignalingWitness> {
        let n = self.scenario.num_contexts();
        for a in 0..n {
            for b in (a + 1)..n {
                let overlap = intersect(self.scenario.context(a), self.scenario.context(b));
                if overlap.is_empty() {
                    continue;
                }
                let ma = self
                    .marginalize(a, &overlap)
                    .expect("overlap is in context");
                let mb = self
                    .marginalize(b, &overlap)
                    .expect("overlap is in context");
                if let Some(i) = (0..ma.weights.len()).find(|&i| ma.weights[i] != mb.weights[i]) {
                    let arities: Vec<usize> = overlap
                        .iter()
                        .map(|&m| self.scenario.outcomes()[m])
                        .collect();
                    return Some(SignalingWitness {
                        first: a,
                        second: b,
                        section: decode(i, &arities),
                        overlap,
                        lhs: ma.weights[i].clone(),
                        rhs: mb.weights[i].clone(),
                    });
                }
            }
        }
        None
    }

    pub fn is_no_signaling(&self) -> bool {
        self.no_signaling_witness().is_none()
    }

    /// Errors with the witness when the model signals.
    pub fn require_no_signaling(&self) -> Result<()> {
        match self.no_signaling_witness() {
            None => Ok(()),
            Some(w) => Err(Error::Precondition(format!("model is signaling: {w}"))),
        }
    }

    /// First non-uniform proper marginal, scanning each context's proper
    /// nonempty measurement subsets.
    pub fn maximal_marginals_witness(&self) -> Result<Option<MarginalWitness>> {
        self.require_no_signaling()?;
        let arities = self.scenario.outcomes();
        for c in 0..self.scenario.num_contexts() {
            let ctx = self.scenario.context(c);
            let k = ctx.len();
            for mask in 1u64..((1u64 << k) - 1) {
                let positions: Vec<usize> = (0..k).filter(|p| mask >> p & 1 == 1).collect();
                let marginal = self.marginal_at_positions(c, &positions);
                let expected = Rational::from_integer(marginal.weights.len() as i64).recip();
                if let Some(i) = marginal.weights.iter().position(|w| *w != expected) {
                    let sub_arities: Vec<usize> =
                        marginal.subset.iter().map(|&m| arities[m]).collect();
                    return Ok(Some(MarginalWitness {
                        context: c,
                        section: decode(i, &sub_arities),
                        weight: marginal.weights[i].clone(),
                        subset: marginal.subset,
                        expected,
                    }));
                }
            }
        }
        Ok(None)
    }

    /// True when every proper marginal is uniform. Requires no-signaling.
    pub fn is_maximal_marginals(&self) -> Result<bool> {
        Ok(self.maximal_marginals_witness()?.is_none())
    }

    /// All marginals onto `k`-element measurement subsets drawn from contexts,
    /// deduplicated by subset (first context wins).
    pub fn marginals_of_size(&self, k: usize) -> Vec<(usize, MarginalTable)> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for c in 0..self.scenario.num_contexts() {
            let len = self.scenario.context(c).len();
            if k == 0 || k > len {
                continue;
            }
            for positions in combinations(len, k) {
                let m = self.marginal_at_positions(c, &positions);
                if seen.insert(m.subset.clone()) {
                    out.push((c, m));
                }
            }
        }
        out
    }

    /// CSV rendering: one row per context, one column per section, over the
    /// column range `cols`.
    pub fn to_csv(&self, cols: std::ops::Range<usize>) -> String {
        render_csv(&self.scenario, cols, |c, s| self.tables[c][s].to_string())
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            scenario: self.scenario.clone(),
            tables: self.tables.clone(),
        }
    }

    pub fn from_json(json: ModelJson) -> Result<Self> {
        Self::new(json.scenario, json.tables)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("model serializes")
    }
}

/// Wire form: `{ "scenario": {...}, "tables": [["1/8", "0", ...], ...] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelJson {
    pub scenario: MeasurementScenario,
    pub tables: Vec<Vec<Rational>>,
}

pub(crate) fn decode(mut index: usize, arities: &[usize]) -> Vec<usize> {
    let mut out = vec![0; arities.len()];
    for (pos, &a) in arities.iter().enumerate().rev() {
        out[pos] = index % a;
        index /= a;
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u64..(1u64 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|p| m >> p & 1 == 1).collect())
        .collect()
}

/// Renders a context-by-section table as CSV. Header cells are section
/// tuples, row labels are context labels.
pub fn render_csv(
    scenario: &MeasurementScenario,
    cols: std::ops::Range<usize>,
    mut cell: impl FnMut(usize, usize) -> String,
) -> String {
    let mut out = String::new();
    let width = (0..scenario.num_contexts())
        .map(|c| scenario.num_sections(c))
        .max()
        .unwrap_or(0);
    let cols = cols.start.min(width)..cols.end.min(width);
    let mut header = vec![csv_field("Con.& Sec.")];
    // header uses the first context's section labels
    header.extend(
        cols.clone()
            .map(|s| csv_field(&scenario.section_label(0, s))),
    );
    out.push_str(&header.join(","));
    out.push('\n');
    for c in 0..scenario.num_contexts() {
        let mut row = vec![csv_field(&scenario.context_label(c))];
        for s in cols.clone() {
            row.push(if s < scenario.num_sections(c) {
                csv_field(&cell(c, s))
            } else {
                String::new()
            });
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
