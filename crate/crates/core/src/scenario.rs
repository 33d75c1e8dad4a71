//! Measurement scenarios, sections and the incidence matrix.
//!
//! Orderings are fixed so every table this crate prints is reproducible:
//!
//! * Bell measurements are ordered party-major, then by setting
//!   (`Y1, Y1', Y2, Y2', ...`).
//! * Bell contexts are ordered lexicographically by their setting tuple.
//! * Sections of a context are indexed by the big-endian mixed-radix
//!   integer of their outcomes, in the context's measurement order.
//! * Global sections are indexed the same way over all measurements.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of global sections this crate will enumerate.
pub const MAX_GLOBAL_SECTIONS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellShape {
    pub parties: usize,
    pub settings: usize,
    pub outcomes: usize,
}

/// A triple of measurement labels, a cover of contexts, and outcome arities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementScenario {
    measurements: Vec<String>,
    cover: Vec<Vec<usize>>,
    outcomes: Vec<usize>,
    bell: Option<BellShape>,
    // mixed-radix strides of each measurement inside a global index
    global_strides: Vec<usize>,
    global_count: usize,
}

/// An outcome assignment to the measurements of one context.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Section {
    pub context: usize,
    pub assignment: Vec<usize>,
}

/// An outcome assignment to every measurement of the scenario.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalSection {
    pub assignment: Vec<usize>,
}

impl MeasurementScenario {
    /// Builds a scenario from an explicit cover, validating it.
    ///
    /// Each context is sorted; duplicates inside a context, duplicate
    /// contexts, uncovered measurements and nested contexts are rejected.
    pub fn new(
        measurements: Vec<String>,
        cover: Vec<Vec<usize>>,
        outcomes: Vec<usize>,
    ) -> Result<Self> {
        Self::build(measurements, cover, outcomes, None)
    }

    /// The Bell scenario `(parties, settings, outcomes)`: one context per
    /// choice of one setting for every party.
    pub fn bell(parties: usize, settings: usize, outcomes: usize) -> Result<Self> {
        if parties == 0 || settings == 0 || outcomes == 0 {
            return Err(Error::invalid(format!(
                "bell scenario needs positive counts, got ({parties},{settings},{outcomes})"
            )));
        }
        let contexts = settings
            .checked_pow(parties as u32)
            .filter(|&c| c <= MAX_GLOBAL_SECTIONS)
            .ok_or_else(|| Error::ResourceLimit("too many contexts".into()))?;
        let mut measurements = Vec::with_capacity(parties * settings);
        for p in 0..parties {
            for s in 0..settings {
                measurements.push(format!("Y{}{}", p + 1, "'".repeat(s)));
            }
        }
        let cover = (0..contexts)
            .map(|i| {
                setting_tuple(i, parties, settings)
                    .into_iter()
                    .enumerate()
                    .map(|(p, s)| p * settings + s)
                    .collect()
            })
            .collect();
        let shape = BellShape {
            parties,
            settings,
            outcomes,
        };
        Self::build(
            measurements,
            cover,
            vec![outcomes; parties * settings],
            Some(shape),
        )
    }

    fn build(
        measurements: Vec<String>,
        cover: Vec<Vec<usize>>,
        outcomes: Vec<usize>,
        bell: Option<BellShape>,
    ) -> Result<Self> {
        let n = measurements.len();
        if n == 0 {
            return Err(Error::invalid("scenario has no measurements"));
        }
        if outcomes.len() != n {
            return Err(Error::invalid(format!(
                "{} outcome arities for {} measurements",
                outcomes.len(),
                n
            )));
        }
        if outcomes.contains(&0) {
            return Err(Error::invalid("outcome arity must be at least 1"));
        }
        let labels: BTreeSet<&str> = measurements.iter().map(String::as_str).collect();
        if labels.len() != n {
            return Err(Error::invalid("duplicate measurement label"));
        }
        if cover.is_empty() {
            return Err(Error::invalid("cover is empty"));
        }
        let mut sorted_cover = Vec::with_capacity(cover.len());
        let mut covered = vec![false; n];
        for ctx in cover {
            let set: BTreeSet<usize> = ctx.iter().copied().collect();
            if set.len() != ctx.len() {
                return Err(Error::invalid(format!(
                    "context {ctx:?} repeats a measurement"
                )));
            }
            if set.is_empty() {
                return Err(Error::invalid("empty context"));
            }
            if let Some(&bad) = set.iter().find(|&&m| m >= n) {
                return Err(Error::invalid(format!(
                    "measurement index {bad} out of range"
                )));
            }
            for &m in &set {
                covered[m] = true;
            }
            sorted_cover.push(set.into_iter().collect::<Vec<_>>());
        }
        if let Some(m) = covered.iter().position(|c| !c) {
            return Err(Error::invalid(format!(
                "measurement {} is in no context",
                measurements[m]
            )));
        }
        for (i, a) in sorted_cover.iter().enumerate() {
            for (j, b) in sorted_cover.iter().enumerate() {
                if i != j && is_subset(a, b) {
                    return Err(Error::invalid(format!(
                        "context {a:?} is contained in context {b:?}"
                    )));
                }
            }
        }

        let mut global_strides = vec![0; n];
        let mut stride = 1usize;
        for m in (0..n).rev() {
            global_strides[m] = stride;
            stride = stride
                .checked_mul(outcomes[m])
                .filter(|&s| s <= MAX_GLOBAL_SECTIONS)
                .ok_or_else(|| Error::ResourceLimit("too many global sections".into()))?;
        }
        Ok(MeasurementScenario {
            measurements,
            cover: sorted_cover,
            outcomes,
            bell,
            global_strides,
            global_count: stride,
        })
    }

    pub fn measurements(&self) -> &[String] {
        &self.measurements
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements.len()
    }

    pub fn cover(&self) -> &[Vec<usize>] {
        &self.cover
    }

    pub fn num_contexts(&self) -> usize {
        self.cover.len()
    }

    pub fn context(&self, c: usize) -> &[usize] {
        &self.cover[c]
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn bell_shape(&self) -> Option<BellShape> {
        self.bell
    }

    /// True when every measurement has exactly two outcomes.
    pub fn is_binary(&self) -> bool {
        self.outcomes.iter().all(|&o| o == 2)
    }

    pub fn num_sections(&self, c: usize) -> usize {
        self.cover[c].iter().map(|&m| self.outcomes[m]).product()
    }

    /// Total number of (context, section) slots.
    pub fn num_slots(&self) -> usize {
        (0..self.num_contexts()).map(|c| self.num_sections(c)).sum()
    }

    /// First slot of each context in the stacked (context, section) layout.
    pub fn slot_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.num_contexts());
        let mut acc = 0;
        for c in 0..self.num_contexts() {
            offsets.push(acc);
            acc += self.num_sections(c);
        }
        offsets
    }

    pub fn num_global_sections(&self) -> usize {
        self.global_count
    }

    /// Index of a context by its (sorted or unsorted) measurement set.
    pub fn find_context(&self, measurements: &[usize]) -> Option<usize> {
        let mut key = measurements.to_vec();
        key.sort_unstable();
        self.cover.iter().position(|c| *c == key)
    }

    /// Setting tuple of a Bell context.
    pub fn setting_tuple(&self, c: usize) -> Option<Vec<usize>> {
        self.bell.map(|b| setting_tuple(c, b.parties, b.settings))
    }

    /// Outcome digit of measurement `m` inside a global index.
    pub fn global_digit(&self, global: usize, m: usize) -> usize {
        (global / self.global_strides[m]) % self.outcomes[m]
    }

    pub fn section_index(&self, c: usize, assignment: &[usize]) -> Result<usize> {
        let ctx = self
            .cover
            .get(c)
            .ok_or_else(|| Error::invalid(format!("unknown context {c}")))?;
        if assignment.len() != ctx.len() {
            return Err(Error::invalid(format!(
                "section of length {} for context of size {}",
                assignment.len(),
                ctx.len()
            )));
        }
        let mut idx = 0;
        for (&m, &v) in ctx.iter().zip(assignment) {
            if v >= self.outcomes[m] {
                return Err(Error::invalid(format!(
                    "outcome {v} out of range for {}",
                    self.measurements[m]
                )));
            }
            idx = idx * self.outcomes[m] + v;
        }
        Ok(idx)
    }

    pub fn section_assignment(&self, c: usize, mut index: usize) -> Vec<usize> {
        let ctx = &self.cover[c];
        let mut out = vec![0; ctx.len()];
        for (pos, &m) in ctx.iter().enumerate().rev() {
            out[pos] = index % self.outcomes[m];
            index /= self.outcomes[m];
        }
        out
    }

    pub fn section(&self, c: usize, index: usize) -> Section {
        Section {
            context: c,
            assignment: self.section_assignment(c, index),
        }
    }

    pub fn global_index(&self, g: &GlobalSection) -> Result<usize> {
        if g.assignment.len() != self.num_measurements() {
            return Err(Error::invalid("global section has wrong length"));
        }
        let mut idx = 0;
        for (m, &v) in g.assignment.iter().enumerate() {
            if v >= self.outcomes[m] {
                return Err(Error::invalid("outcome out of range"));
            }
            idx += v * self.global_strides[m];
        }
        Ok(idx)
    }

    pub fn global_section(&self, index: usize) -> GlobalSection {
        GlobalSection {
            assignment: (0..self.num_measurements())
                .map(|m| self.global_digit(index, m))
                .collect(),
        }
    }

    /// All global sections in canonical order.
    pub fn enumerate_global_sections(&self) -> Vec<GlobalSection> {
        (0..self.global_count)
            .map(|g| self.global_section(g))
            .collect()
    }

    /// Section index of the restriction of global section `global` to context `c`.
    #[inline]
    pub fn restrict_index(&self, global: usize, c: usize) -> usize {
        let mut idx = 0;
        for &m in &self.cover[c] {
            idx = idx * self.outcomes[m] + self.global_digit(global, m);
        }
        idx
    }

    pub fn restrict(&self, global: &GlobalSection, c: usize) -> Result<Section> {
        let ctx = self
            .cover
            .get(c)
            .ok_or_else(|| Error::invalid(format!("unknown context {c}")))?;
        if global.assignment.len() != self.num_measurements() {
            return Err(Error::invalid("global section has wrong length"));
        }
        Ok(Section {
            context: c,
            assignment: ctx.iter().map(|&m| global.assignment[m]).collect(),
        })
    }

    /// For each context, a lookup from global index to restricted section index.
    pub fn restriction_table(&self) -> Vec<Vec<usize>> {
        (0..self.num_contexts())
            .map(|c| {
                (0..self.global_count)
                    .map(|g| self.restrict_index(g, c))
                    .collect()
            })
            .collect()
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let offsets = self.slot_offsets();
        let columns = (0..self.global_count)
            .map(|g| {
                (0..self.num_contexts())
                    .map(|c| offsets[c] + self.restrict_index(g, c))
                    .collect()
            })
            .collect();
        IncidenceMatrix {
            rows: self.num_slots(),
            offsets,
            columns,
        }
    }

    /// Human-readable context label: the setting tuple for Bell scenarios,
    /// the measurement set otherwise.
    pub fn context_label(&self, c: usize) -> String {
        match self.setting_tuple(c) {
            Some(t) => tuple_label(&t),
            None => format!(
                "{{{}}}",
                self.cover[c]
                    .iter()
                    .map(|&m| self.measurements[m].as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }

    pub fn section_label(&self, c: usize, index: usize) -> String {
        tuple_label(&self.section_assignment(c, index))
    }

    pub fn to_json_value(&self) -> ScenarioJson {
        match self.bell {
            Some(b) => ScenarioJson::Bell {
                parties: b.parties,
                settings: b.settings,
                outcomes: b.outcomes,
            },
            None => ScenarioJson::Explicit {
                measurements: self.measurements.clone(),
                cover: self
                    .cover
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|&m| MeasurementRef::Label(self.measurements[m].clone()))
                            .collect()
                    })
                    .collect(),
                outcomes: self.outcomes.clone(),
            },
        }
    }

    pub fn from_json_value(v: ScenarioJson) -> Result<Self> {
        match v {
            ScenarioJson::Bell {
                parties,
                settings,
                outcomes,
            } => Self::bell(parties, settings, outcomes),
            ScenarioJson::Explicit {
                measurements,
                cover,
                outcomes,
            } => {
                let cover = cover
                    .into_iter()
                    .map(|ctx| {
                        ctx.into_iter()
                            .map(|m| match m {
                                MeasurementRef::Index(i) => Ok(i),
                                MeasurementRef::Label(l) => {
                                    measurements.iter().position(|x| *x == l).ok_or_else(|| {
                                        Error::Parse(format!("unknown measurement {l:?}"))
                                    })
                                }
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(measurements, cover, outcomes)
            }
        }
    }
}

impl fmt::Display for MeasurementScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bell {
            Some(b) => write!(f, "({},{},{})", b.parties, b.settings, b.outcomes),
            None => write!(
                f,
                "scenario with {} measurements and {} contexts",
                self.num_measurements(),
                self.num_contexts()
            ),
        }
    }
}

impl Serialize for MeasurementScenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasurementScenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = ScenarioJson::deserialize(d)?;
        Self::from_json_value(v).map_err(serde::de::Error::custom)
    }
}

/// Wire form of a scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioJson {
    Bell {
        parties: usize,
        settings: usize,
        outcomes: usize,
    },
    Explicit {
        measurements: Vec<String>,
        cover: Vec<Vec<MeasurementRef>>,
        outcomes: Vec<usize>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementRef {
    Index(usize),
    Label(String),
}

/// 0/1 matrix with one row per (context, section) slot and one column per
/// global section. Stored column-wise: each column lists its one nonzero row
/// per context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    offsets: Vec<usize>,
    columns: Vec<Vec<usize>>,
}

impl IncidenceMatrix {
    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    /// Nonzero rows of a column, one per context in cover order.
    pub fn column(&self, g: usize) -> &[usize] {
        &self.columns[g]
    }

    pub fn context_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.columns[col].contains(&row)
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut dense = vec![vec![0u8; self.num_cols()]; self.rows];
        for (g, col) in self.columns.iter().enumerate() {
            for &row in col {
                dense[row][g] = 1;
            }
        }
        dense
    }
}

pub(crate) fn setting_tuple(mut index: usize, parties: usize, settings: usize) -> Vec<usize> {
    let mut t = vec![0; parties];
    for p in (0..parties).rev() {
        t[p] = index % settings;
        index /= settings;
    }
    t
}

pub(crate) fn tuple_label(t: &[usize]) -> String {
    format!(
        "({})",
        t.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    )
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Sorted intersection of two sorted index lists.
pub(crate) fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter()
        .copied()
        .filter(|x| b.binary_search(x).is_ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_sizes() {
        let s = MeasurementScenario::bell(2, 2, 2).unwrap();
        assert_eq!(s.num_measurements(), 4);
        assert_eq!(s.num_contexts(), 4);
        assert!(s.cover().iter().all(|c| c.len() == 2));

        let s = MeasurementScenario::bell(4, 2, 2).unwrap();
        assert_eq!(s.num_measurements(), 8);
        assert_eq!(s.num_contexts(), 16);
        assert!(s.cover().iter().all(|c| c.len() == 4));
        assert_eq!(s.measurements()[1], "Y1'");
        assert_eq!(s.context(1), &[0, 2, 4, 7]);

        let s = MeasurementScenario::bell(1, 1, 2).unwrap();
        assert_eq!(s.num_measurements(), 1);
        assert_eq!(s.num_contexts(), 1);
    }

    #[test]
    fn bell_rejects_zero_counts() {
        for (n, m, o) in [(0, 2, 2), (2, 0, 2), (2, 2, 0)] {
            assert!(matches!(
                MeasurementScenario::bell(n, m, o),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn global_section_counts() {
        assert_eq!(
            MeasurementScenario::bell(2, 2, 2)
                .unwrap()
                .enumerate_global_sections()
                .len(),
            16
        );
        assert_eq!(
            MeasurementScenario::bell(4, 2, 2)
                .unwrap()
                .enumerate_global_sections()
                .len(),
            256
        );
        assert_eq!(
            MeasurementScenario::bell(1, 1, 2)
                .unwrap()
                .enumerate_global_sections()
                .len(),
            2
        );
        let s = MeasurementScenario::bell(2, 2, 3).unwrap();
        let all = s.enumerate_global_sections();
        assert_eq!(all.len(), 81);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn restrict_projects_in_context_order() {
        let s = MeasurementScenario::bell(4, 2, 2).unwrap();
        let g = GlobalSection {
            assignment: vec![0, 1, 0, 1, 0, 1, 0, 1],
        };
        let sec = s.restrict(&g, 0).unwrap();
        assert_eq!(sec.assignment, vec![0, 0, 0, 0]);
        let last = s.restrict(&g, 15).unwrap();
        assert_eq!(last.assignment, vec![1, 1, 1, 1]);
        let gi = s.global_index(&g).unwrap();
        assert_eq!(s.restrict_index(gi, 0), 0);
        assert_eq!(s.restrict_index(gi, 15), 15);
        assert!(s.restrict(&g, 16).is_err());

        let s2 = MeasurementScenario::bell(2, 2, 2).unwrap();
        let zero = s2.global_section(0);
        for c in 0..4 {
            assert_eq!(s2.restrict(&zero, c).unwrap().assignment, vec![0, 0]);
        }
    }

    #[test]
    fn restrict_to_full_context_is_identity() {
        let s = MeasurementScenario::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![vec![0, 1, 2]],
            vec![2, 3, 2],
        )
        .unwrap();
        for g in s.enumerate_global_sections() {
            assert_eq!(s.restrict(&g, 0).unwrap().assignment, g.assignment);
        }
    }

    #[test]
    fn incidence_small() {
        let s = MeasurementScenario::bell(1, 1, 2).unwrap();
        assert_eq!(
            s.incidence_matrix().to_dense(),
            vec![vec![1, 0], vec![0, 1]]
        );

        let s = MeasurementScenario::bell(2, 2, 2).unwrap();
        let m = s.incidence_matrix().to_dense();
        assert_eq!((m.len(), m[0].len()), (16, 16));
        for g in 0..16 {
            assert_eq!(m.iter().map(|row| row[g] as usize).sum::<usize>(), 4);
        }
    }

    #[test]
    fn cover_validation() {
        let labels = || vec!["A".to_string(), "B".to_string(), "C".to_string()];
        // nested context
        assert!(MeasurementScenario::new(labels(), vec![vec![0, 1], vec![0]], vec![2; 3]).is_err());
        // uncovered measurement
        assert!(MeasurementScenario::new(labels(), vec![vec![0, 1]], vec![2; 3]).is_err());
        // repeated measurement inside a context
        assert!(
            MeasurementScenario::new(labels(), vec![vec![0, 0, 1], vec![1, 2]], vec![2; 3])
                .is_err()
        );
        // triangle cover is fine, unsorted input is sorted
        let s = MeasurementScenario::new(
            labels(),
            vec![vec![1, 0], vec![1, 2], vec![2, 0]],
            vec![2; 3],
        )
        .unwrap();
        assert_eq!(s.context(0), &[0, 1]);
        assert_eq!(s.context(2), &[0, 2]);
    }

    #[test]
    fn json_forms() {
        let s: MeasurementScenario =
            serde_json::from_str(r#"{"parties":2,"settings":2,"outcomes":2}"#).unwrap();
        assert_eq!(s, MeasurementScenario::bell(2, 2, 2).unwrap());
        let e: MeasurementScenario = serde_json::from_str(
            r#"{"measurements":["A","B","C"],"cover":[["A","B"],[1,2],["A","C"]],"outcomes":[2,2,2]}"#,
        )
        .unwrap();
        assert_eq!(e.num_contexts(), 3);
        let again: MeasurementScenario =
            serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(again, e);
    }

    #[test]
    fn labels() {
        let s = MeasurementScenario::bell(4, 2, 2).unwrap();
        assert_eq!(s.context_label(10), "(1,0,1,0)");
        assert_eq!(s.section_label(10, 3), "(0,0,1,1)");
    }
}
