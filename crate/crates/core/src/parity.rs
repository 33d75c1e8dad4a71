//! Parity-check construction over GF(2).
//!
//! Every context `C` of a binary scenario carries one equation
//! `Σ_{Y ∈ C} y = P_C (mod 2)`. A parity vector is unsatisfiable exactly
//! when it lies outside the image of the GF(2) map sending an assignment of
//! all measurements to its per-context parities. Two deciders are kept, an
//! exhaustive scan and Gaussian elimination, and every scan checks that they
//! agree.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::EmpiricalModel;
use crate::rational::Rational;
use crate::scenario::MeasurementScenario;

/// Largest context count accepted by [`parity_scan`].
pub const MAX_SCAN_CONTEXTS: usize = 24;

/// One parity bit per context of a binary scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParitySystem {
    scenario: MeasurementScenario,
    parities: Vec<bool>,
}

impl ParitySystem {
    pub fn new(scenario: MeasurementScenario, parities: Vec<bool>) -> Result<Self> {
        if !scenario.is_binary() {
            return Err(Error::invalid("parity systems need binary outcomes"));
        }
        if scenario.num_measurements() > 63 || scenario.num_contexts() > 64 {
            return Err(Error::invalid(
                "parity systems support at most 63 measurements and 64 contexts",
            ));
        }
        if parities.len() != scenario.num_contexts() {
            return Err(Error::invalid(format!(
                "{} parities for {} contexts",
                parities.len(),
                scenario.num_contexts()
            )));
        }
        Ok(ParitySystem { scenario, parities })
    }

    /// Parity vector packed with bit `c` holding context `c`.
    pub fn from_bits(scenario: MeasurementScenario, bits: u64) -> Result<Self> {
        let n = scenario.num_contexts();
        if n < 64 && bits >> n != 0 {
            return Err(Error::invalid(format!(
                "parity vector {bits:#x} wider than {n} contexts"
            )));
        }
        let parities = (0..n).map(|c| bits >> c & 1 == 1).collect();
        Self::new(scenario, parities)
    }

    /// Parses a hexadecimal parity vector (bit `c` = context `c`).
    pub fn from_hex(scenario: MeasurementScenario, hex: &str) -> Result<Self> {
        let digits = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
        let bits = u64::from_str_radix(digits, 16)
            .map_err(|_| Error::Parse(format!("invalid parity vector {hex:?}")))?;
        Self::from_bits(scenario, bits)
    }

    /// The (4,2,2) system with P11 = P12 = P13 = 1 (1-based) and all other
    /// parities even.
    pub fn paper_422() -> Self {
        let s = MeasurementScenario::bell(4, 2, 2).expect("valid scenario");
        let mut p = vec![false; 16];
        for c in [10, 11, 12] {
            p[c] = true;
        }
        ParitySystem::new(s, p).expect("binary scenario")
    }

    pub fn scenario(&self) -> &MeasurementScenario {
        &self.scenario
    }

    pub fn parities(&self) -> &[bool] {
        &self.parities
    }

    pub fn bits(&self) -> u64 {
        self.parities
            .iter()
            .enumerate()
            .fold(0, |acc, (c, &p)| acc | (p as u64) << c)
    }

    pub fn to_hex(&self) -> String {
        format!("{:x}", self.bits())
    }

    /// Whether section `s` of context `c` satisfies that context's equation.
    pub fn section_satisfies(&self, c: usize, s: usize) -> bool {
        (s.count_ones() % 2 == 1) == self.parities[c]
    }
}

/// Per-context masks over global-index bits: measurement `m` sits at bit
/// `n - 1 - m` of a global index (big-endian order).
fn context_masks(scenario: &MeasurementScenario) -> Vec<u64> {
    let n = scenario.num_measurements();
    scenario
        .cover()
        .iter()
        .map(|ctx| ctx.iter().fold(0u64, |acc, &m| acc | 1 << (n - 1 - m)))
        .collect()
}

/// Parity vector produced by a global assignment.
fn image_of(masks: &[u64], global: u64) -> u64 {
    masks.iter().enumerate().fold(0, |acc, (c, &mask)| {
        acc | (((global & mask).count_ones() & 1) as u64) << c
    })
}

/// Exhaustive decider: first global assignment meeting every equation.
pub fn satisfiable_by_scan(system: &ParitySystem) -> Option<usize> {
    let masks = context_masks(&system.scenario);
    let target = system.bits();
    (0..system.scenario.num_global_sections()).find(|&g| image_of(&masks, g as u64) == target)
}

/// Elimination decider: solves the GF(2) system `A y = P` and returns a
/// solution (free variables set to zero) when one exists.
pub fn satisfiable_by_elimination(system: &ParitySystem) -> Option<usize> {
    let masks = context_masks(&system.scenario);
    let n = system.scenario.num_measurements();
    // augmented rows: bits 0..n are the coefficient mask, bit n is the rhs
    let mut rows: Vec<u64> = masks
        .iter()
        .zip(&system.parities)
        .map(|(&m, &p)| m | (p as u64) << n)
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for bit in (0..n).rev() {
        let Some(p) = (r..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i] >> bit & 1 == 1 {
                rows[i] ^= rows[r];
            }
        }
        pivots.push(bit);
        r += 1;
    }
    // a zero coefficient row with rhs 1 is inconsistent
    if rows[r..].iter().any(|&row| row >> n & 1 == 1) {
        return None;
    }
    let mut solution = 0u64;
    for (i, &bit) in pivots.iter().enumerate() {
        if rows[i] >> n & 1 == 1 {
            solution |= 1 << bit;
        }
    }
    Some(solution as usize)
}

/// GF(2) rank of the assignment-to-parities map.
pub fn parity_map_rank(scenario: &MeasurementScenario) -> usize {
    let mut rows = context_masks(scenario);
    let mut rank = 0;
    for bit in (0..scenario.num_measurements()).rev() {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for i in 0..rows.len() {
            if i != rank && rows[i] >> bit & 1 == 1 {
                rows[i] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Satisfiability with a witness assignment (global index). Both deciders
/// run; a disagreement is reported as a verification failure.
pub fn parity_satisfiable(system: &ParitySystem) -> Result<Option<usize>> {
    let scan = satisfiable_by_scan(system);
    let elim = satisfiable_by_elimination(system);
    if scan.is_some() != elim.is_some() {
        return Err(Error::Verification(format!(
            "parity deciders disagree on {}",
            system.to_hex()
        )));
    }
    if let Some(g) = elim {
        let masks = context_masks(&system.scenario);
        if image_of(&masks, g as u64) != system.bits() {
            return Err(Error::Verification("elimination witness is wrong".into()));
        }
    }
    Ok(scan)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParityScanReport {
    pub scenario: String,
    pub contexts: usize,
    pub total: u64,
    pub unsatisfiable: u64,
    pub satisfiable: u64,
    /// GF(2) rank of the assignment-to-parities map.
    pub rank: usize,
    /// Exhaustive and elimination deciders agreed on every vector.
    pub deciders_agree: bool,
    /// `satisfiable == 2^rank`.
    pub matches_rank: bool,
    /// First unsatisfiable vectors in canonical order, hex with bit `c` = context `c`.
    pub examples: Vec<String>,
}

pub const SCAN_EXAMPLES: usize = 8;
const SCAN_CHUNK: u64 = 1 << 10;

/// Classifies every parity vector of a binary scenario.
pub fn parity_scan(scenario: &MeasurementScenario) -> Result<ParityScanReport> {
    if !scenario.is_binary() {
        return Err(Error::invalid("parity scan needs binary outcomes"));
    }
    let n_ctx = scenario.num_contexts();
    if n_ctx > MAX_SCAN_CONTEXTS {
        return Err(Error::ResourceLimit(format!(
            "2^{n_ctx} parity vectors exceed the 2^{MAX_SCAN_CONTEXTS} scan limit"
        )));
    }
    // validates measurement/context counts
    ParitySystem::from_bits(scenario.clone(), 0)?;

    let masks = context_masks(scenario);
    let globals = scenario.num_global_sections() as u64;
    let total = 1u64 << n_ctx;
    let chunks: Vec<u64> = (0..total).step_by(SCAN_CHUNK as usize).collect();

    #[derive(Default)]
    struct Tally {
        unsat: u64,
        agree: bool,
        examples: Vec<u64>,
    }

    let tallies: Vec<Tally> = chunks
        .par_iter()
        .map(|&start| {
            let mut t = Tally {
                agree: true,
                ..Tally::default()
            };
            for bits in start..(start + SCAN_CHUNK).min(total) {
                let by_scan = (0..globals).any(|g| image_of(&masks, g) == bits);
                let system = ParitySystem {
                    scenario: scenario.clone(),
                    parities: (0..n_ctx).map(|c| bits >> c & 1 == 1).collect(),
                };
                let by_elim = satisfiable_by_elimination(&system).is_some();
                t.agree &= by_scan == by_elim;
                if !by_scan {
                    t.unsat += 1;
                    if t.examples.len() < SCAN_EXAMPLES {
                        t.examples.push(bits);
                    }
                }
            }
            t
        })
        .collect();

    let unsatisfiable: u64 = tallies.iter().map(|t| t.unsat).sum();
    let deciders_agree = tallies.iter().all(|t| t.agree);
    let examples = tallies
        .iter()
        .flat_map(|t| t.examples.iter())
        .take(SCAN_EXAMPLES)
        .map(|b| format!("{b:x}"))
        .collect();
    let satisfiable = total - unsatisfiable;
    let rank = parity_map_rank(scenario);
    Ok(ParityScanReport {
        scenario: scenario.to_string(),
        contexts: n_ctx,
        total,
        unsatisfiable,
        satisfiable,
        rank,
        deciders_agree,
        matches_rank: satisfiable == 1u64 << rank,
        examples,
    })
}

/// Uniform weight `1 / 2^(k-1)` on every section of a size-`k` context that
/// satisfies its parity equation, zero elsewhere.
pub fn build_symmetric_model(system: &ParitySystem) -> Result<EmpiricalModel> {
    let scenario = &system.scenario;
    EmpiricalModel::from_fn(scenario.clone(), |c, s| {
        if system.section_satisfies(c, s) {
            Rational::inv_pow2(scenario.context(c).len() as u32 - 1)
        } else {
            Rational::zero()
        }
    })
}
