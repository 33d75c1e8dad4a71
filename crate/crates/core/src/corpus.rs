//! Canonical models: PR boxes, GHZ, uniform, deterministic and the
//! symmetric (4,2,2) parity AMCC.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::EmpiricalModel;
use crate::parity::{build_symmetric_model, satisfiable_by_elimination, ParitySystem};
use crate::rational::{r, Rational};
use crate::scenario::MeasurementScenario;

/// The `k`-th PR box of (2,2,2), `k = 4α + 2β + γ`, with support
/// `a ⊕ b = x·y ⊕ α·x ⊕ β·y ⊕ γ` and weight 1/2 on each allowed pair.
pub fn pr_box(k: usize) -> Result<EmpiricalModel> {
    if k >= 8 {
        return Err(Error::invalid(format!("pr_box index {k} not in 0..8")));
    }
    let (alpha, beta, gamma) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
    let s = MeasurementScenario::bell(2, 2, 2)?;
    EmpiricalModel::from_fn(s, |c, sec| {
        let (x, y) = (c >> 1, c & 1);
        let (a, b) = (sec >> 1, sec & 1);
        if a ^ b == (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma {
            r(1, 2)
        } else {
            Rational::zero()
        }
    })
}

/// GHZ correlations of (3,2,2) with setting 0 read as X and setting 1 as Y.
///
/// Contexts with an even number of Y settings carry a parity constraint
/// (XXX even, XYY/YXY/YYX odd) with weight 1/4 on each allowed section.
/// Contexts with an odd number of Y settings have zero correlators and are
/// uniform.
pub fn ghz_322() -> EmpiricalModel {
    let s = MeasurementScenario::bell(3, 2, 2).expect("valid scenario");
    EmpiricalModel::from_fn(s, |c, sec| {
        let ys = c.count_ones();
        if ys % 2 == 1 {
            return r(1, 8);
        }
        let parity = (ys / 2) % 2;
        if sec.count_ones() % 2 == parity {
            r(1, 4)
        } else {
            Rational::zero()
        }
    })
    .expect("ghz model is normalized")
}

pub fn uniform(scenario: &MeasurementScenario) -> EmpiricalModel {
    EmpiricalModel::from_fn(scenario.clone(), |c, _| {
        Rational::from_integer(scenario.num_sections(c) as i64).recip()
    })
    .expect("uniform model is normalized")
}

/// Point mass on the restrictions of one global section.
pub fn deterministic(scenario: &MeasurementScenario, global: usize) -> Result<EmpiricalModel> {
    if global >= scenario.num_global_sections() {
        return Err(Error::invalid(format!(
            "global section {global} out of range"
        )));
    }
    EmpiricalModel::from_fn(scenario.clone(), |c, s| {
        if scenario.restrict_index(global, c) == s {
            Rational::one()
        } else {
            Rational::zero()
        }
    })
}

/// Symmetric (4,2,2) model of the parity vector with P11 = P12 = P13 = 1.
pub fn parity_amcc_422() -> EmpiricalModel {
    build_symmetric_model(&ParitySystem::paper_422()).expect("binary bell scenario")
}

/// Looks a model up by name: `pr_box(k)`, `ghz_322`, `uniform(n,m,o)`,
/// `deterministic(n,m,o,g)` or `parity_amcc_422`.
pub fn by_name(name: &str) -> Result<EmpiricalModel> {
    let name = name.trim();
    let (head, args) = match name.split_once('(') {
        Some((h, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::invalid(format!("malformed corpus name {name:?}")))?;
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad argument {a:?} in {name:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            (h.trim(), args)
        }
        None => (name, Vec::new()),
    };
    match (head, args.as_slice()) {
        ("pr_box", [k]) => pr_box(*k),
        ("ghz_322", []) => Ok(ghz_322()),
        ("parity_amcc_422", []) => Ok(parity_amcc_422()),
        ("uniform", [n, m, o]) => Ok(uniform(&MeasurementScenario::bell(*n, *m, *o)?)),
        ("deterministic", [n, m, o, g]) => {
            deterministic(&MeasurementScenario::bell(*n, *m, *o)?, *g)
        }
        _ => Err(Error::invalid(format!("unknown corpus model {name:?}"))),
    }
}

/// Every named model used by the test suites, with its name.
pub fn all() -> Vec<(String, EmpiricalModel)> {
    let mut out = Vec::new();
    for k in 0..8 {
        out.push((format!("pr_box({k})"), pr_box(k).expect("k < 8")));
    }
    out.push(("ghz_322".into(), ghz_322()));
    out.push(("parity_amcc_422".into(), parity_amcc_422()));
    for (n, m, o) in [
        (1, 1, 2),
        (2, 2, 2),
        (3, 2, 2),
        (4, 2, 2),
        (2, 3, 2),
        (2, 2, 3),
    ] {
        let s = MeasurementScenario::bell(n, m, o).expect("valid scenario");
        out.push((format!("uniform({n},{m},{o})"), uniform(&s)));
        let g = s.num_global_sections() / 3;
        out.push((
            format!("deterministic({n},{m},{o},{g})"),
            deterministic(&s, g).expect("in range"),
        ));
    }
    out
}

/// Symmetric model of a uniformly drawn unsatisfiable parity vector, or
/// `None` when the scenario is not binary or 64 draws found none.
fn random_parity_vertex(
    scenario: &MeasurementScenario,
    rng: &mut impl Rng,
) -> Option<EmpiricalModel> {
    if !scenario.is_binary() || scenario.num_contexts() > 64 {
        return None;
    }
    let n = scenario.num_contexts();
    for _ in 0..64 {
        let bits: u64 = if n == 64 {
            rng.gen()
        } else {
            rng.gen_range(0..1u64 << n)
        };
        let system = ParitySystem::from_bits(scenario.clone(), bits).ok()?;
        if satisfiable_by_elimination(&system).is_none() {
            return build_symmetric_model(&system).ok();
        }
    }
    None
}

/// Random no-signaling model: a rational convex combination of
/// deterministic models and symmetric parity models.
///
/// Roughly a third of the draws are a single parity model (cf = 1), a
/// third mix parity models only and the rest mix deterministic models with
/// at most one parity model, so both sides of cf = 1 are well covered.
pub fn random_ns_model(scenario: &MeasurementScenario, rng: &mut impl Rng) -> EmpiricalModel {
    let mut vertices = Vec::new();
    match rng.gen_range(0..3) {
        0 => vertices.extend(random_parity_vertex(scenario, rng)),
        1 => {
            for _ in 0..rng.gen_range(2..=3) {
                vertices.extend(random_parity_vertex(scenario, rng));
            }
        }
        _ => {
            for _ in 0..rng.gen_range(1..=4) {
                let g = rng.gen_range(0..scenario.num_global_sections());
                vertices.push(deterministic(scenario, g).expect("in range"));
            }
            if rng.gen_bool(0.5) {
                vertices.extend(random_parity_vertex(scenario, rng));
            }
        }
    }
    if vertices.is_empty() {
        let g = rng.gen_range(0..scenario.num_global_sections());
        vertices.push(deterministic(scenario, g).expect("in range"));
    }
    let weights: Vec<i64> = vertices.iter().map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let slots = scenario.num_slots();
    let mut acc = vec![Rational::zero(); slots];
    for (v, w) in vertices.iter().zip(&weights) {
        let w = Rational::new(*w, total);
        for (a, x) in acc.iter_mut().zip(v.stacked()) {
            if !x.is_zero() {
                *a += &(&w * &x);
            }
        }
    }
    EmpiricalModel::from_stacked(scenario.clone(), &acc).expect("convex combination of models")
}
