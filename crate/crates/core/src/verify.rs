//! One-shot reproduction suite with a pass/fail line per check.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus;
use crate::csp::{paper_plan, paper_plan_verbatim, table_report};
use crate::error::Result;
use crate::lp::{contextual_fraction, noncontextual_fraction_dual};
use crate::parity::{build_symmetric_model, parity_satisfiable, parity_scan, ParitySystem};
use crate::possibilistic::{strong_contextuality, support_of};
use crate::rational::Rational;
use crate::scenario::MeasurementScenario;
use crate::support::ns_dimension;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        let overall = checks.iter().all(|c| c.pass);
        VerificationReport { checks, overall }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} ({:.2}s)\n       expected: {}\n       actual:   {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.seconds,
                c.expected,
                c.actual
            )?;
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(
            f,
            "overall: {} ({passed}/{} checks passed)",
            if self.overall { "PASS" } else { "FAIL" },
            self.checks.len()
        )
    }
}

/// Knobs of the randomized checks.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub random_models: usize,
    pub random_lp_models: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 2024,
            random_models: 100,
            random_lp_models: 50,
        }
    }
}

/// Runs `body`, turning errors and panics into a failed check.
pub fn run_check(
    name: &str,
    expected: &str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> Check {
    let start = Instant::now();
    let (pass, actual) = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panic: {msg}"))
        }
    };
    Check {
        name: name.into(),
        expected: expected.into(),
        actual,
        pass,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn check_pr_boxes() -> Result<(bool, String)> {
    let mut cfs = Vec::new();
    let mut ok = true;
    for k in 0..8 {
        let m = corpus::pr_box(k)?;
        let cf = contextual_fraction(&m)?.cf;
        ok &= cf.is_one() && m.is_maximal_marginals()?;
        cfs.push(cf.to_string());
    }
    Ok((
        ok,
        format!("cf = [{}], maximal marginals: {ok}", cfs.join(", ")),
    ))
}

fn check_ghz() -> Result<(bool, String)> {
    let m = corpus::ghz_322();
    let cf = contextual_fraction(&m)?.cf;
    let mm = m.is_maximal_marginals()?;
    Ok((
        cf.is_one() && mm,
        format!("cf = {cf}, maximal marginals: {mm}"),
    ))
}

fn check_scan_422() -> Result<(bool, String)> {
    let rep = parity_scan(&MeasurementScenario::bell(4, 2, 2)?)?;
    let pass = rep.unsatisfiable == 65504
        && rep.satisfiable == 32
        && rep.matches_rank
        && rep.deciders_agree;
    Ok((
        pass,
        format!(
            "unsatisfiable = {}, satisfiable = {}, rank = {}, deciders agree: {}",
            rep.unsatisfiable, rep.satisfiable, rep.rank, rep.deciders_agree
        ),
    ))
}

fn check_vector_1c00() -> Result<(bool, String)> {
    let sys = ParitySystem::paper_422();
    let unsat = parity_satisfiable(&sys)?.is_none();
    let m = build_symmetric_model(&sys)?;
    let cf = contextual_fraction(&m)?.cf;
    let mm = m.is_maximal_marginals()?;
    let eighth = Rational::new(1, 8);
    let entries_ok = m
        .tables()
        .iter()
        .flatten()
        .all(|w| w.is_zero() || *w == eighth);
    Ok((
        unsat && cf.is_one() && mm && entries_ok,
        format!(
            "vector {} unsatisfiable: {unsat}, cf = {cf}, maximal marginals: {mm}, nonzero entries all 1/8: {entries_ok}",
            sys.to_hex()
        ),
    ))
}

fn check_dimensions() -> Result<(bool, String)> {
    let d4 = ns_dimension(&MeasurementScenario::bell(4, 2, 2)?);
    let d2 = ns_dimension(&MeasurementScenario::bell(2, 2, 2)?);
    Ok((d4 == 80 && d2 == 8, format!("(4,2,2): {d4}, (2,2,2): {d2}")))
}

fn check_tables() -> Result<(bool, String)> {
    let (_, rep) = table_report(&paper_plan())?;
    let classes: Vec<String> = rep
        .instances
        .iter()
        .map(|i| {
            format!(
                "q = {}: {} (cf = {})",
                i.q, i.classification.class, i.classification.cf
            )
        })
        .collect();
    let interval = rep
        .interval
        .as_ref()
        .map(|b| {
            let show =
                |x: &Option<Rational>| x.as_ref().map_or("unbounded".into(), Rational::to_string);
            format!("[{}, {}]", show(&b.lower), show(&b.upper))
        })
        .unwrap_or_else(|| "none".into());
    Ok((
        rep.passes(),
        format!(
            "dimension {:?}, {} diffs, interval {interval}, {}; q = 1/4 strongly contextual: {:?}",
            rep.dimension,
            rep.diffs.len(),
            classes.join(", "),
            rep.upper_endpoint_strongly_contextual
        ),
    ))
}

fn check_plan_as_listed() -> Result<(bool, String)> {
    let (_, rep) = table_report(&paper_plan_verbatim())?;
    Ok((
        rep.dimension == Some(0) && rep.strongly_contextual && rep.possibilistic_no_signaling,
        format!(
            "dimension {:?}, strongly contextual: {}, possibilistically no-signaling: {}",
            rep.dimension, rep.strongly_contextual, rep.possibilistic_no_signaling
        ),
    ))
}

fn random_scenarios() -> Result<Vec<MeasurementScenario>> {
    [(2, 2, 2), (3, 2, 2), (2, 3, 2), (2, 2, 3)]
        .into_iter()
        .map(|(n, m, o)| MeasurementScenario::bell(n, m, o))
        .collect()
}

fn check_equivalence(opts: SuiteOptions) -> Result<(bool, String)> {
    let mut models: Vec<_> = corpus::all().into_iter().map(|(_, m)| m).collect();
    let scenarios = random_scenarios()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for i in 0..opts.random_models {
        models.push(corpus::random_ns_model(
            &scenarios[i % scenarios.len()],
            &mut rng,
        ));
    }
    let (mut maximal, mut mismatches) = (0, 0);
    for m in &models {
        let cf_one = contextual_fraction(m)?.cf.is_one();
        let sc = strong_contextuality(&support_of(m));
        maximal += cf_one as usize;
        mismatches += (cf_one != sc) as usize;
    }
    Ok((
        mismatches == 0,
        format!(
            "{} models ({maximal} with cf = 1), {mismatches} mismatches",
            models.len()
        ),
    ))
}

fn check_primal_dual(opts: SuiteOptions) -> Result<(bool, String)> {
    let s = MeasurementScenario::bell(2, 2, 2)?;
    let mut models: Vec<_> = corpus::all()
        .into_iter()
        .map(|(_, m)| m)
        .filter(|m| m.scenario() == &s)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    for _ in 0..opts.random_lp_models {
        models.push(corpus::random_ns_model(&s, &mut rng));
    }
    let mut mismatches = 0;
    for m in &models {
        if contextual_fraction(m)?.ncf != noncontextual_fraction_dual(m)? {
            mismatches += 1;
        }
    }
    Ok((
        mismatches == 0,
        format!(
            "{} (2,2,2) models, {mismatches} primal/dual disagreements",
            models.len()
        ),
    ))
}

fn check_scan_222() -> Result<(bool, String)> {
    let s = MeasurementScenario::bell(2, 2, 2)?;
    let rep = parity_scan(&s)?;
    let mut pr: Vec<_> = (0..8).map(corpus::pr_box).collect::<Result<_>>()?;
    let mut matched = 0;
    for bits in 0..16u64 {
        let sys = ParitySystem::from_bits(s.clone(), bits)?;
        if parity_satisfiable(&sys)?.is_none() {
            let m = build_symmetric_model(&sys)?;
            if let Some(i) = pr.iter().position(|p| *p == m) {
                pr.swap_remove(i);
                matched += 1;
            }
        }
    }
    Ok((
        rep.unsatisfiable == 8 && matched == 8,
        format!(
            "unsatisfiable = {}, symmetric models equal to PR boxes: {matched}",
            rep.unsatisfiable
        ),
    ))
}

/// Runs every check; failures of one check never stop the others.
pub fn run_suite(opts: SuiteOptions) -> VerificationReport {
    let checks = vec![
        run_check(
            "PR boxes are AMCCs",
            "cf = 1 and maximal marginals for k = 0..7",
            check_pr_boxes,
        ),
        run_check(
            "GHZ (3,2,2) is an AMCC",
            "cf = 1 and maximal marginals",
            check_ghz,
        ),
        run_check(
            "(4,2,2) parity scan",
            "65504 unsatisfiable, 32 = 2^rank satisfiable",
            check_scan_422,
        ),
        run_check(
            "parity vector 1c00",
            "unsatisfiable; symmetric model has cf = 1, maximal marginals, entries 1/8",
            check_vector_1c00,
        ),
        run_check(
            "no-signaling dimensions",
            "(4,2,2): 80, (2,2,2): 8",
            check_dimensions,
        ),
        run_check(
            "one-parameter non-AMCC family",
            "dimension 1, 0 diffs, interval [1/8, 1/4], AMCC at 1/8, non-AMCC with cf = 1 at 3/16",
            check_tables,
        ),
        run_check(
            "augmentation plan as listed",
            "dimension 0, strongly contextual, possibilistically no-signaling",
            check_plan_as_listed,
        ),
        run_check("cf = 1 iff strongly contextual", "0 mismatches", || {
            check_equivalence(opts)
        }),
        run_check("LP primal equals dual", "0 disagreements", || {
            check_primal_dual(opts)
        }),
        run_check(
            "(2,2,2) parity scan",
            "8 unsatisfiable, equal to the 8 PR boxes",
            check_scan_222,
        ),
    ];
    VerificationReport::new(checks)
}
