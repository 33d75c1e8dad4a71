//! Exact-rational two-phase simplex and the contextual fraction built on it.
//!
//! The tableau is dense, pivots use Bland's rule (lowest-index entering
//! column, lowest-index leaving basic variable among ratio ties), so every
//! run terminates even on the heavily degenerate polytopes met here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::EmpiricalModel;
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `maximize objective · x` subject to `rows[i] · x (sense[i]) rhs[i]`, `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub rows: Vec<Vec<Rational>>,
    pub rhs: Vec<Rational>,
    pub senses: Vec<Sense>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: Rational,
    pub assignment: Vec<Rational>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<Rational>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            senses: Vec::new(),
        }
    }

    pub fn constrain(&mut self, row: Vec<Rational>, sense: Sense, rhs: Rational) -> &mut Self {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.rhs.len() != self.rows.len() || self.senses.len() != self.rows.len() {
            return Err(Error::invalid("row, rhs and sense counts differ"));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "constraint {i} has {} coefficients for {n} variables",
                self.rows[i].len()
            )));
        }
        Ok(())
    }

    /// Checks a candidate point against every constraint exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        if x.len() != self.num_vars() || x.iter().any(Rational::is_negative) {
            return false;
        }
        self.rows
            .iter()
            .zip(&self.rhs)
            .zip(&self.senses)
            .all(|((row, b), s)| {
                let lhs: Rational = row.iter().zip(x).map(|(a, v)| a * v).sum();
                match s {
                    Sense::Le => lhs <= *b,
                    Sense::Eq => lhs == *b,
                    Sense::Ge => lhs >= *b,
                }
            })
    }
}

struct Tableau {
    // constraint rows, each `ncols` wide, plus rhs
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    // reduced costs and current objective value
    cost: Vec<Rational>,
    value: Rational,
    basis: Vec<usize>,
    // columns that may not enter (artificials in phase 2)
    barred: Vec<bool>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.a[row][col].recip();
        if !inv.is_one() {
            for v in self.a[row].iter_mut() {
                if !v.is_zero() {
                    *v = &*v * &inv;
                }
            }
            self.b[row] = &self.b[row] * &inv;
        }
        let nz: Vec<usize> = (0..self.a[row].len())
            .filter(|&j| !self.a[row][j].is_zero())
            .collect();
        let (pivot_row, pivot_b) = (self.a[row].clone(), self.b[row].clone());
        for i in 0..self.a.len() {
            if i == row || self.a[i][col].is_zero() {
                continue;
            }
            let f = self.a[i][col].clone();
            for &j in &nz {
                let d = &f * &pivot_row[j];
                self.a[i][j] -= &d;
            }
            let d = &f * &pivot_b;
            self.b[i] -= &d;
        }
        if !self.cost[col].is_zero() {
            let f = self.cost[col].clone();
            for &j in &nz {
                let d = &f * &pivot_row[j];
                self.cost[j] -= &d;
            }
            // objective moves by f * (new rhs of the pivot row)
            self.value += &(&f * &pivot_b);
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations with Bland's rule until optimal or unbounded.
    fn run(&mut self) -> Outcome {
        loop {
            let entering =
                (0..self.cost.len()).find(|&j| !self.barred[j] && self.cost[j].is_positive());
            let Some(col) = entering else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.a.len() {
                let aij = &self.a[i][col];
                if !aij.is_positive() {
                    continue;
                }
                let ratio = &self.b[i] / aij;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Outcome::Unbounded,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }

    fn set_objective(&mut self, c: &[Rational]) {
        // reduced cost d_j = c_j - sum_i c_{basis(i)} a_ij
        self.cost = c.to_vec();
        self.value = Rational::zero();
        for i in 0..self.a.len() {
            let cb = &c[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (j, aij) in self.a[i].iter().enumerate() {
                if !aij.is_zero() {
                    self.cost[j] -= &(cb * aij);
                }
            }
            self.value += &(cb * &self.b[i]);
        }
    }
}

/// Solves `lp` exactly with the two-phase simplex method.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.rows.len();

    // normalize to nonnegative right-hand sides
    let mut rows = lp.rows.clone();
    let mut rhs = lp.rhs.clone();
    let mut senses = lp.senses.clone();
    for i in 0..m {
        if rhs[i].is_negative() {
            rows[i] = rows[i].iter().map(|v| -v).collect();
            rhs[i] = -&rhs[i];
            senses[i] = match senses[i] {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let slack_count = senses.iter().filter(|s| **s != Sense::Eq).count();
    let art_count = senses.iter().filter(|s| **s != Sense::Le).count();
    let ncols = n + slack_count + art_count;
    let art_start = n + slack_count;

    let mut a = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, art_start);
    for i in 0..m {
        let mut row = rows[i].clone();
        row.resize(ncols, Rational::zero());
        match senses[i] {
            Sense::Le => {
                row[next_slack] = Rational::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                row[next_slack] = -Rational::one();
                next_slack += 1;
                row[next_art] = Rational::one();
                basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                row[next_art] = Rational::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        a.push(row);
    }

    let mut t = Tableau {
        a,
        b: rhs,
        cost: Vec::new(),
        value: Rational::zero(),
        basis,
        barred: vec![false; ncols],
        pivots: 0,
    };

    if art_count > 0 {
        let mut phase1 = vec![Rational::zero(); ncols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = -Rational::one();
        }
        t.set_objective(&phase1);
        // phase 1 is bounded above by 0
        t.run();
        if t.value.is_negative() {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: Rational::zero(),
                assignment: Vec::new(),
                pivots: t.pivots,
            });
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < t.a.len() {
            if t.basis[i] >= art_start {
                match (0..art_start).find(|&j| !t.a[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.a.remove(i);
                        t.b.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for j in art_start..ncols {
            t.barred[j] = true;
        }
    }

    let mut objective = lp.objective.clone();
    objective.resize(ncols, Rational::zero());
    t.set_objective(&objective);
    let outcome = t.run();

    let mut x = vec![Rational::zero(); n];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.b[i].clone();
        }
    }
    Ok(match outcome {
        Outcome::Optimal => LpSolution {
            status: LpStatus::Optimal,
            value: t.value,
            assignment: x,
            pivots: t.pivots,
        },
        Outcome::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            value: Rational::zero(),
            assignment: x,
            pivots: t.pivots,
        },
    })
}

/// Outcome of the contextual-fraction LP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfResult {
    pub cf: Rational,
    pub ncf: Rational,
    /// Noncontextual sub-distribution over global sections with mass `ncf`.
    pub nc_part: Vec<Rational>,
    /// `(noncontextual, strongly contextual)` models with
    /// `model = ncf * noncontextual + cf * strongly_contextual`, present when
    /// `0 < ncf < 1`.
    pub decomposition: Option<(EmpiricalModel, EmpiricalModel)>,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CfOptions {
    /// Drop global sections that restrict onto a zero-weight slot before
    /// solving; they are forced to zero by the constraints anyway.
    pub presolve: bool,
}

/// Noncontextual fraction LP: maximize the mass of a sub-distribution `b`
/// over global sections with `M b <= v`.
pub fn contextual_fraction(model: &EmpiricalModel) -> Result<CfResult> {
    contextual_fraction_with(model, CfOptions::default())
}

pub fn contextual_fraction_with(model: &EmpiricalModel, opts: CfOptions) -> Result<CfResult> {
    model.require_no_signaling()?;
    let scenario = model.scenario();
    let incidence = scenario.incidence_matrix();
    let v = model.stacked();
    let globals: Vec<usize> = (0..incidence.num_cols())
        .filter(|&g| !opts.presolve || incidence.column(g).iter().all(|&row| !v[row].is_zero()))
        .collect();

    let mut lp = LinearProgram::new(vec![Rational::one(); globals.len()]);
    for (row, vr) in v.iter().enumerate() {
        let coeffs = globals
            .iter()
            .map(|&g| {
                if incidence.column(g).contains(&row) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        lp.constrain(coeffs, Sense::Le, vr.clone());
    }
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Verification(format!(
            "contextual fraction LP ended {:?}",
            sol.status
        )));
    }

    let mut nc_part = vec![Rational::zero(); incidence.num_cols()];
    for (k, &g) in globals.iter().enumerate() {
        nc_part[g] = sol.assignment[k].clone();
    }
    let ncf = sol.value;
    let cf = Rational::one() - &ncf;

    let decomposition = if ncf.is_positive() && cf.is_positive() {
        let mut covered = vec![Rational::zero(); v.len()];
        for (g, w) in nc_part.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for &row in incidence.column(g) {
                covered[row] += w;
            }
        }
        let nc: Vec<Rational> = covered.iter().map(|x| x / &ncf).collect();
        let sc: Vec<Rational> = v.iter().zip(&covered).map(|(a, b)| (a - b) / &cf).collect();
        Some((
            EmpiricalModel::from_stacked(scenario.clone(), &nc)?,
            EmpiricalModel::from_stacked(scenario.clone(), &sc)?,
        ))
    } else {
        None
    };

    Ok(CfResult {
        cf,
        ncf,
        nc_part,
        decomposition,
        pivots: sol.pivots,
    })
}

/// Optimal value of the dual of the noncontextual-fraction LP:
/// minimize `v · y` subject to `Mᵀ y >= 1`, `y >= 0`. Equals the NCF by
/// strong duality.
pub fn noncontextual_fraction_dual(model: &EmpiricalModel) -> Result<Rational> {
    model.require_no_signaling()?;
    let incidence = model.scenario().incidence_matrix();
    let v = model.stacked();
    // maximize -v·y
    let mut lp = LinearProgram::new(v.iter().map(|x| -x).collect());
    for g in 0..incidence.num_cols() {
        let mut row = vec![Rational::zero(); v.len()];
        for &r in incidence.column(g) {
            row[r] = Rational::one();
        }
        lp.constrain(row, Sense::Ge, Rational::one());
    }
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(-sol.value),
        s => Err(Error::Verification(format!("dual LP ended {s:?}"))),
    }
}

/// Whether `M d = v` has a nonnegative solution.
pub fn is_noncontextual(model: &EmpiricalModel) -> Result<bool> {
    model.require_no_signaling()?;
    let incidence = model.scenario().incidence_matrix();
    let v = model.stacked();
    let mut lp = LinearProgram::new(vec![Rational::zero(); incidence.num_cols()]);
    for (row, vr) in v.iter().enumerate() {
        let coeffs = (0..incidence.num_cols())
            .map(|g| {
                if incidence.column(g).contains(&row) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        lp.constrain(coeffs, Sense::Eq, vr.clone());
    }
    Ok(simplex_solve(&lp)?.status == LpStatus::Optimal)
}
