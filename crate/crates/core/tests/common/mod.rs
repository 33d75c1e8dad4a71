//! Oracles for the (2,2,2) noncontextual fraction that share no code with
//! the library's simplex.
#![allow(dead_code)]

use sheafctx::corpus;
use sheafctx::model::EmpiricalModel;
use sheafctx::rational::Rational;

fn ri(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// `E(x,y) = p(a = b) - p(a != b)`; contexts are `2x + y`, sections `2a + b`.
fn correlator(m: &EmpiricalModel, c: usize) -> Rational {
    let t = m.table(c);
    &(&t[0] + &t[3]) - &(&t[1] + &t[2])
}

/// CHSH expression aligned with PR box `k`: the box itself scores 4,
/// local models at most 2.
pub fn chsh(m: &EmpiricalModel, k: usize) -> Rational {
    let (alpha, beta, gamma) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
    (0..4)
        .map(|c| {
            let (x, y) = (c >> 1, c & 1);
            let e = correlator(m, c);
            if (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma == 0 {
                e
            } else {
                -e
            }
        })
        .sum()
}

/// Noncontextual fraction of a (2,2,2) no-signaling model from the CHSH
/// characterization: at most one CHSH expression exceeds 2, and the model
/// is `(1 - p) L + p PR_k` with `p = (S_k - 2) / 2` and `L` local.
///
/// The local remainder is checked (nonnegative, every CHSH value at most 2,
/// which by Fine's theorem means local), so a wrong `p` panics instead of
/// passing silently.
pub fn chsh_ncf(m: &EmpiricalModel) -> Rational {
    let (k, s) = (0..8)
        .map(|k| (k, chsh(m, k)))
        .max_by(|a, b| a.1.cmp(&b.1))
        .unwrap();
    if s <= ri(2) {
        return Rational::one();
    }
    let p = &(&s - &ri(2)) / &ri(2);
    let ncf = &Rational::one() - &p;
    if ncf.is_zero() {
        assert_eq!(m, &corpus::pr_box(k).unwrap(), "S = 4 only for the PR box");
        return ncf;
    }
    let pr = corpus::pr_box(k).unwrap();
    let local: Vec<Vec<Rational>> = (0..4)
        .map(|c| {
            (0..4)
                .map(|sec| &(m.weight(c, sec) - &(&p * pr.weight(c, sec))) / &ncf)
                .collect()
        })
        .collect();
    let local =
        EmpiricalModel::new(m.scenario().clone(), local).expect("local remainder is a model");
    for j in 0..8 {
        assert!(chsh(&local, j) <= ri(2), "remainder violates CHSH {j}");
    }
    ncf
}

/// Second, deliberately plain solver: max Σ b subject to M b <= v, b >= 0
/// over the 16 deterministic (2,2,2) assignments. The slack basis is
/// feasible because v >= 0, so a single phase suffices. Entering column by
/// largest reduced cost, switching to smallest index after a degenerate
/// pivot.
pub fn naive_ncf(m: &EmpiricalModel) -> Rational {
    let s = m.scenario();
    let globals = s.num_global_sections();
    let rows = s.num_slots();
    let offsets = s.slot_offsets();
    let v = m.stacked();
    // tableau: rows x (globals + rows + 1), objective row last
    let width = globals + rows + 1;
    let mut t = vec![vec![Rational::zero(); width]; rows + 1];
    for g in 0..globals {
        for c in 0..s.num_contexts() {
            t[offsets[c] + s.restrict_index(g, c)][g] = Rational::one();
        }
        t[rows][g] = ri(-1);
    }
    for i in 0..rows {
        t[i][globals + i] = Rational::one();
        t[i][width - 1] = v[i].clone();
    }
    let mut basis: Vec<usize> = (globals..globals + rows).collect();
    let mut bland = false;
    for _ in 0..10_000 {
        let candidates = (0..width - 1).filter(|&j| t[rows][j].is_negative());
        let enter = if bland {
            candidates.min()
        } else {
            candidates.min_by(|&a, &b| t[rows][a].cmp(&t[rows][b]))
        };
        let Some(e) = enter else {
            return t[rows][width - 1].clone();
        };
        let leave = (0..rows)
            .filter(|&i| t[i][e].is_positive())
            .min_by(|&a, &b| {
                let ra = &t[a][width - 1] / &t[a][e];
                let rb = &t[b][width - 1] / &t[b][e];
                ra.cmp(&rb).then(basis[a].cmp(&basis[b]))
            })
            .expect("bounded: Σ b <= 1");
        bland = t[leave][width - 1].is_zero();
        let pivot = t[leave][e].clone();
        for x in t[leave].iter_mut() {
            *x = &*x / &pivot;
        }
        let prow = t[leave].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != leave && !row[e].is_zero() {
                let f = row[e].clone();
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x = &*x - &(&f * p);
                }
            }
        }
        basis[leave] = e;
    }
    panic!("naive simplex did not terminate");
}
