//! Exact Gaussian elimination over the rationals.

use crate::rational::Rational;

/// Reduced row echelon form of a matrix.
#[derive(Clone, Debug)]
pub struct Rref {
    pub rows: Vec<Vec<Rational>>,
    /// Pivot column of each nonzero row.
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Row-reduces `rows` (each `ncols` wide). Among candidate pivots in a
/// column the one with the smallest numerator+denominator bit length is
/// chosen, which keeps coefficient growth down.
pub fn rref(mut rows: Vec<Vec<Rational>>, ncols: usize) -> Rref {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len())
            .filter(|&i| !rows[i][col].is_zero())
            .min_by_key(|&i| rows[i][col].height())
        else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][col].recip();
        if !inv.is_one() {
            for v in rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = &*v * &inv;
                }
            }
        }
        let nz: Vec<usize> = (col..ncols).filter(|&j| !rows[r][j].is_zero()).collect();
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for &j in &nz {
                let d = &f * &pivot_row[j];
                row[j] -= &d;
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    Rref { rows, pivots }
}

pub fn rank(rows: Vec<Vec<Rational>>, ncols: usize) -> usize {
    rref(rows, ncols).rank()
}

/// Solution set of `A x = b` as a particular solution plus a nullspace basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AffineSolution {
    Inconsistent,
    Solutions {
        particular: Vec<Rational>,
        nullspace: Vec<Vec<Rational>>,
    },
}

/// Solves `A x = b` exactly; free variables are zero in the particular
/// solution and each nullspace vector sets exactly one free variable to 1.
pub fn solve_affine(a: &[Vec<Rational>], b: &[Rational], ncols: usize) -> AffineSolution {
    let augmented: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let red = rref(augmented, ncols + 1);
    if red.pivots.last() == Some(&ncols) {
        return AffineSolution::Inconsistent;
    }
    let mut particular = vec![Rational::zero(); ncols];
    for (row, &p) in red.rows.iter().zip(&red.pivots) {
        particular[p] = row[ncols].clone();
    }
    let mut is_pivot = vec![false; ncols];
    for &p in &red.pivots {
        is_pivot[p] = true;
    }
    let nullspace = (0..ncols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (row, &p) in red.rows.iter().zip(&red.pivots) {
                if !row[f].is_zero() {
                    v[p] = -&row[f];
                }
            }
            v
        })
        .collect();
    AffineSolution::Solutions {
        particular,
        nullspace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::r;

    fn ri(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn rank_of_dependent_rows() {
        let m = vec![
            vec![ri(1), ri(2), ri(3)],
            vec![ri(2), ri(4), ri(6)],
            vec![ri(1), ri(0), ri(1)],
        ];
        assert_eq!(rank(m, 3), 2);
    }

    #[test]
    fn solve_consistent() {
        // x + y = 1, x - y = 1/2
        let a = vec![vec![ri(1), ri(1)], vec![ri(1), ri(-1)]];
        let b = vec![ri(1), r(1, 2)];
        match solve_affine(&a, &b, 2) {
            AffineSolution::Solutions {
                particular,
                nullspace,
            } => {
                assert_eq!(particular, vec![r(3, 4), r(1, 4)]);
                assert!(nullspace.is_empty());
            }
            _ => panic!("expected a solution"),
        }
    }

    #[test]
    fn solve_with_free_variable() {
        let a = vec![vec![ri(1), ri(1), ri(0)]];
        let b = vec![ri(1)];
        match solve_affine(&a, &b, 3) {
            AffineSolution::Solutions {
                particular,
                nullspace,
            } => {
                assert_eq!(particular, vec![ri(1), ri(0), ri(0)]);
                assert_eq!(nullspace.len(), 2);
                for v in &nullspace {
                    assert!((v[0].clone() + &v[1]).is_zero());
                }
            }
            _ => panic!("expected a solution"),
        }
    }

    #[test]
    fn inconsistent() {
        let a = vec![vec![ri(1), ri(1)], vec![ri(2), ri(2)]];
        let b = vec![ri(1), ri(3)];
        assert_eq!(solve_affine(&a, &b, 2), AffineSolution::Inconsistent);
    }
}
