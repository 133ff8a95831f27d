//! Dense LU with partial pivoting, blocked so the trailing update runs through
//! a matrix-matrix product.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

fn swap_rows(a: &mut DMatrix<f64>, r1: usize, r2: usize) {
    if r1 != r2 {
        a.swap_rows(r1, r2);
    }
}

impl DenseLu {
    pub fn factor(mut a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Assembly("LU needs a square matrix".into()));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut j0 = 0;
        while j0 < n {
            let j1 = (j0 + BLOCK).min(n);
            for c in j0..j1 {
                let mut p = c;
                let mut best = a[(c, c)].abs();
                for r in c + 1..n {
                    let v = a[(r, c)].abs();
                    if v > best {
                        best = v;
                        p = r;
                    }
                }
                if !(best > scale * f64::EPSILON) {
                    return Err(Error::Assembly(format!("matrix is singular at column {c}")));
                }
                swap_rows(&mut a, c, p);
                perm.swap(c, p);
                let inv = 1.0 / a[(c, c)];
                for r in c + 1..n {
                    a[(r, c)] *= inv;
                }
                for cc in c + 1..j1 {
                    let u = a[(c, cc)];
                    if u != 0.0 {
                        for r in c + 1..n {
                            let l = a[(r, c)];
                            a[(r, cc)] -= l * u;
                        }
                    }
                }
            }
            if j1 < n {
                let nb = j1 - j0;
                // U12 = L11^{-1} A12
                for cc in j1..n {
                    for k in j0..j1 {
                        let u = a[(k, cc)];
                        if u != 0.0 {
                            for r in k + 1..j1 {
                                let l = a[(r, k)];
                                a[(r, cc)] -= l * u;
                            }
                        }
                    }
                }
                let l21 = a.view((j1, j0), (n - j1, nb)).clone_owned();
                let u12 = a.view((j0, j1), (nb, n - j1)).clone_owned();
                let mut a22 = a.view_mut((j1, j1), (n - j1, n - j1));
                a22.gemm(-1.0, &l21, &u12, 1.0);
            }
            j0 = j1;
        }
        Ok(DenseLu { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for c in 0..n {
            let v = x[c];
            if v != 0.0 {
                for r in c + 1..n {
                    x[r] -= self.lu[(r, c)] * v;
                }
            }
        }
        for c in (0..n).rev() {
            x[c] /= self.lu[(c, c)];
            let v = x[c];
            if v != 0.0 {
                for r in 0..c {
                    x[r] -= self.lu[(r, c)] * v;
                }
            }
        }
        x
    }
}

/// Solves `a x = b` with one step of iterative refinement. Returns the
/// solution and the max-norm of the refinement correction.
pub fn solve_refined(a: &DMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = DenseLu::factor(a.clone())?;
    let mut x = lu.solve(b);
    let ax = a * nalgebra::DVector::from_column_slice(&x);
    let r: Vec<f64> = b.iter().zip(ax.iter()).map(|(b, ax)| b - ax).collect();
    let dx = lu.solve(&r);
    let mut corr = 0.0f64;
    for (x, d) in x.iter_mut().zip(&dx) {
        *x += d;
        corr = corr.max(d.abs());
    }
    Ok((x, corr))
}
