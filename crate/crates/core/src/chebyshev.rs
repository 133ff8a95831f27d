//! Chebyshev–Gauss–Lobatto collocation on `[0, 1]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct ChebGrid {
    /// Nodes in ascending order, `z_0 = 0`, `z_N = 1`.
    pub z: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d4: DMatrix<f64>,
    bary: Vec<f64>,
}

impl ChebGrid {
    /// Grid of polynomial degree `degree` (`degree + 1` nodes).
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 2);
        let n = degree;
        let nf = n as f64;
        let mut z: Vec<f64> = (0..=n).map(|j| 0.5 * (1.0 - (PI * j as f64 / nf).cos())).collect();
        // Exact symmetry about 1/2.
        for j in 0..=n / 2 {
            let v = 0.5 * (1.0 - (PI * j as f64 / nf).cos());
            z[j] = v;
            z[n - j] = 1.0 - v;
        }
        if n % 2 == 0 {
            z[n / 2] = 0.5;
        }
        let bary: Vec<f64> = (0..=n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let mut d1 = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            let mut diag = 0.0;
            for j in 0..=n {
                if i == j {
                    continue;
                }
                // z_i − z_j without cancellation.
                let dz = (PI * (i + j) as f64 / (2.0 * nf)).sin()
                    * (PI * (i as f64 - j as f64) / (2.0 * nf)).sin();
                let v = (bary[j] / bary[i]) / dz;
                d1[(i, j)] = v;
                diag -= v;
            }
            d1[(i, i)] = diag;
        }
        let d2 = &d1 * &d1;
        let d4 = &d2 * &d2;
        ChebGrid { z, d1, d2, d4, bary }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.z.len() - 1
    }

    /// Row vector `r` with `r · f = p(x)` for the interpolant `p` of nodal data `f`.
    pub fn interpolation_row(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut r = vec![0.0; n];
        for j in 0..n {
            if x == self.z[j] {
                r[j] = 1.0;
                return r;
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            let t = self.bary[j] / (x - self.z[j]);
            r[j] = t;
            sum += t;
        }
        for v in &mut r {
            *v /= sum;
        }
        r
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        self.interpolation_row(x)
            .iter()
            .zip(values)
            .map(|(r, v)| r * v)
            .sum()
    }

    /// Clenshaw–Curtis weights for `∫₀¹`.
    pub fn clenshaw_curtis(&self) -> Vec<f64> {
        let n = self.degree();
        let nf = n as f64;
        let mut w = vec![0.0; n + 1];
        for (j, wj) in w.iter_mut().enumerate() {
            let theta = PI * j as f64 / nf;
            let mut s = 1.0;
            let half = n / 2;
            for k in 1..=half {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s -= b * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            *wj = 0.5 * c * s / nf;
        }
        w
    }
}
