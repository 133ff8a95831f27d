//! Fixed quadrature rules on `[-1, 1]`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Tanh–sinh node on `[-1, 1]` given as `(1 + x, 1 - x, weight)`, so that the
/// distance to either endpoint is available without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct TanhSinhNode {
    pub from_left: f64,
    pub from_right: f64,
    pub weight: f64,
}

/// Tanh–sinh rule with step `h` truncated at `|t| <= t_max`.
pub fn tanh_sinh(h: f64, t_max: f64) -> Vec<TanhSinhNode> {
    let half_pi = 0.5 * PI;
    let k = (t_max / h).floor() as i64;
    let mut out = Vec::with_capacity(2 * k as usize + 1);
    for j in -k..=k {
        let t = j as f64 * h;
        let u = half_pi * t.sinh();
        let cu = u.cosh();
        // 1 - tanh(u) = 2 / (1 + e^{2u}), written to stay accurate in both tails.
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (from_left, from_right) = if u >= 0.0 {
            (2.0 - small, small)
        } else {
            (small, 2.0 - small)
        };
        let weight = h * half_pi * t.cosh() / (cu * cu);
        if weight > 0.0 && from_left > 0.0 && from_right > 0.0 {
            out.push(TanhSinhNode {
                from_left,
                from_right,
                weight,
            });
        }
    }
    out
}
