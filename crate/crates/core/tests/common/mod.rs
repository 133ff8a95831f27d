//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use biostab_core::linalg::DenseLu;
use biostab_core::special::expint;
use nalgebra::DMatrix;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// `∫ f` over `[a, b]` where `f` may be log-singular at `a`, by the
/// substitution `t = a + (b−a)u⁴`.
pub fn singular_left(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let g = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            let t = a + (b - a) * u.powi(4);
            f(t) * 4.0 * (b - a) * u.powi(3)
        }
    };
    adaptive_simpson(&g, 0.0, 1.0, tol)
}

/// `E_n(x)` by quadrature of `e^{-x}∫₀^∞ e^{-xs}(1+s)^{-n} ds` after the
/// substitution `s = e^w − 1`.
pub fn expint_by_quadrature(n: i32, x: f64) -> f64 {
    let f = |w: f64| (-x * w.exp_m1()).exp() * (w * (1 - n) as f64).exp();
    let w_max = (60.0 / x).ln_1p();
    let scale = 1.0 / (x + n as f64);
    (-x).exp() * adaptive_simpson(&f, 0.0, w_max, 1e-14 * scale)
}

pub struct NystromField {
    pub tau: Vec<f64>,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
}

impl NystromField {
    /// Piecewise-linear value on the uniform grid.
    pub fn at(&self, tau: f64) -> (f64, f64) {
        let n = self.tau.len();
        let h = self.tau[1] - self.tau[0];
        let j = ((tau / h).floor() as usize).min(n - 2);
        let s = (tau - self.tau[j]) / h;
        (
            (1.0 - s) * self.g[j] + s * self.g[j + 1],
            (1.0 - s) * self.q[j] + s * self.q[j + 1],
        )
    }
}

/// Dense Nyström solve of the steady radiative equations on a uniform grid
/// with composite Simpson weights and singularity subtraction on every
/// kernel.
pub fn nystrom_oracle(omega: f64, a: f64, tau_h: f64, b: f64, n: usize) -> NystromField {
    assert!(n % 2 == 1);
    let h = tau_h / (n - 1) as f64;
    let tau: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let sw: Vec<f64> = (0..n)
        .map(|j| {
            let c = if j == 0 || j == n - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    let en = |k: u32, x: f64| expint(k, x).unwrap();
    let half = 0.5 * omega;
    let mut m = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        let ti = tau[i];
        let p1 = 2.0 - en(2, ti) - en(2, tau_h - ti);
        let p2 = en(3, tau_h - ti) - en(3, ti);
        let p3 = 2.0 / 3.0 - en(4, ti) - en(4, tau_h - ti);
        let (mut d1, mut d2, mut d3) = (p1, p2, p3);
        for j in 0..n {
            if j == i {
                continue;
            }
            let x = (ti - tau[j]).abs();
            let sg = if ti > tau[j] { 1.0 } else { -1.0 };
            let k1 = sw[j] * en(1, x);
            let k2 = sw[j] * en(2, x) * sg;
            let k3 = sw[j] * en(3, x);
            d1 -= k1;
            d2 -= k2;
            d3 -= k3;
            m[(i, j)] -= half * k1;
            m[(i, n + j)] -= half * a * k2;
            m[(n + i, j)] -= half * k2;
            m[(n + i, n + j)] -= half * a * k3;
        }
        m[(i, i)] -= half * d1;
        m[(i, n + i)] -= half * a * d2;
        m[(n + i, i)] -= half * d2;
        m[(n + i, n + i)] -= half * a * d3;
        rhs[i] = 2.0 * b * en(2, ti);
        rhs[n + i] = 2.0 * b * en(3, ti);
    }
    let x = DenseLu::factor(m).unwrap().solve(&rhs);
    NystromField {
        g: x[..n].to_vec(),
        q: x[n..].to_vec(),
        tau,
    }
}

/// Classical fourth-order Runge–Kutta with a fixed number of steps.
pub fn rk4<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    steps: usize,
) -> Vec<(f64, [f64; N])> {
    let h = (t1 - t0) / steps as f64;
    let mut out = vec![(t0, y0)];
    let mut y = y0;
    let add = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut r = *y;
        for i in 0..N {
            r[i] += s * k[i];
        }
        r
    };
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push((t0 + (s + 1) as f64 * h, y));
    }
    out
}

/// Parameters of one tabulated case (`V_c = 20`, `ω = 0.7`).
pub fn table_params(tau_h: f64, b: f64, a: f64, rigid: bool) -> biostab_core::ProblemParams {
    biostab_core::ProblemParams {
        extinction: tau_h,
        diffuse_flux: b,
        aniso_coeff: a,
        albedo: 0.7,
        swim_speed: 20.0,
        top_boundary: if rigid {
            biostab_core::TopBoundary::Rigid
        } else {
            biostab_core::TopBoundary::StressFree
        },
        ..Default::default()
    }
}

/// Steady radiative field and basic state with the default taxis function.
pub fn basic_state(
    p: &biostab_core::ProblemParams,
    n_z: usize,
) -> (
    biostab_core::radiative::RadiativeField,
    biostab_core::basic_state::BasicState,
) {
    use biostab_core::basic_state::{solve_basic_state, BasicStateOptions};
    use biostab_core::radiative::{solve_fredholm, FredholmOptions};
    let field = solve_fredholm(p, &FredholmOptions::default()).unwrap();
    let taxis = biostab_core::default_taxis(p.critical_intensity).unwrap();
    let opts = BasicStateOptions {
        n_z,
        ..Default::default()
    };
    let state = solve_basic_state(p, &field, &taxis, &opts).unwrap();
    (field, state)
}

/// Scalar Nyström solve of `G = 2B E₂(τ) + (ω/2)∫E₁(|τ−τ'|)G dτ'` on a
/// uniform grid, the isotropic-scattering reduction.
pub fn nystrom_g_only(omega: f64, tau_h: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n % 2 == 1);
    let h = tau_h / (n - 1) as f64;
    let tau: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let w = |j: usize| {
        let c = if j == 0 || j == n - 1 {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        c * h / 3.0
    };
    let en = |k: u32, x: f64| expint(k, x).unwrap();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let mut diag = 2.0 - en(2, tau[i]) - en(2, tau_h - tau[i]);
        for j in 0..n {
            if j != i {
                let k = w(j) * en(1, (tau[i] - tau[j]).abs());
                diag -= k;
                m[(i, j)] -= 0.5 * omega * k;
            }
        }
        m[(i, i)] -= 0.5 * omega * diag;
        rhs[i] = 2.0 * b * en(2, tau[i]);
    }
    DenseLu::factor(m).unwrap().solve(&rhs)
}
