//! Steady radiative field of a slab lit by diffuse flux from above.
//!
//! Total intensity `G` and downward flux `q` satisfy a coupled pair of
//! second-kind integral equations with `E₁`, `E₂` and `E₃` kernels over the
//! optical depth `τ ∈ [0, τ_H]`. They are discretized by product integration:
//! the unknowns are interpolated by local degree-5 Lagrange polynomials on a
//! grid graded towards both faces, and the kernel moments of every
//! interpolant are integrated accurately, including the logarithmic `E₁`
//! singularity at the collocation point.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::solve_refined;
use crate::params::ProblemParams;
use crate::quadrature::{gauss_legendre, tanh_sinh, TanhSinhNode};
use crate::special::{en, expint_123};

const STENCIL: usize = 6;
const GL_FAR: usize = 10;
const GL_NEAR: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmOptions {
    pub n_nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Above this node count the system is solved by fixed-point iteration
    /// instead of a dense factorization.
    pub direct_limit: usize,
}

impl Default for FredholmOptions {
    fn default() -> Self {
        FredholmOptions {
            n_nodes: 201,
            tol: 1e-9,
            max_iter: 500,
            direct_limit: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiativeField {
    pub tau_grid: Vec<f64>,
    pub g_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub params_hash: u64,
    pub tau_h: f64,
    /// Max-norm residual of the discrete equations at the returned solution.
    pub residual: f64,
    /// Fixed-point sweeps used; zero for the direct solve.
    pub iterations: usize,
}

/// Graded nodes `τ_H·φ(j/(n−1))` with `φ(s) = s − sin(2πs)/(2π)`, which packs
/// nodes cubically towards both faces where the solution has `τ ln τ`
/// behaviour.
pub fn graded_grid(tau_h: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n)
        .map(|j| {
            let s = j as f64 / (n - 1) as f64;
            tau_h * (s - (2.0 * PI * s).sin() / (2.0 * PI))
        })
        .collect();
    g[0] = 0.0;
    g[n - 1] = tau_h;
    // Mirror so the grid is exactly symmetric about τ_H/2.
    for j in 0..n / 2 {
        g[n - 1 - j] = tau_h - g[j];
    }
    if n % 2 == 1 {
        g[n / 2] = 0.5 * tau_h;
    }
    g
}

fn stencil_start(interval: usize, n: usize, width: usize) -> usize {
    (interval + 1).saturating_sub(width / 2).min(n - width)
}

fn lagrange_weights(nodes: &[f64], t: f64, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut l = 1.0;
        for (m, &xm) in nodes.iter().enumerate() {
            if m != k {
                l *= (t - xm) / (nodes[k] - xm);
            }
        }
        *o = l;
    }
}

fn lagrange_derivative_weights(nodes: &[f64], t: f64, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut denom = 1.0;
        for (m, &xm) in nodes.iter().enumerate() {
            if m != k {
                denom *= nodes[k] - xm;
            }
        }
        let mut s = 0.0;
        for p in (0..nodes.len()).filter(|&p| p != k) {
            let mut prod = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != k && m != p {
                    prod *= t - xm;
                }
            }
            s += prod;
        }
        *o = s / denom;
    }
}

struct Panel {
    start: usize,
    // Quadrature abscissae, weights and basis values of the panel interpolant.
    t: Vec<f64>,
    w: Vec<f64>,
    basis: Vec<[f64; STENCIL]>,
}

fn build_panel(grid: &[f64], m: usize, rule: &(Vec<f64>, Vec<f64>)) -> Panel {
    let n = grid.len();
    let start = stencil_start(m, n, STENCIL);
    let (a, b) = (grid[m], grid[m + 1]);
    let half = 0.5 * (b - a);
    let mut p = Panel {
        start,
        t: Vec::with_capacity(rule.0.len()),
        w: Vec::with_capacity(rule.0.len()),
        basis: Vec::with_capacity(rule.0.len()),
    };
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let t = a + half * (1.0 + x);
        let mut l = [0.0; STENCIL];
        lagrange_weights(&grid[start..start + STENCIL], t, &mut l);
        p.t.push(t);
        p.w.push(half * w);
        p.basis.push(l);
    }
    p
}

/// Discrete kernel operators: row `i` integrates the interpolant of nodal
/// data against `E₁(|τ_i−τ'|)`, `E₂(|τ_i−τ'|)sgn(τ_i−τ')` and
/// `E₃(|τ_i−τ'|)`.
pub(crate) struct KernelWeights {
    pub e1: DMatrix<f64>,
    pub e2s: DMatrix<f64>,
    pub e3: DMatrix<f64>,
}

fn accumulate(
    w: &mut KernelWeights,
    i: usize,
    start: usize,
    dist: f64,
    sign: f64,
    qw: f64,
    basis: &[f64; STENCIL],
) {
    let e = expint_123(dist);
    for k in 0..STENCIL {
        let b = qw * basis[k];
        w.e1[(i, start + k)] += e[0] * b;
        w.e2s[(i, start + k)] += sign * e[1] * b;
        w.e3[(i, start + k)] += e[2] * b;
    }
}

pub(crate) fn kernel_weights(grid: &[f64]) -> KernelWeights {
    let n = grid.len();
    let far = gauss_legendre(GL_FAR);
    let near = gauss_legendre(GL_NEAR);
    let far_panels: Vec<Panel> = (0..n - 1).map(|m| build_panel(grid, m, &far)).collect();
    let near_panels: Vec<Panel> = (0..n - 1).map(|m| build_panel(grid, m, &near)).collect();
    let ts: Vec<TanhSinhNode> = tanh_sinh(1.0 / 12.0, 3.2);

    let mut w = KernelWeights {
        e1: DMatrix::zeros(n, n),
        e2s: DMatrix::zeros(n, n),
        e3: DMatrix::zeros(n, n),
    };
    let mut basis = [0.0; STENCIL];
    for i in 0..n {
        let ti = grid[i];
        for m in 0..n - 1 {
            let (a, b) = (grid[m], grid[m + 1]);
            let len = b - a;
            if m == i || m + 1 == i {
                // Target sits on an end of the panel: endpoint-clustered rule
                // with the distance formed without cancellation.
                let start = stencil_start(m, n, STENCIL);
                let nodes = &grid[start..start + STENCIL];
                for node in &ts {
                    let (t, dist, sign) = if m == i {
                        let d = 0.5 * len * node.from_left;
                        (a + d, d, -1.0)
                    } else {
                        let d = 0.5 * len * node.from_right;
                        (b - d, d, 1.0)
                    };
                    lagrange_weights(nodes, t, &mut basis);
                    accumulate(&mut w, i, start, dist, sign, 0.5 * len * node.weight, &basis);
                }
                continue;
            }
            let gap = if ti < a { a - ti } else { ti - b };
            let panel = if gap < 2.0 * len {
                &near_panels[m]
            } else {
                &far_panels[m]
            };
            let sign = if ti < a { -1.0 } else { 1.0 };
            for q in 0..panel.t.len() {
                let dist = (ti - panel.t[q]).abs();
                accumulate(&mut w, i, panel.start, dist, sign, panel.w[q], &panel.basis[q]);
            }
        }
    }
    w
}

fn check_options(opts: &FredholmOptions) -> Result<()> {
    if opts.n_nodes < 33 || opts.n_nodes % 2 == 0 {
        return Err(Error::validation(
            "n_nodes",
            format!("must be odd and >= 33, got {}", opts.n_nodes),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::validation("tol", "must be > 0"));
    }
    Ok(())
}

/// Solves the steady radiative transfer problem for `G_s` and `q_s`.
pub fn solve_fredholm(params: &ProblemParams, opts: &FredholmOptions) -> Result<RadiativeField> {
    params.validate()?;
    check_options(opts)?;
    let n = opts.n_nodes;
    let tau_h = params.extinction;
    let (om, a, b) = (params.albedo, params.aniso_coeff, params.diffuse_flux);
    let grid = graded_grid(tau_h, n);
    let kw = kernel_weights(&grid);

    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        rhs[i] = 2.0 * b * en(2, grid[i]);
        rhs[n + i] = 2.0 * b * en(3, grid[i]);
    }
    // Scattering operator K acting on x = (G, q).
    let h = 0.5 * om;
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] = h * kw.e1[(i, j)];
            k[(i, n + j)] = h * a * kw.e2s[(i, j)];
            k[(n + i, j)] = h * kw.e2s[(i, j)];
            k[(n + i, n + j)] = h * a * kw.e3[(i, j)];
        }
    }

    let (x, iterations) = if n <= opts.direct_limit {
        let mut m = -k.clone();
        for i in 0..2 * n {
            m[(i, i)] += 1.0;
        }
        let (x, corr) = solve_refined(&m, &rhs)?;
        if !(corr < opts.tol) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IterationFailure {
                iterations: 1,
                residual: corr,
                history: vec![corr],
            });
        }
        (x, 0)
    } else {
        fixed_point(&k, &rhs, opts)?
    };

    let kx = &k * nalgebra::DVector::from_column_slice(&x);
    let residual = (0..2 * n)
        .map(|i| (x[i] - kx[i] - rhs[i]).abs())
        .fold(0.0, f64::max);
    if !(residual < opts.tol) {
        return Err(Error::IterationFailure {
            iterations,
            residual,
            history: vec![residual],
        });
    }

    Ok(RadiativeField {
        tau_grid: grid,
        g_s: x[..n].to_vec(),
        q_s: x[n..].to_vec(),
        params_hash: params.radiative_hash(),
        tau_h,
        residual,
        iterations,
    })
}

fn fixed_point(k: &DMatrix<f64>, rhs: &[f64], opts: &FredholmOptions) -> Result<(Vec<f64>, usize)> {
    let b = nalgebra::DVector::from_column_slice(rhs);
    let mut x = b.clone();
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let next = &b + k * &x;
        let diff = (&next - &x).amax();
        history.push(diff);
        x = next;
        if !diff.is_finite() {
            break;
        }
        if diff < opts.tol {
            return Ok((x.as_slice().to_vec(), it));
        }
    }
    Err(Error::IterationFailure {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

impl RadiativeField {
    fn check_tau(&self, tau: f64) -> Result<f64> {
        let slack = 1e-12 * self.tau_h.max(1.0);
        if !(tau >= -slack && tau <= self.tau_h + slack) {
            return Err(Error::Domain(format!(
                "optical depth {tau} outside [0, {}]",
                self.tau_h
            )));
        }
        Ok(tau.clamp(0.0, self.tau_h))
    }

    fn interval(&self, tau: f64) -> usize {
        let n = self.tau_grid.len();
        self.tau_grid
            .partition_point(|&t| t <= tau)
            .saturating_sub(1)
            .min(n - 2)
    }

    /// Cubic interpolation of `(G_s, q_s)`, exact at nodes.
    pub fn interpolate(&self, tau: f64) -> Result<(f64, f64)> {
        let tau = self.check_tau(tau)?;
        let m = self.interval(tau);
        if self.tau_grid[m] == tau {
            return Ok((self.g_s[m], self.q_s[m]));
        }
        if self.tau_grid[m + 1] == tau {
            return Ok((self.g_s[m + 1], self.q_s[m + 1]));
        }
        let s = stencil_start(m, self.tau_grid.len(), 4);
        let mut l = [0.0; 4];
        lagrange_weights(&self.tau_grid[s..s + 4], tau, &mut l);
        let g = (0..4).map(|k| l[k] * self.g_s[s + k]).sum();
        let q = (0..4).map(|k| l[k] * self.q_s[s + k]).sum();
        Ok((g, q))
    }

    /// `dG_s/dτ` from the degree-5 local interpolant. The exact derivative is
    /// logarithmically singular at both faces; there this returns the finite
    /// interpolant slope.
    pub fn g_derivative(&self, tau: f64) -> Result<f64> {
        let tau = self.check_tau(tau)?;
        let m = self.interval(tau);
        let s = stencil_start(m, self.tau_grid.len(), STENCIL);
        let mut l = [0.0; STENCIL];
        lagrange_derivative_weights(&self.tau_grid[s..s + STENCIL], tau, &mut l);
        Ok((0..STENCIL).map(|k| l[k] * self.g_s[s + k]).sum())
    }
}

/// Free-function form of [`RadiativeField::interpolate`].
pub fn interpolate_field(field: &RadiativeField, tau: f64) -> Result<(f64, f64)> {
    field.interpolate(tau)
}

/// Radiative field of a uniform suspension (`n_s ≡ 1`, `τ = τ_H(1−z)`)
/// sampled on `n_points` equally spaced heights.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformProfile {
    pub z: Vec<f64>,
    pub tau: Vec<f64>,
    pub g_s: Vec<f64>,
    pub q_s: Vec<f64>,
}

pub fn uniform_suspension_profile(
    params: &ProblemParams,
    n_points: usize,
    opts: &FredholmOptions,
) -> Result<UniformProfile> {
    if n_points < 2 {
        return Err(Error::validation("n_points", "must be >= 2"));
    }
    let field = solve_fredholm(params, opts)?;
    let mut out = UniformProfile {
        z: Vec::with_capacity(n_points),
        tau: Vec::with_capacity(n_points),
        g_s: Vec::with_capacity(n_points),
        q_s: Vec::with_capacity(n_points),
    };
    for j in 0..n_points {
        let z = j as f64 / (n_points - 1) as f64;
        let tau = field.tau_h * (1.0 - z);
        let (g, q) = field.interpolate(tau)?;
        out.z.push(z);
        out.tau.push(tau);
        out.g_s.push(g);
        out.q_s.push(q);
    }
    Ok(out)
}
