//! Linear stability of the basic state: collocation of the perturbation
//! equations, neutral curves in the `(k, R)` plane, critical points, mode
//! classification and reconstruction of the neutral modes in `(x, z, t)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basic_state::BasicState;
use crate::chebyshev::ChebGrid;
use crate::error::{Error, Result};
use crate::params::{ProblemParams, TopBoundary};
use crate::perturbed::{DirectionSet, MomentOperator, PerturbedContext};

/// Default threshold on `|Im σ|` separating stationary from oscillatory
/// neutral points.
pub const TOL_FREQ: f64 = 1e-3;
/// Eigenvalues larger than this in magnitude are discarded as spurious.
pub const SPURIOUS_MAGNITUDE: f64 = 1e6;
pub const RAYLEIGH_MIN: f64 = 1.0;
pub const RAYLEIGH_MAX: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Stationary,
    Oscillatory,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Stationary => "stationary",
            Branch::Oscillatory => "oscillatory",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(Branch::Stationary),
            "oscillatory" => Ok(Branch::Oscillatory),
            other => Err(Error::validation("branch", format!("unknown branch {other:?}"))),
        }
    }
}

/// Which eigenvalues take part in the neutrality condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchSelect {
    /// Whole spectrum: the lowest neutral Rayleigh number.
    #[default]
    Lowest,
    /// Real eigenvalues only.
    Stationary,
    /// Complex pairs only.
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    /// Root-finding tolerance on `max Re σ`.
    pub tol_eigen: f64,
    pub tol_freq: f64,
    pub max_iter: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            tol_eigen: 1e-8,
            tol_freq: TOL_FREQ,
            max_iter: 80,
        }
    }
}

/// Eigenvalue together with its `(W, Θ)` profile on the collocation grid.
#[derive(Debug, Clone)]
pub struct Eigenmode {
    pub sigma: C64,
    /// Normalized so that `max |W| = 1` with `W` real and positive there.
    pub w: Vec<C64>,
    pub theta: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutralPoint {
    pub k: f64,
    pub rayleigh: f64,
    pub sigma_im: f64,
    pub branch: Branch,
    pub mode: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub k_c: f64,
    pub r_c: f64,
    pub lambda_c: f64,
    pub sigma_im: f64,
    pub branch: Branch,
    pub mode: usize,
    /// The minimum sits on the first or last wavenumber of the scan.
    pub boundary_minimum: bool,
}

impl CriticalPoint {
    fn from_point(p: &NeutralPoint, boundary_minimum: bool) -> Self {
        CriticalPoint {
            k_c: p.k,
            r_c: p.rayleigh,
            lambda_c: 2.0 * PI / p.k,
            sigma_im: p.sigma_im,
            branch: p.branch,
            mode: p.mode,
            boundary_minimum,
        }
    }
}

/// Discretized generalized eigenproblem `(𝒜₀ + R𝒜₁)x = σℬx`, stored after
/// elimination of the six boundary unknowns as `σx_I = (M₀ + R M₁)x_I`.
#[derive(Debug, Clone)]
pub struct StabilityOperator {
    pub k: f64,
    pub m1: f64,
    pub m2: f64,
    pub top_boundary: TopBoundary,
    pub z: Vec<f64>,
    n: usize,
    m0: DMatrix<C64>,
    m1_mat: DMatrix<C64>,
    /// Real parts of `M₀`, `M₁` when the imaginary parts vanish.
    real: Option<(DMatrix<f64>, DMatrix<f64>)>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// `x_B = E x_I`.
    elim: DMatrix<C64>,
    /// Boundary rows `C x = 0` over the full unknown vector.
    constraints: DMatrix<C64>,
    a0_full: DMatrix<C64>,
    a1_full: DMatrix<C64>,
    b_full: DMatrix<C64>,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(c)
}

/// Assembles the operator for a wavevector along `x` (`m₁ = k`, `m₂ = 0`).
pub fn assemble_operator(
    state: &BasicState,
    k: f64,
    params: &ProblemParams,
    moment_op: &MomentOperator,
) -> Result<StabilityOperator> {
    assemble_operator_2d(state, k, 0.0, params, moment_op)
}

/// Assembles the operator for a general horizontal wavevector `(m₁, m₂)`.
/// `moment_op` must have been built for the same pair.
pub fn assemble_operator_2d(
    state: &BasicState,
    m1: f64,
    m2: f64,
    params: &ProblemParams,
    moment_op: &MomentOperator,
) -> Result<StabilityOperator> {
    let k = m1.hypot(m2);
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::validation("k", format!("must be > 0, got {k}")));
    }
    params.validate()?;
    if params.radiative_hash() != state.params_hash
        || params.swim_speed != state.swim_speed
        || params.extinction != state.extinction
    {
        return Err(Error::Consistency(
            "basic state was built for different parameters".into(),
        ));
    }
    let n = state.z_grid.len();
    if n < 8 {
        return Err(Error::Assembly(format!("{n} collocation points are too few")));
    }
    if moment_op.g.nrows() != n || moment_op.p.nrows() != n {
        return Err(Error::Consistency(
            "moment operator does not match the basic-state grid".into(),
        ));
    }
    let grid = ChebGrid::new(n - 1);
    let vc = params.swim_speed;
    let k2 = k * k;
    let sc = params.schmidt;
    let d1 = to_complex(&grid.d1);
    let d2 = &grid.d2;
    let d4 = &grid.d4;

    let dim = 2 * n;
    let mut a0 = DMatrix::<C64>::zeros(dim, dim);
    let mut a1 = DMatrix::<C64>::zeros(dim, dim);
    let mut b = DMatrix::<C64>::zeros(dim, dim);

    // W equation: (σ/S_c)(D² − k²)W = (D² − k²)²W + Rk²Θ.
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            b[(i, j)] = c((d2[(i, j)] - k2 * id) / sc);
            a0[(i, j)] = c(d4[(i, j)] - 2.0 * k2 * d2[(i, j)] + k2 * k2 * id);
        }
        a1[(i, n + i)] = c(k2);
    }

    // Θ equation: σΘ = D²Θ − (k² + Υ₁)Θ − Υ₂DΘ − Υ₀[Θ] − (Dn_s)W, collocated
    // in flux form σΘ = D F[Θ] − k²Θ + (lateral taxis) − (Dn_s)W with
    // F = DΘ − Υ₂Θ − V_c n_s M′𝒢. Υ₁ = DΥ₂ is log-singular at the top wall;
    // differentiating the smooth product Υ₂Θ keeps spectral accuracy.
    let flux_weight: Vec<f64> = (0..n).map(|j| state.n_s[j] * state.dm_dg[j]).collect();
    let mut taxis_g = moment_op.g.clone();
    for r in 0..n {
        let f = vc * flux_weight[r];
        for col in 0..n {
            taxis_g[(r, col)] *= f;
        }
    }
    let mut flux = &d1 - &taxis_g;
    for j in 0..n {
        flux[(j, j)] -= c(state.upsilon2[j]);
    }
    let div_flux = &d1 * &flux;
    let lateral = &moment_op.p * c(m1) + &moment_op.q * c(m2);
    for i in 0..n {
        let lat = C64::new(0.0, vc * state.n_s[i] * state.m_s[i] / state.q_s_of_z[i]);
        for j in 0..n {
            a0[(n + i, n + j)] = div_flux[(i, j)] + lat * lateral[(i, j)];
        }
        a0[(n + i, n + i)] -= c(k2);
        a0[(n + i, i)] = c(-state.dn_s_dz[i]);
        b[(n + i, n + i)] = c(1.0);
    }

    // Boundary rows.
    let mut cons = DMatrix::<C64>::zeros(6, dim);
    cons[(0, 0)] = c(1.0);
    for j in 0..n {
        cons[(1, j)] = c(grid.d1[(0, j)]);
    }
    cons[(2, n - 1)] = c(1.0);
    for j in 0..n {
        cons[(3, j)] = match params.top_boundary {
            TopBoundary::Rigid => c(grid.d1[(n - 1, j)]),
            TopBoundary::StressFree => c(grid.d2[(n - 1, j)]),
        };
    }
    for (row, node) in [(4, 0), (5, n - 1)] {
        for j in 0..n {
            cons[(row, n + j)] = flux[(node, j)];
        }
    }

    let boundary = vec![0, 1, n - 2, n - 1, n, 2 * n - 1];
    let mut is_bnd = vec![false; dim];
    for &i in &boundary {
        is_bnd[i] = true;
    }
    let interior: Vec<usize> = (0..dim).filter(|&i| !is_bnd[i]).collect();
    // Collocation rows kept: W at 2..n−3, Θ at 1..n−2.
    let eq_rows: Vec<usize> = (2..n - 2).chain(n + 1..2 * n - 1).collect();
    debug_assert_eq!(eq_rows.len(), interior.len());

    let cb = cons.select_columns(&boundary);
    let ci = cons.select_columns(&interior);
    let elim = -cb
        .lu()
        .solve(&ci)
        .ok_or_else(|| Error::Assembly("boundary conditions are degenerate".into()))?;

    let reduce = |m: &DMatrix<C64>| {
        let rows = m.select_rows(&eq_rows);
        rows.select_columns(&interior) + rows.select_columns(&boundary) * &elim
    };
    let a0r = reduce(&a0);
    let a1r = reduce(&a1);
    let br = reduce(&b);
    let lu = br.lu();
    let m0 = lu
        .solve(&a0r)
        .ok_or_else(|| Error::Assembly("mass matrix is singular; grid too coarse".into()))?;
    let m1_mat = lu
        .solve(&a1r)
        .ok_or_else(|| Error::Assembly("mass matrix is singular; grid too coarse".into()))?;
    if !m0.iter().chain(m1_mat.iter()).all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Assembly("non-finite operator entries".into()));
    }

    let real = real_parts(&m0).zip(real_parts(&m1_mat));
    Ok(StabilityOperator {
        k,
        m1,
        m2,
        top_boundary: params.top_boundary,
        z: grid.z.clone(),
        n,
        m0,
        m1_mat,
        real,
        interior,
        boundary,
        elim,
        constraints: cons,
        a0_full: a0,
        a1_full: a1,
        b_full: b,
    })
}

/// Real part of `m` if its imaginary part is rounding noise.
fn real_parts(m: &DMatrix<C64>) -> Option<DMatrix<f64>> {
    let scale = m.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let im = m.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    (im <= 1e-11 * scale.max(f64::MIN_POSITIVE)).then(|| m.map(|v| v.re))
}

impl StabilityOperator {
    /// Number of collocation points per field.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Whether the reduced matrix is real, so that the spectrum is exactly
    /// closed under conjugation.
    pub fn is_real(&self) -> bool {
        self.real.is_some()
    }

    /// Discards the real representation so that the complex eigensolver is
    /// used.
    pub fn force_complex(&mut self) {
        self.real = None;
    }

    /// Reduced matrix `M₀ + R M₁`.
    pub fn matrix(&self, rayleigh: f64) -> DMatrix<C64> {
        &self.m0 + &self.m1_mat * c(rayleigh)
    }

    fn raw_eigenvalues(&self, rayleigh: f64) -> Result<Vec<C64>> {
        let vals: Vec<C64> = match &self.real {
            Some((m0, m1)) => {
                let m = m0 + m1 * rayleigh;
                m.complex_eigenvalues().iter().copied().collect()
            }
            None => {
                let m = self.matrix(rayleigh);
                let cond = m.norm();
                nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)
                    .and_then(|s| s.eigenvalues())
                    .ok_or_else(|| Error::Eigen {
                        message: "complex Schur iteration did not converge".into(),
                        condition: cond,
                    })?
                    .iter()
                    .copied()
                    .collect()
            }
        };
        if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Eigen {
                message: "non-finite eigenvalue".into(),
                condition: self.matrix(rayleigh).norm(),
            });
        }
        Ok(vals)
    }

    /// Full vectors `(W, Θ)` from interior unknowns.
    fn expand(&self, xi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let n = self.n;
        let mut full = vec![C64::new(0.0, 0.0); 2 * n];
        for (v, &i) in xi.iter().zip(&self.interior) {
            full[i] = *v;
        }
        for (r, &i) in self.boundary.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (col, v) in xi.iter().enumerate() {
                s += self.elim[(r, col)] * v;
            }
            full[i] = s;
        }
        (full[..n].to_vec(), full[n..].to_vec())
    }

    /// Eigenvector for an eigenvalue of `M₀ + R M₁` by inverse iteration.
    pub fn eigenmode(&self, rayleigh: f64, sigma: C64) -> Result<Eigenmode> {
        let m = self.matrix(rayleigh);
        let dim = m.nrows();
        let scale = m.norm() / (dim as f64).sqrt();
        let shift = sigma + C64::new(1e-10 * scale.max(1.0), 1e-10 * scale.max(1.0));
        let mut shifted = m;
        for i in 0..dim {
            shifted[(i, i)] -= shift;
        }
        let lu = shifted.lu();
        let mut v = nalgebra::DVector::<C64>::from_fn(dim, |i, _| {
            C64::new(1.0 + 0.1 * (i as f64).sin(), 0.05 * (i as f64).cos())
        });
        for _ in 0..4 {
            let next = lu.solve(&v).ok_or_else(|| Error::Eigen {
                message: "shifted matrix is singular".into(),
                condition: f64::INFINITY,
            })?;
            let nrm = next.norm();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::Eigen {
                    message: "inverse iteration broke down".into(),
                    condition: nrm,
                });
            }
            v = next / c(nrm);
        }
        let (mut w, mut theta) = self.expand(v.as_slice());
        let (imax, wmax) = w
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if !(wmax > 0.0) {
            return Err(Error::Eigen {
                message: "eigenvector has no velocity component".into(),
                condition: 0.0,
            });
        }
        let phase = w[imax].conj() / (wmax * wmax);
        for v in w.iter_mut().chain(theta.iter_mut()) {
            *v *= phase;
        }
        Ok(Eigenmode { sigma, w, theta })
    }

    /// Largest boundary-condition residual of a mode, relative to its size.
    pub fn boundary_residual(&self, mode: &Eigenmode) -> f64 {
        let x: Vec<C64> = mode.w.iter().chain(&mode.theta).copied().collect();
        let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.constraints.nrows() {
            let mut s = C64::new(0.0, 0.0);
            let mut row_scale = 0.0f64;
            for (j, v) in x.iter().enumerate() {
                s += self.constraints[(r, j)] * v;
                row_scale = row_scale.max(self.constraints[(r, j)].norm());
            }
            worst = worst.max(s.norm() / (row_scale * scale));
        }
        worst
    }

    /// Residual of the unreduced collocation equations,
    /// `‖(𝒜₀ + R𝒜₁ − σℬ)x‖∞ / ((‖𝒜₀ + R𝒜₁‖∞ + |σ|‖ℬ‖∞)‖x‖∞)` over the kept rows.
    pub fn equation_residual(&self, rayleigh: f64, mode: &Eigenmode) -> f64 {
        let n = self.n;
        let x: Vec<C64> = mode.w.iter().chain(&mode.theta).copied().collect();
        let xs = x.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let rows = (2..n - 2).chain(n + 1..2 * n - 1);
        let mut worst = 0.0f64;
        for i in rows {
            let mut s = C64::new(0.0, 0.0);
            let mut scale = 0.0;
            for (j, v) in x.iter().enumerate() {
                let a = self.a0_full[(i, j)] + self.a1_full[(i, j)] * rayleigh;
                let coef = a - mode.sigma * self.b_full[(i, j)];
                s += coef * v;
                scale += a.norm() + mode.sigma.norm() * self.b_full[(i, j)].norm();
            }
            worst = worst.max(s.norm() / (scale * xs).max(f64::MIN_POSITIVE));
        }
        worst
    }

    /// Fraction of the mode's energy carried by the nodes next to the walls.
    pub fn wall_energy_fraction(&self, mode: &Eigenmode) -> f64 {
        let n = self.n;
        let frac = |f: &[C64]| {
            let total: f64 = f.iter().map(|v| v.norm_sqr()).sum();
            if total == 0.0 {
                0.0
            } else {
                (f[1].norm_sqr() + f[n - 2].norm_sqr()) / total
            }
        };
        0.5 * (frac(&mode.w) + frac(&mode.theta))
    }
}

/// Eigenvalues of `M₀ + R M₁`, sorted by decreasing real part, with
/// `|σ| > 10⁶` removed.
pub fn growth_spectrum(op: &StabilityOperator, rayleigh: f64) -> Result<Vec<C64>> {
    let mut vals: Vec<C64> = op
        .raw_eigenvalues(rayleigh)?
        .into_iter()
        .filter(|v| v.norm() <= SPURIOUS_MAGNITUDE)
        .collect();
    vals.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(vals)
}

fn in_class(v: &C64, select: BranchSelect, tol_freq: f64) -> bool {
    match select {
        BranchSelect::Lowest => true,
        BranchSelect::Stationary => v.im.abs() < tol_freq,
        BranchSelect::Oscillatory => v.im.abs() >= tol_freq,
    }
}

/// Leading eigenvalue of a class, or `None` if the class is empty.
fn leading(
    op: &StabilityOperator,
    rayleigh: f64,
    select: BranchSelect,
    tol_freq: f64,
) -> Result<Option<C64>> {
    Ok(growth_spectrum(op, rayleigh)?
        .into_iter()
        .find(|v| in_class(v, select, tol_freq)))
}

/// Mode number from a vertical-velocity profile: one plus the number of
/// strict sign changes of `Re(W e^{−i arg W_max})` across the layer.
pub fn classify_mode(w: &[C64]) -> Result<usize> {
    let (imax, wmax) = w
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm()))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if !(wmax > 1e-300) || !wmax.is_finite() {
        return Err(Error::Domain("eigenvector is zero and cannot be normalized".into()));
    }
    let rot = w[imax].conj() / wmax;
    let cut = 1e-8 * wmax;
    let mut changes = 0;
    let mut last = 0.0f64;
    for v in w {
        let r = (v * rot).re;
        if r.abs() <= cut {
            continue;
        }
        if last != 0.0 && r.signum() != last.signum() {
            changes += 1;
        }
        last = r;
    }
    Ok(1 + changes)
}

/// Root of `max Re σ(R)` over one spectrum class at a fixed operator.
pub fn neutral_point(
    op: &StabilityOperator,
    guess: Option<f64>,
    select: BranchSelect,
    opts: &StabilityOptions,
) -> Result<(NeutralPoint, Eigenmode)> {
    let k = op.k;
    let fail = || Error::Bracketing {
        k,
        lo: RAYLEIGH_MIN,
        hi: RAYLEIGH_MAX,
    };
    let f = |r: f64| -> Result<(f64, Option<C64>)> {
        let lead = leading(op, r, select, opts.tol_freq)?;
        Ok((lead.map_or(f64::NEG_INFINITY, |v| v.re), lead))
    };

    let r0 = guess.unwrap_or(1e3).clamp(RAYLEIGH_MIN, RAYLEIGH_MAX);
    let (f0, _) = f(r0)?;
    // Expanding geometric search for a sign change.
    let (mut lo, mut hi, mut flo, mut fhi);
    let mut factor: f64 = 1.05;
    if f0 < 0.0 {
        lo = r0;
        flo = f0;
        loop {
            let r = (lo * factor).min(RAYLEIGH_MAX);
            let (fr, _) = f(r)?;
            if fr >= 0.0 {
                hi = r;
                fhi = fr;
                break;
            }
            if r >= RAYLEIGH_MAX {
                return Err(fail());
            }
            lo = r;
            flo = fr;
            factor = factor * factor;
        }
    } else {
        hi = r0;
        fhi = f0;
        loop {
            let r = (hi / factor).max(RAYLEIGH_MIN);
            let (fr, _) = f(r)?;
            if fr < 0.0 {
                lo = r;
                flo = fr;
                break;
            }
            if r <= RAYLEIGH_MIN {
                return Err(fail());
            }
            hi = r;
            fhi = fr;
            factor = factor * factor;
        }
    }

    // Safeguarded secant with the Illinois modification.
    let mut side = 0i32;
    let mut best = (hi, fhi);
    for it in 0..opts.max_iter {
        let width = hi - lo;
        let r = if flo.is_finite() && fhi.is_finite() {
            let s = hi - fhi * (hi - lo) / (fhi - flo);
            if s > lo + 1e-3 * width && s < hi - 1e-3 * width {
                s
            } else {
                0.5 * (lo + hi)
            }
        } else {
            (lo * hi).sqrt()
        };
        let (fr, _) = f(r)?;
        if fr.abs() < best.1.abs() {
            best = (r, fr);
        }
        debug!("k={k:.4} it={it} R={r:.10e} f={fr:.3e}");
        if fr.abs() < opts.tol_eigen {
            best = (r, fr);
            break;
        }
        if fr < 0.0 {
            lo = r;
            flo = fr;
            if side == -1 && fhi.is_finite() {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = r;
            fhi = fr;
            if side == 1 && flo.is_finite() {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    let (r, _) = best;
    let (fr, lead) = f(r)?;
    let sigma = lead.ok_or_else(fail)?;
    // A bracket that collapses onto a jump of the leading eigenvalue is not
    // a neutral point.
    if fr.abs() > 1e-6 * (1.0 + sigma.norm()) {
        warn!("k={k:.4}: root search ended at R={r:.6e} with Re σ = {fr:.3e}");
        return Err(Error::IterationFailure {
            iterations: opts.max_iter,
            residual: fr.abs(),
            history: vec![fr],
        });
    }
    let mode = op.eigenmode(r, sigma)?;
    if op.wall_energy_fraction(&mode) > 0.5 {
        warn!("k={k:.4}: neutral eigenvector is concentrated at the walls");
        return Err(Error::Eigen {
            message: "leading eigenvector is a spurious wall mode".into(),
            condition: op.wall_energy_fraction(&mode),
        });
    }
    let branch = if sigma.im.abs() < opts.tol_freq {
        Branch::Stationary
    } else {
        Branch::Oscillatory
    };
    let point = NeutralPoint {
        k,
        rayleigh: r,
        sigma_im: sigma.im.abs(),
        branch,
        mode: classify_mode(&mode.w)?,
    };
    Ok((point, mode))
}

/// Vertex of the parabola through three points; `None` if degenerate.
pub fn parabola_vertex(p: [(f64, f64); 3]) -> Option<(f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) || !a.is_finite() {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let xv = -b / (2.0 * a);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    Some((xv, yv))
}

/// Minimum of a traced curve. Points are grouped by branch; the lowest
/// point is refined by a parabola through its neighbours on the same branch.
pub fn critical_point(curve: &[NeutralPoint]) -> Result<CriticalPoint> {
    if curve.is_empty() {
        return Err(Error::Domain("empty neutral curve".into()));
    }
    let best = curve
        .iter()
        .min_by(|a, b| a.rayleigh.total_cmp(&b.rayleigh))
        .copied()
        .ok_or_else(|| Error::Domain("empty neutral curve".into()))?;
    let mut same: Vec<NeutralPoint> = curve
        .iter()
        .filter(|p| p.branch == best.branch)
        .copied()
        .collect();
    same.sort_by(|a, b| a.k.total_cmp(&b.k));
    let k_lo = curve.iter().map(|p| p.k).fold(f64::INFINITY, f64::min);
    let k_hi = curve.iter().map(|p| p.k).fold(f64::NEG_INFINITY, f64::max);
    let at_edge = best.k <= k_lo || best.k >= k_hi;
    if at_edge {
        warn!("minimum of the neutral curve lies at the edge of the scanned range");
    }
    let i = same.iter().position(|p| p.k == best.k && p.rayleigh == best.rayleigh);
    let mut cp = CriticalPoint::from_point(&best, at_edge);
    if let Some(i) = i.filter(|&i| i > 0 && i + 1 < same.len()) {
        let pts = [
            (same[i - 1].k, same[i - 1].rayleigh),
            (same[i].k, same[i].rayleigh),
            (same[i + 1].k, same[i + 1].rayleigh),
        ];
        if let Some((kv, rv)) = parabola_vertex(pts) {
            if kv >= pts[0].0 && kv <= pts[2].0 && rv <= best.rayleigh {
                cp.k_c = kv;
                cp.r_c = rv;
                cp.lambda_c = 2.0 * PI / kv;
                let t = if kv < pts[1].0 {
                    (kv - pts[0].0) / (pts[1].0 - pts[0].0)
                } else {
                    (kv - pts[1].0) / (pts[2].0 - pts[1].0)
                };
                let (a, b) = if kv < pts[1].0 {
                    (same[i - 1].sigma_im, same[i].sigma_im)
                } else {
                    (same[i].sigma_im, same[i + 1].sigma_im)
                };
                cp.sigma_im = a + t * (b - a);
            }
        }
    }
    Ok(cp)
}

/// Neutral curve of one case: all points found, the wavenumbers where the
/// root search failed, and the end of the oscillatory branch if detected.
#[derive(Debug, Clone, Default)]
pub struct NeutralCurve {
    /// Lowest neutral point per wavenumber.
    pub points: Vec<NeutralPoint>,
    /// Points on the branch not selected by `points` (stationary values
    /// under an oscillatory envelope and vice versa).
    pub secondary: Vec<NeutralPoint>,
    pub failures: Vec<(f64, String)>,
    pub branch_point: Option<f64>,
}

/// Reusable solver for one basic state: caches the angular sweep data and
/// builds per-wavenumber operators on demand.
#[derive(Debug, Clone)]
pub struct StabilitySolver {
    pub params: ProblemParams,
    pub state: BasicState,
    pub context: PerturbedContext,
    pub options: StabilityOptions,
}

impl StabilitySolver {
    pub fn new(
        params: &ProblemParams,
        state: &BasicState,
        dirs: &DirectionSet,
        options: StabilityOptions,
    ) -> Result<Self> {
        let context = PerturbedContext::new(state, dirs, params.diffuse_flux)?;
        Ok(StabilitySolver {
            params: *params,
            state: state.clone(),
            context,
            options,
        })
    }

    pub fn operator(&self, k: f64) -> Result<StabilityOperator> {
        self.operator_2d(k, 0.0)
    }

    pub fn operator_2d(&self, m1: f64, m2: f64) -> Result<StabilityOperator> {
        let mom = self.context.operator(m1, m2)?;
        assemble_operator_2d(&self.state, m1, m2, &self.params, &mom)
    }

    pub fn neutral_point(
        &self,
        k: f64,
        guess: Option<f64>,
        select: BranchSelect,
    ) -> Result<NeutralPoint> {
        let op = self.operator(k)?;
        neutral_point(&op, guess, select, &self.options).map(|r| r.0)
    }

    /// Neutral point and its eigenmode.
    pub fn neutral_mode(
        &self,
        k: f64,
        guess: Option<f64>,
        select: BranchSelect,
    ) -> Result<(NeutralPoint, Eigenmode)> {
        let op = self.operator(k)?;
        neutral_point(&op, guess, select, &self.options)
    }

    /// Continuation in `k` from `k_min` to `k_max` with warm-started `R`.
    pub fn trace_neutral_curve(&self, k_min: f64, k_max: f64, k_step: f64) -> Result<NeutralCurve> {
        if !(k_min > 0.0 && k_max > k_min && k_step > 0.0) {
            return Err(Error::validation(
                "k range",
                format!("need 0 < k_min < k_max and k_step > 0, got {k_min}, {k_max}, {k_step}"),
            ));
        }
        let count = ((k_max - k_min) / k_step + 1e-9).floor() as usize + 1;
        let ks: Vec<f64> = (0..count).map(|i| k_min + i as f64 * k_step).collect();
        let mut curve = NeutralCurve::default();
        let mut guess = None;
        let mut osc_guess = None;
        // Wavenumbers where an oscillatory neutral point exists, and those
        // where it was searched for and not found.
        let mut osc_at = Vec::new();
        let mut no_osc_at = Vec::new();
        for &k in &ks {
            let op = match self.operator(k) {
                Ok(op) => op,
                Err(e) => {
                    curve.failures.push((k, e.to_string()));
                    continue;
                }
            };
            match neutral_point(&op, guess, BranchSelect::Lowest, &self.options) {
                Ok((p, _)) => {
                    guess = Some(p.rayleigh);
                    curve.points.push(p);
                    let other = match p.branch {
                        Branch::Stationary => BranchSelect::Oscillatory,
                        Branch::Oscillatory => BranchSelect::Stationary,
                    };
                    let hint = if other == BranchSelect::Oscillatory {
                        osc_guess.or(Some(p.rayleigh))
                    } else {
                        Some(p.rayleigh)
                    };
                    match neutral_point(&op, hint, other, &self.options) {
                        Ok((q, _)) if q.rayleigh >= p.rayleigh * (1.0 - 1e-9) => {
                            curve.secondary.push(q);
                        }
                        _ => {}
                    }
                    let osc = if p.branch == Branch::Oscillatory {
                        Some(p)
                    } else {
                        curve.secondary.last().filter(|q| q.k == k && q.branch == Branch::Oscillatory).copied()
                    };
                    match osc {
                        Some(o) => {
                            osc_guess = Some(o.rayleigh);
                            osc_at.push(k);
                        }
                        None => no_osc_at.push(k),
                    }
                }
                Err(e) => {
                    warn!("neutral point at k={k:.4} failed: {e}");
                    curve.failures.push((k, e.to_string()));
                }
            }
        }
        // The oscillatory branch ends where it merges with the stationary
        // one: the first wavenumber above the oscillatory segment with no
        // complex neutral pair.
        if let Some(&k_osc) = osc_at.iter().max_by(|a, b| a.total_cmp(b)) {
            if let Some(&k_none) = no_osc_at.iter().filter(|&&k| k > k_osc).min_by(|a, b| a.total_cmp(b)) {
                curve.branch_point = Some(self.locate_branch_point(k_osc, k_none, osc_guess)?);
            }
        }
        Ok(curve)
    }

    /// Bisection in `k` for the end of the oscillatory branch.
    fn locate_branch_point(&self, mut lo: f64, mut hi: f64, guess: Option<f64>) -> Result<f64> {
        let mut guess = guess;
        while hi - lo > 5e-3 {
            let mid = 0.5 * (lo + hi);
            match self.neutral_point(mid, guess, BranchSelect::Oscillatory) {
                Ok(p) => {
                    guess = Some(p.rayleigh);
                    lo = mid;
                }
                Err(_) => hi = mid,
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Golden-section minimization of the lowest neutral `R(k)` around the
    /// discrete minimum of a traced curve.
    pub fn refine_critical(&self, curve: &NeutralCurve, tol_k: f64) -> Result<CriticalPoint> {
        let coarse = critical_point(&curve.points)?;
        let mut pts = curve.points.clone();
        pts.sort_by(|a, b| a.k.total_cmp(&b.k));
        let i = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.rayleigh.total_cmp(&b.1.rayleigh))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if i == 0 || i + 1 == pts.len() {
            return Ok(coarse);
        }
        let mut a = pts[i - 1].k;
        let mut b = pts[i + 1].k;
        let mut guess = Some(pts[i].rayleigh);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |k: f64, guess: &mut Option<f64>| -> Result<NeutralPoint> {
            let p = self.neutral_point(k, *guess, BranchSelect::Lowest)?;
            *guess = Some(p.rayleigh);
            Ok(p)
        };
        let mut x1 = b - gr * (b - a);
        let mut x2 = a + gr * (b - a);
        let mut p1 = eval(x1, &mut guess)?;
        let mut p2 = eval(x2, &mut guess)?;
        let mut best = if p1.rayleigh < pts[i].rayleigh { p1 } else { pts[i] };
        if p2.rayleigh < best.rayleigh {
            best = p2;
        }
        while b - a > tol_k {
            if p1.rayleigh < p2.rayleigh {
                b = x2;
                x2 = x1;
                p2 = p1;
                x1 = b - gr * (b - a);
                p1 = eval(x1, &mut guess)?;
                if p1.rayleigh < best.rayleigh {
                    best = p1;
                }
            } else {
                a = x1;
                x1 = x2;
                p1 = p2;
                x2 = a + gr * (b - a);
                p2 = eval(x2, &mut guess)?;
                if p2.rayleigh < best.rayleigh {
                    best = p2;
                }
            }
        }
        Ok(CriticalPoint::from_point(&best, coarse.boundary_minimum))
    }
}

/// Period `2π/Im σ` of an oscillatory neutral point.
pub fn period(point: &NeutralPoint) -> Result<f64> {
    if point.branch == Branch::Stationary || point.sigma_im == 0.0 {
        return Err(Error::Domain("a stationary mode has no period".into()));
    }
    Ok(2.0 * PI / point.sigma_im)
}

/// Snapshots of a neutral mode in the `(x, z)` plane.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub times: Vec<f64>,
    /// `w₁` per time, indexed `[z][x]`.
    pub w: Vec<DMatrix<f64>>,
    /// `n₁` per time, indexed `[z][x]`.
    pub n: Vec<DMatrix<f64>>,
    /// Height of `max |W|`, where the phase portrait is sampled at `x = 0`.
    pub portrait_z: f64,
    /// `(w₁, dw₁/dt)` at the portrait point for each time.
    pub portrait: Vec<(f64, f64)>,
}

/// `w₁ = Re[W(z) e^{σt + ikx}]` and `n₁ = Re[Θ(z) e^{σt + ikx}]` over one
/// horizontal wavelength, with `Re σ = 0` at neutrality.
pub fn reconstruct_evolution(
    point: &NeutralPoint,
    mode: &Eigenmode,
    z: &[f64],
    times: &[f64],
    x_samples: usize,
) -> Result<Evolution> {
    if x_samples == 0 {
        return Err(Error::validation("x_samples", "must be >= 1"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("times", "must be finite"));
    }
    if mode.w.len() != z.len() || mode.theta.len() != z.len() {
        return Err(Error::Consistency("mode and grid lengths differ".into()));
    }
    let k = point.k;
    let om = match point.branch {
        Branch::Stationary => 0.0,
        Branch::Oscillatory => point.sigma_im,
    };
    let lambda = 2.0 * PI / k;
    let x: Vec<f64> = (0..x_samples).map(|i| lambda * i as f64 / x_samples as f64).collect();
    let nz = z.len();
    let mut ws = Vec::with_capacity(times.len());
    let mut ns = Vec::with_capacity(times.len());
    for &t in times {
        let mut w = DMatrix::zeros(nz, x_samples);
        let mut n = DMatrix::zeros(nz, x_samples);
        for (ix, &xv) in x.iter().enumerate() {
            let ph = C64::from_polar(1.0, om * t + k * xv);
            for iz in 0..nz {
                w[(iz, ix)] = (mode.w[iz] * ph).re;
                n[(iz, ix)] = (mode.theta[iz] * ph).re;
            }
        }
        ws.push(w);
        ns.push(n);
    }
    let iz = mode
        .w
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let portrait = times
        .iter()
        .map(|&t| {
            let v = mode.w[iz] * C64::from_polar(1.0, om * t);
            (v.re, (v * C64::new(0.0, om)).re)
        })
        .collect();
    Ok(Evolution {
        x,
        z: z.to_vec(),
        times: times.to_vec(),
        w: ws,
        n: ns,
        portrait_z: z[iz],
        portrait,
    })
}
