//! Perturbed radiative intensity for a normal-mode concentration disturbance.
//!
//! For each discrete direction `(η, φ)` the amplitude `Ψ(z)` obeys a linear
//! first-order ODE in `z` with zero inflow at both walls. It is advanced
//! cell by cell on the Chebyshev grid with an exact integrating factor,
//! the source being a local cubic in `z`. Because the per-direction
//! propagator is linear, the moment maps `Θ ↦ (𝒢, P, Q, S)` can be assembled
//! as dense matrices.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basic_state::BasicState;
use crate::chebyshev::ChebGrid;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

pub type C64 = Complex64;

const SUBSTEPS: usize = 4;
const SERIES_RADIUS: f64 = 2.0;

/// Product quadrature over the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    /// Vertical cosines, downward hemisphere first, each ascending.
    pub mu_nodes: Vec<f64>,
    pub mu_weights: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
}

impl DirectionSet {
    /// `n_mu` Gauss–Legendre nodes per hemisphere and `n_phi` uniform azimuths.
    pub fn new(n_mu: usize, n_phi: usize) -> Result<Self> {
        if n_mu < 1 {
            return Err(Error::validation("n_mu", "must be >= 1"));
        }
        if n_phi < 2 || n_phi % 2 != 0 {
            return Err(Error::validation("n_phi", "must be even and >= 2"));
        }
        let (x, w) = gauss_legendre(n_mu);
        let half: Vec<(f64, f64)> = (0..n_mu).map(|i| (0.5 * (1.0 + x[i]), 0.5 * w[i])).collect();
        let mut mu = Vec::with_capacity(2 * n_mu);
        let mut mw = Vec::with_capacity(2 * n_mu);
        for &(eta, wt) in half.iter().rev() {
            mu.push(-eta);
            mw.push(wt);
        }
        for &(eta, wt) in &half {
            mu.push(eta);
            mw.push(wt);
        }
        let dphi = 2.0 * PI / n_phi as f64;
        let phi: Vec<f64> = (0..n_phi).map(|j| (j as f64 + 0.5) * dphi).collect();
        // Reflections φ ↦ 2π − φ and φ ↦ π − φ map the grid onto itself; the
        // cosines and sines are mirrored so those symmetries hold exactly.
        let mut cos_phi = vec![0.0; n_phi];
        let mut sin_phi = vec![0.0; n_phi];
        let half = n_phi / 2;
        for j in 0..half.div_ceil(2) {
            let (c, s) = (phi[j].cos(), phi[j].sin());
            for (idx, cv, sv) in [
                (j, c, s),
                (half - 1 - j, -c, s),
                (half + j, -c, -s),
                (n_phi - 1 - j, c, -s),
            ] {
                cos_phi[idx] = cv;
                sin_phi[idx] = sv;
            }
        }
        Ok(DirectionSet {
            mu_nodes: mu,
            mu_weights: mw,
            phi_nodes: phi,
            cos_phi,
            sin_phi,
        })
    }

    pub fn phi_weight(&self) -> f64 {
        2.0 * PI / self.phi_nodes.len() as f64
    }

    pub fn len(&self) -> usize {
        self.mu_nodes.len() * self.phi_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(η, ζ, ν, weight)` of every ordinate.
    pub fn ordinates(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let wphi = self.phi_weight();
        self.mu_nodes.iter().zip(&self.mu_weights).flat_map(move |(&eta, &we)| {
            let st = (1.0 - eta * eta).sqrt();
            self.cos_phi
                .iter()
                .zip(&self.sin_phi)
                .map(move |(&c, &s)| (eta, st * c, st * s, we * wphi))
        })
    }
}

/// `J_k(λ) = ∫₀¹ e^{−λ(1−u)} uᵏ du` for `k = 0..3`.
fn j_integrals(lambda: C64) -> [C64; 4] {
    let mut out = [C64::new(0.0, 0.0); 4];
    if lambda.norm() < SERIES_RADIUS {
        // Σ_m (−λ)^m k!/(k+m+1)!
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = C64::new(1.0 / (k as f64 + 1.0), 0.0);
            let mut sum = term;
            for m in 1..60 {
                term *= -lambda / (k + m + 1) as f64;
                sum += term;
                if term.norm() < 1e-17 * sum.norm() {
                    break;
                }
            }
            *o = sum;
        }
    } else {
        let inv = 1.0 / lambda;
        out[0] = (1.0 - (-lambda).exp()) * inv;
        for k in 1..4 {
            out[k] = (1.0 - k as f64 * out[k - 1]) * inv;
        }
    }
    out
}

/// Coefficients in `u` of `Π (a_m + b u)` for the three linear factors.
fn cubic_from_factors(a: [f64; 3], b: f64) -> [f64; 4] {
    let mut p = [1.0, 0.0, 0.0, 0.0];
    for am in a {
        let mut q = [0.0; 4];
        for k in 0..3 {
            q[k] += am * p[k];
            q[k + 1] += b * p[k];
        }
        p = q;
    }
    p
}

/// Per-substep geometry shared by every direction.
#[derive(Debug, Clone)]
struct Substep {
    cell: usize,
    /// Step length in `z`.
    h: f64,
    /// Optical thickness `τ(z_lo) − τ(z_hi)`.
    dtau: f64,
    /// `coef[orientation][k][j]`: coefficient of `uᵏ` contributed by stencil
    /// node `j`, with `u` running along the propagation direction.
    coef: [[[f64; 4]; 4]; 2],
}

/// Direction-independent data for sweeps over one basic state.
#[derive(Debug, Clone)]
pub struct SweepGeometry {
    pub grid: ChebGrid,
    stencil: Vec<usize>,
    substeps: Vec<Substep>,
}

fn stencil_start(cell: usize, n: usize) -> usize {
    cell.saturating_sub(1).min(n - 4)
}

impl SweepGeometry {
    pub fn new(state: &BasicState) -> Self {
        let grid = ChebGrid::new(state.z_grid.len() - 1);
        let n = grid.len();
        let stencil: Vec<usize> = (0..n - 1).map(|c| stencil_start(c, n)).collect();
        let mut substeps = Vec::with_capacity((n - 1) * SUBSTEPS);
        for c in 0..n - 1 {
            let (za, zb) = (grid.z[c], grid.z[c + 1]);
            let s0 = stencil[c];
            let zs = &grid.z[s0..s0 + 4];
            for k in 0..SUBSTEPS {
                let lo = za + (zb - za) * k as f64 / SUBSTEPS as f64;
                let hi = if k + 1 == SUBSTEPS {
                    zb
                } else {
                    za + (zb - za) * (k + 1) as f64 / SUBSTEPS as f64
                };
                let tau_lo = if k == 0 { state.tau_of_z[c] } else { grid.interpolate(&state.tau_of_z, lo) };
                let tau_hi = if k + 1 == SUBSTEPS {
                    state.tau_of_z[c + 1]
                } else {
                    grid.interpolate(&state.tau_of_z, hi)
                };
                let h = hi - lo;
                let mut coef = [[[0.0; 4]; 4]; 2];
                for (o, (start, step)) in [(lo, h), (hi, -h)].into_iter().enumerate() {
                    for j in 0..4 {
                        let mut a = [0.0; 3];
                        let mut denom = 1.0;
                        let mut idx = 0;
                        for m in 0..4 {
                            if m != j {
                                a[idx] = start - zs[m];
                                denom *= zs[j] - zs[m];
                                idx += 1;
                            }
                        }
                        let p = cubic_from_factors(a, step);
                        for kk in 0..4 {
                            coef[o][kk][j] = p[kk] / denom;
                        }
                    }
                }
                substeps.push(Substep {
                    cell: c,
                    h,
                    dtau: (tau_lo - tau_hi).max(0.0),
                    coef,
                });
            }
        }
        SweepGeometry {
            grid,
            stencil,
            substeps,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Cell propagators for the direction with vertical cosine `eta` and
    /// horizontal phase rate `p` (`m₁ζ + m₂ν`).
    pub fn table(&self, p: f64, eta: f64) -> SweepTable {
        let n = self.len();
        let up = eta > 0.0;
        let o = if up { 0 } else { 1 };
        let ae = eta.abs();
        let mut cells = vec![
            CellStep {
                e: C64::new(1.0, 0.0),
                g: [C64::new(0.0, 0.0); 4],
            };
            n - 1
        ];
        for c in 0..n - 1 {
            let subs = &self.substeps[c * SUBSTEPS..(c + 1) * SUBSTEPS];
            let mut e = C64::new(1.0, 0.0);
            let mut g = [C64::new(0.0, 0.0); 4];
            let order: Vec<usize> = if up {
                (0..SUBSTEPS).collect()
            } else {
                (0..SUBSTEPS).rev().collect()
            };
            for &si in &order {
                let s = &subs[si];
                debug_assert_eq!(s.cell, c);
                let lambda = C64::new(s.dtau, p * s.h) / ae;
                let el = (-lambda).exp();
                let jk = j_integrals(lambda);
                let scale = s.h / ae;
                e *= el;
                for (j, gj) in g.iter_mut().enumerate() {
                    let mut add = C64::new(0.0, 0.0);
                    for (k, jkk) in jk.iter().enumerate() {
                        add += *jkk * s.coef[o][k][j];
                    }
                    *gj = *gj * el + add * scale;
                }
            }
            cells[c] = CellStep { e, g };
        }
        SweepTable {
            up,
            cells,
            stencil: self.stencil.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CellStep {
    e: C64,
    g: [C64; 4],
}

/// Discrete propagator of one direction: `Ψ(nodes) = T s(nodes) + inflow`.
#[derive(Debug, Clone)]
pub struct SweepTable {
    up: bool,
    cells: Vec<CellStep>,
    stencil: Vec<usize>,
}

impl SweepTable {
    pub fn apply(&self, source: &[C64], inflow: C64) -> Vec<C64> {
        let n = self.cells.len() + 1;
        let mut psi = vec![C64::new(0.0, 0.0); n];
        if self.up {
            psi[0] = inflow;
            for c in 0..n - 1 {
                psi[c + 1] = self.step(c, psi[c], source);
            }
        } else {
            psi[n - 1] = inflow;
            for c in (0..n - 1).rev() {
                psi[c] = self.step(c, psi[c + 1], source);
            }
        }
        psi
    }

    fn step(&self, c: usize, start: C64, source: &[C64]) -> C64 {
        let cell = &self.cells[c];
        let s0 = self.stencil[c];
        let mut v = cell.e * start;
        for j in 0..4 {
            v += cell.g[j] * source[s0 + j];
        }
        v
    }

    /// Adds `weight · T` into `acc` for every `(acc, weight)` pair.
    fn accumulate(&self, targets: &mut [(&mut DMatrix<C64>, f64)]) {
        let n = self.cells.len() + 1;
        let mut row = vec![C64::new(0.0, 0.0); n];
        let mut next = vec![C64::new(0.0, 0.0); n];
        let nodes: Vec<(usize, usize)> = if self.up {
            (0..n - 1).map(|c| (c, c + 1)).collect()
        } else {
            (0..n - 1).rev().map(|c| (c, c)).collect()
        };
        for (c, target) in nodes {
            let cell = &self.cells[c];
            for (nx, r) in next.iter_mut().zip(&row) {
                *nx = cell.e * r;
            }
            let s0 = self.stencil[c];
            for j in 0..4 {
                next[s0 + j] += cell.g[j];
            }
            std::mem::swap(&mut row, &mut next);
            for (acc, w) in targets.iter_mut() {
                for (col, v) in row.iter().enumerate() {
                    if *v != C64::new(0.0, 0.0) {
                        acc[(target, col)] += *v * *w;
                    }
                }
            }
        }
    }
}

/// Moment profiles of the perturbed intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedMoments {
    pub g1: Vec<C64>,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
    pub s: Vec<C64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Dense moment maps: `𝒢 = g·Θ`, `P = p·Θ`, `Q = q·Θ`, `S = s·Θ`.
#[derive(Debug, Clone)]
pub struct MomentOperator {
    pub g: DMatrix<C64>,
    pub p: DMatrix<C64>,
    pub q: DMatrix<C64>,
    pub s: DMatrix<C64>,
}

impl MomentOperator {
    pub fn apply(&self, theta: &[C64]) -> PerturbedMoments {
        let t = nalgebra::DVector::from_column_slice(theta);
        PerturbedMoments {
            g1: (&self.g * &t).as_slice().to_vec(),
            p: (&self.p * &t).as_slice().to_vec(),
            q: (&self.q * &t).as_slice().to_vec(),
            s: (&self.s * &t).as_slice().to_vec(),
            converged: true,
            iterations: 0,
        }
    }
}

/// Sweep geometry plus the steady angular intensity, reusable across
/// wavenumbers for one basic state.
#[derive(Debug, Clone)]
pub struct PerturbedContext {
    pub geometry: SweepGeometry,
    pub dirs: DirectionSet,
    n_s: Vec<f64>,
    /// `β(z, η) = τ_H[(ω/4π)(G_s − Aηq_s) − L_s(z, η)]`, one profile per η node.
    beta: Vec<Vec<f64>>,
    /// Steady angular intensity `L_s(z, η)`, one profile per η node.
    pub steady_intensity: Vec<Vec<f64>>,
    alpha: f64,
    aniso: f64,
}

impl PerturbedContext {
    pub fn new(state: &BasicState, dirs: &DirectionSet, diffuse_flux: f64) -> Result<Self> {
        if state.z_grid.len() < 5 {
            return Err(Error::validation("n_z", "basic state grid is too coarse"));
        }
        let geometry = SweepGeometry::new(state);
        let n = geometry.len();
        let tau_h = state.extinction;
        let om = state.albedo;
        let a = state.aniso_coeff;
        let c4 = om / (4.0 * PI);
        let mut beta = Vec::with_capacity(dirs.mu_nodes.len());
        let mut steady = Vec::with_capacity(dirs.mu_nodes.len());
        for &eta in &dirs.mu_nodes {
            let scat: Vec<f64> = (0..n)
                .map(|j| c4 * (state.g_s_of_z[j] - a * eta * state.q_s_of_z[j]))
                .collect();
            let src: Vec<C64> = (0..n)
                .map(|j| C64::new(tau_h * state.n_s[j] * scat[j], 0.0))
                .collect();
            let inflow = if eta < 0.0 { diffuse_flux / PI } else { 0.0 };
            let ls: Vec<f64> = geometry
                .table(0.0, eta)
                .apply(&src, C64::new(inflow, 0.0))
                .iter()
                .map(|v| v.re)
                .collect();
            beta.push((0..n).map(|j| tau_h * (scat[j] - ls[j])).collect());
            steady.push(ls);
        }
        Ok(PerturbedContext {
            geometry,
            dirs: dirs.clone(),
            n_s: state.n_s.clone(),
            beta,
            steady_intensity: steady,
            alpha: om * tau_h / (4.0 * PI),
            aniso: a,
        })
    }

    /// `∫ L_s dΩ` on the grid, a consistency check against `G_s`.
    pub fn steady_total_intensity(&self) -> Vec<f64> {
        let n = self.geometry.len();
        let mut g = vec![0.0; n];
        for (i, ls) in self.steady_intensity.iter().enumerate() {
            let w = self.dirs.mu_weights[i] * 2.0 * PI;
            for j in 0..n {
                g[j] += w * ls[j];
            }
        }
        g
    }

    /// Distinct `(p, η)` propagators with their summed weights
    /// `(Σw, Σwζ, Σwν)`, grouped by η node.
    fn grouped_tables(&self, m1: f64, m2: f64) -> Vec<Vec<(SweepTable, [f64; 3])>> {
        let wphi = self.dirs.phi_weight();
        let mut out = Vec::with_capacity(self.dirs.mu_nodes.len());
        for (i, &eta) in self.dirs.mu_nodes.iter().enumerate() {
            let we = self.dirs.mu_weights[i] * wphi;
            let st = (1.0 - eta * eta).sqrt();
            let mut index: HashMap<u64, usize> = HashMap::new();
            let mut group: Vec<(f64, [f64; 3])> = Vec::new();
            for (c, s) in self.dirs.cos_phi.iter().zip(&self.dirs.sin_phi) {
                let (zeta, nu) = (st * c, st * s);
                let p = m1 * zeta + m2 * nu;
                let key = p.to_bits();
                let slot = *index.entry(key).or_insert_with(|| {
                    group.push((p, [0.0; 3]));
                    group.len() - 1
                });
                let w = &mut group[slot].1;
                w[0] += we;
                w[1] += we * zeta;
                w[2] += we * nu;
            }
            out.push(
                group
                    .into_iter()
                    .map(|(p, w)| (self.geometry.table(p, eta), w))
                    .collect(),
            );
        }
        out
    }

    fn source(&self, eta_idx: usize, theta: &[C64], g1: &[C64], s: &[C64]) -> Vec<C64> {
        let eta = self.dirs.mu_nodes[eta_idx];
        let beta = &self.beta[eta_idx];
        (0..theta.len())
            .map(|j| {
                self.n_s[j] * self.alpha * (g1[j] + self.aniso * eta * s[j]) + beta[j] * theta[j]
            })
            .collect()
    }

    /// Source iteration for the moments of a given `Θ`.
    pub fn solve(
        &self,
        theta: &[C64],
        m1: f64,
        m2: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<PerturbedMoments> {
        if m2 != 0.0 {
            let (k, c, s) = aligned(m1, m2);
            let mut r = self.solve(theta, k, 0.0, tol, max_iter)?;
            let (p, q) = rotate(&r.p, &r.q, c, s);
            r.p = p;
            r.q = q;
            return Ok(r);
        }
        let n = self.geometry.len();
        if theta.len() != n {
            return Err(Error::validation(
                "theta",
                format!("expected {n} samples, got {}", theta.len()),
            ));
        }
        if !(tol > 0.0) {
            return Err(Error::validation("tol", "must be > 0"));
        }
        let tables = self.grouped_tables(m1, m2);
        let zero = vec![C64::new(0.0, 0.0); n];
        let (mut g1, mut s) = (zero.clone(), zero.clone());
        let mut history = Vec::new();
        for it in 1..=max_iter {
            let (mut ng, mut np, mut nq, mut ns) =
                (zero.clone(), zero.clone(), zero.clone(), zero.clone());
            for (i, group) in tables.iter().enumerate() {
                let eta = self.dirs.mu_nodes[i];
                let src = self.source(i, theta, &g1, &s);
                for (table, w) in group {
                    let psi = table.apply(&src, C64::new(0.0, 0.0));
                    for j in 0..n {
                        ng[j] += psi[j] * w[0];
                        np[j] += psi[j] * w[1];
                        nq[j] += psi[j] * w[2];
                        ns[j] += psi[j] * (w[0] * eta);
                    }
                }
            }
            let diff = (0..n)
                .map(|j| (ng[j] - g1[j]).norm().max((ns[j] - s[j]).norm()))
                .fold(0.0, f64::max);
            history.push(diff);
            g1 = ng;
            s = ns;
            if diff < tol || self.alpha == 0.0 {
                return Ok(PerturbedMoments {
                    g1,
                    p: np,
                    q: nq,
                    s,
                    converged: true,
                    iterations: it,
                });
            }
            if !diff.is_finite() {
                break;
            }
        }
        Err(Error::IterationFailure {
            iterations: history.len(),
            residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    /// Dense moment maps for wavenumber components `(m₁, m₂)`.
    pub fn operator(&self, m1: f64, m2: f64) -> Result<MomentOperator> {
        if m2 != 0.0 {
            let (k, c, s) = aligned(m1, m2);
            let mut op = self.operator(k, 0.0)?;
            let p = &op.p * C64::new(c, 0.0) - &op.q * C64::new(s, 0.0);
            let q = &op.p * C64::new(s, 0.0) + &op.q * C64::new(c, 0.0);
            op.p = p;
            op.q = q;
            return Ok(op);
        }
        let n = self.geometry.len();
        let z = || DMatrix::<C64>::zeros(n, n);
        // Angular sums of the propagators, weighted by 1, η, η², ζ, ζη, ν, νη.
        let (mut a0, mut a1, mut a2) = (z(), z(), z());
        let (mut cz0, mut cz1, mut cn0, mut cn1) = (z(), z(), z(), z());
        // Same sums with the Θ-coefficient β(η) folded in on the right.
        let (mut f0, mut f1, mut fz, mut fn_) = (z(), z(), z(), z());
        let tables = self.grouped_tables(m1, m2);
        for (i, group) in tables.iter().enumerate() {
            let eta = self.dirs.mu_nodes[i];
            let (mut k0, mut kz, mut kn) = (z(), z(), z());
            for (table, w) in group {
                let mut targets = [(&mut k0, w[0]), (&mut kz, w[1]), (&mut kn, w[2])];
                table.accumulate(&mut targets);
            }
            a0 += &k0;
            a1 += &k0 * C64::new(eta, 0.0);
            a2 += &k0 * C64::new(eta * eta, 0.0);
            cz0 += &kz;
            cz1 += &kz * C64::new(eta, 0.0);
            cn0 += &kn;
            cn1 += &kn * C64::new(eta, 0.0);
            let beta = &self.beta[i];
            for (mat, k, scale) in [
                (&mut f0, &k0, 1.0),
                (&mut f1, &k0, eta),
                (&mut fz, &kz, 1.0),
                (&mut fn_, &kn, 1.0),
            ] {
                for c in 0..n {
                    let b = beta[c] * scale;
                    for r in 0..n {
                        mat[(r, c)] += k[(r, c)] * b;
                    }
                }
            }
        }
        // Couple 𝒢 and S: (I − K)[𝒢; S] = [F₀; F₁] Θ.
        let al = self.alpha;
        let an = self.aniso;
        let scale_cols = |m: &DMatrix<C64>, f: f64| {
            let mut out = m.clone();
            for c in 0..n {
                let v = f * self.n_s[c];
                for r in 0..n {
                    out[(r, c)] *= v;
                }
            }
            out
        };
        let mut big = DMatrix::<C64>::identity(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).sub_assign_from(&scale_cols(&a0, al));
        big.view_mut((0, n), (n, n)).sub_assign_from(&scale_cols(&a1, al * an));
        big.view_mut((n, 0), (n, n)).sub_assign_from(&scale_cols(&a1, al));
        big.view_mut((n, n), (n, n)).sub_assign_from(&scale_cols(&a2, al * an));
        let mut rhs = DMatrix::<C64>::zeros(2 * n, n);
        rhs.view_mut((0, 0), (n, n)).copy_from(&f0);
        rhs.view_mut((n, 0), (n, n)).copy_from(&f1);
        let sol = big
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Assembly("moment system is singular".into()))?;
        let g = sol.view((0, 0), (n, n)).clone_owned();
        let s = sol.view((n, 0), (n, n)).clone_owned();
        let p = scale_cols(&cz0, al) * &g + scale_cols(&cz1, al * an) * &s + fz;
        let q = scale_cols(&cn0, al) * &g + scale_cols(&cn1, al * an) * &s + fn_;
        Ok(MomentOperator { g, p, q, s })
    }
}

/// The azimuth grid is laid out relative to the wavevector, so a general
/// `(m₁, m₂)` is computed along `(|m|, 0)` and the horizontal moments rotated
/// back. Returns `(|m|, cos α, sin α)`.
fn aligned(m1: f64, m2: f64) -> (f64, f64, f64) {
    let k = m1.hypot(m2);
    (k, m1 / k, m2 / k)
}

fn rotate(p: &[C64], q: &[C64], c: f64, s: f64) -> (Vec<C64>, Vec<C64>) {
    p.iter()
        .zip(q)
        .map(|(p, q)| (p * c - q * s, p * s + q * c))
        .unzip()
}

trait SubAssignFrom {
    fn sub_assign_from(&mut self, m: &DMatrix<C64>);
}

impl SubAssignFrom for nalgebra::DMatrixViewMut<'_, C64> {
    fn sub_assign_from(&mut self, m: &DMatrix<C64>) {
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                self[(r, c)] -= m[(r, c)];
            }
        }
    }
}

/// Moments of the perturbed intensity for a given `Θ` by source iteration.
pub fn solve_perturbed_intensity(
    theta: &[C64],
    state: &BasicState,
    diffuse_flux: f64,
    m1: f64,
    m2: f64,
    dirs: &DirectionSet,
    tol: f64,
) -> Result<PerturbedMoments> {
    PerturbedContext::new(state, dirs, diffuse_flux)?.solve(theta, m1, m2, tol, 200)
}

/// Dense moment maps for one basic state and wavenumber pair.
pub fn moment_operator(
    state: &BasicState,
    diffuse_flux: f64,
    m1: f64,
    m2: f64,
    dirs: &DirectionSet,
) -> Result<MomentOperator> {
    PerturbedContext::new(state, dirs, diffuse_flux)?.operator(m1, m2)
}
