//! Steady cell-concentration profile `n_s(z)` and the coefficient profiles
//! derived from it.
//!
//! The profile obeys `dn_s/dz = V_c M(G_s(τ)) n_s` with `dτ/dz = −τ_H n_s`,
//! `τ(1) = 0`, and unit mean concentration. It is found by shooting on
//! `n_s(1)`: each trial integrates downward from the top, and the mean
//! concentration equals `τ(0)/τ_H`.

use crate::chebyshev::ChebGrid;
use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};
use crate::params::ProblemParams;
use crate::radiative::RadiativeField;
use crate::taxis::TaxisFunction;

const BRACKET: (f64, f64) = (1e-4, 1e3);
const BRACKET_LIMIT: (f64, f64) = (1e-200, 1e200);
const MAX_NEWTON: usize = 60;
const MAX_BISECT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BasicState {
    /// Chebyshev–Lobatto nodes on `[0, 1]`, ascending.
    pub z_grid: Vec<f64>,
    pub n_s: Vec<f64>,
    pub tau_of_z: Vec<f64>,
    pub g_s_of_z: Vec<f64>,
    pub q_s_of_z: Vec<f64>,
    /// `dG_s/dz`, evaluated by the chain rule.
    pub dg_dz: Vec<f64>,
    pub m_s: Vec<f64>,
    pub dm_dg: Vec<f64>,
    pub dn_s_dz: Vec<f64>,
    pub upsilon1: Vec<f64>,
    pub upsilon2: Vec<f64>,
    /// Shooting solution `n_s(1)`.
    pub top_concentration: f64,
    /// `|∫n_s dz − 1|` at the accepted shot.
    pub mass_error: f64,
    pub params_hash: u64,
    pub swim_speed: f64,
    pub extinction: f64,
    pub albedo: f64,
    pub aniso_coeff: f64,
    pub taxis_id: String,
}

#[derive(Debug, Clone, Copy)]
pub struct BasicStateOptions {
    /// Number of Chebyshev nodes (polynomial degree plus one).
    pub n_z: usize,
    pub tol: f64,
    pub ode: OdeOptions,
}

impl Default for BasicStateOptions {
    fn default() -> Self {
        BasicStateOptions {
            n_z: 65,
            tol: 1e-10,
            ode: OdeOptions::default(),
        }
    }
}

struct Shooter<'a> {
    field: &'a RadiativeField,
    taxis: &'a TaxisFunction,
    vc: f64,
    tau_h: f64,
    z_desc: Vec<f64>,
    ode: OdeOptions,
}

impl Shooter<'_> {
    /// Integrates from the top with `n_s(1) = c`, returning `(n, τ)` at the
    /// nodes in descending `z`.
    fn shoot(&self, c: f64) -> Result<Vec<[f64; 2]>> {
        let (vc, tau_h) = (self.vc, self.tau_h);
        let field = self.field;
        let taxis = self.taxis;
        let mut rhs = |_z: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
            let n = y[0];
            if !(n > 1e-300 && n < 1e300) {
                return Err(Error::Shooting(format!(
                    "concentration left the positive range (n = {n:e}) for n_s(1) = {c:e}"
                )));
            }
            let tau = y[1].clamp(0.0, tau_h);
            let (g, _) = field.interpolate(tau)?;
            Ok([vc * taxis.value(g) * n, -tau_h * n])
        };
        let mut out = Vec::with_capacity(self.z_desc.len());
        let mut y = [c, 0.0];
        out.push(y);
        for w in self.z_desc.windows(2) {
            let h0 = 0.1 * (w[0] - w[1]);
            y = dopri5(&mut rhs, w[0], y, w[1], h0, &self.ode).map_err(|e| match e {
                Error::Shooting(_) => e,
                other => Error::Shooting(format!("integration failed for n_s(1) = {c:e}: {other}")),
            })?;
            out.push(y);
        }
        Ok(out)
    }

    fn residual(&self, c: f64) -> Result<(f64, Vec<[f64; 2]>)> {
        let path = self.shoot(c)?;
        let tau0 = path.last().map(|y| y[1]).unwrap_or(0.0);
        Ok((tau0 / self.tau_h - 1.0, path))
    }
}

/// Solves for the steady concentration and fills the coefficient profiles.
pub fn solve_basic_state(
    params: &ProblemParams,
    field: &RadiativeField,
    taxis: &TaxisFunction,
    opts: &BasicStateOptions,
) -> Result<BasicState> {
    params.validate()?;
    if field.params_hash != params.radiative_hash() {
        return Err(Error::Consistency(
            "radiative field was solved for different (omega, A, B, tau_H)".into(),
        ));
    }
    if opts.n_z < 65 {
        return Err(Error::validation("n_z", format!("must be >= 65, got {}", opts.n_z)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::validation("tol", "must be > 0"));
    }
    let grid = ChebGrid::new(opts.n_z - 1);
    let shooter = Shooter {
        field,
        taxis,
        vc: params.swim_speed,
        tau_h: params.extinction,
        z_desc: grid.z.iter().rev().copied().collect(),
        ode: opts.ode,
    };

    let (c, f, path) = newton_then_bisect(&shooter, opts.tol)?;

    let m = grid.len();
    let mut n_s = vec![0.0; m];
    let mut tau = vec![0.0; m];
    for (k, y) in path.iter().enumerate() {
        n_s[m - 1 - k] = y[0];
        tau[m - 1 - k] = y[1];
    }
    let mut state = BasicState {
        z_grid: grid.z.clone(),
        n_s,
        tau_of_z: tau,
        g_s_of_z: vec![],
        q_s_of_z: vec![],
        dg_dz: vec![],
        m_s: vec![],
        dm_dg: vec![],
        dn_s_dz: vec![],
        upsilon1: vec![],
        upsilon2: vec![],
        top_concentration: c,
        mass_error: f.abs(),
        params_hash: field.params_hash,
        swim_speed: params.swim_speed,
        extinction: params.extinction,
        albedo: params.albedo,
        aniso_coeff: params.aniso_coeff,
        taxis_id: taxis.id(),
    };
    derive_coefficients(&mut state, field, taxis)?;
    Ok(state)
}

fn newton_then_bisect(s: &Shooter, tol: f64) -> Result<(f64, f64, Vec<[f64; 2]>)> {
    // Newton in u = ln n_s(1), which keeps trials positive.
    let mut u = 0.0f64;
    let mut history = Vec::new();
    for _ in 0..MAX_NEWTON {
        let c = u.exp();
        let Ok((f, path)) = s.residual(c) else { break };
        history.push((c, f));
        if f.abs() < tol {
            return Ok((c, f, path));
        }
        let h = 1e-7;
        let Ok((fh, _)) = s.residual((u + h).exp()) else { break };
        let slope = (fh - f) / h;
        if !(slope.is_finite() && slope > 0.0) {
            break;
        }
        // F grows like e^u for large u; limit the step.
        u -= (f / slope).clamp(-5.0, 5.0);
    }
    log::debug!("shooting: Newton did not settle, bisecting ({} trials)", history.len());

    // F(c) = τ(0)/τ_H − 1 increases with c; bisection on a log scale over a
    // bracket widened by decades until it straddles the root.
    let (mut lo, mut hi) = BRACKET;
    let mut flo = s.residual(lo).map(|r| r.0);
    while matches!(flo, Ok(f) if f > 0.0) && lo > BRACKET_LIMIT.0 {
        lo *= 1e-2;
        flo = s.residual(lo).map(|r| r.0);
    }
    let mut fhi = s.residual(hi).map(|r| r.0);
    while matches!(fhi, Ok(f) if f < 0.0) && hi < BRACKET_LIMIT.1 {
        hi *= 1e2;
        fhi = s.residual(hi).map(|r| r.0);
    }
    match (&flo, &fhi) {
        (Ok(a), Ok(b)) if *a < 0.0 && *b > 0.0 => {}
        _ => {
            return Err(Error::Shooting(format!(
                "no sign change of the mass residual on n_s(1) in [{lo:e}, {hi:e}] \
                 (F = {flo:?}, {fhi:?}); Newton trials {history:?}"
            )))
        }
    }
    for _ in 0..MAX_BISECT {
        let mid = (lo * hi).sqrt();
        let (f, path) = s.residual(mid)?;
        if f.abs() < tol {
            return Ok((mid, f, path));
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Shooting(format!(
        "bisection stalled on [{lo:e}, {hi:e}]"
    )))
}

/// Fills the radiative and taxis profiles of a solved state.
pub fn derive_coefficients(
    state: &mut BasicState,
    field: &RadiativeField,
    taxis: &TaxisFunction,
) -> Result<()> {
    if field.params_hash != state.params_hash {
        return Err(Error::Consistency(
            "radiative field does not match the basic state".into(),
        ));
    }
    let m = state.z_grid.len();
    let vc = state.swim_speed;
    let tau_h = state.extinction;
    state.g_s_of_z = Vec::with_capacity(m);
    state.q_s_of_z = Vec::with_capacity(m);
    state.dg_dz = Vec::with_capacity(m);
    state.m_s = Vec::with_capacity(m);
    state.dm_dg = Vec::with_capacity(m);
    state.dn_s_dz = Vec::with_capacity(m);
    state.upsilon1 = Vec::with_capacity(m);
    state.upsilon2 = Vec::with_capacity(m);
    for j in 0..m {
        let tau = state.tau_of_z[j].clamp(0.0, tau_h);
        let (g, q) = field.interpolate(tau)?;
        let dg_dz = field.g_derivative(tau)? * (-tau_h * state.n_s[j]);
        let ms = taxis.value(g);
        let dm = taxis.derivative(g);
        state.g_s_of_z.push(g);
        state.q_s_of_z.push(q);
        state.dg_dz.push(dg_dz);
        state.m_s.push(ms);
        state.dm_dg.push(dm);
        state.dn_s_dz.push(vc * ms * state.n_s[j]);
        state.upsilon1.push(vc * dm * dg_dz);
        state.upsilon2.push(vc * ms);
    }
    state.taxis_id = taxis.id();
    Ok(())
}

impl BasicState {
    /// Index of the largest concentration.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for j in 1..self.n_s.len() {
            if self.n_s[j] > self.n_s[best] {
                best = j;
            }
        }
        best
    }

    /// Height of the concentration maximum, refined by a parabola through the
    /// neighbouring nodes.
    pub fn peak_height(&self) -> f64 {
        let j = self.argmax();
        if j == 0 || j + 1 == self.n_s.len() {
            return self.z_grid[j];
        }
        let (z0, z1, z2) = (self.z_grid[j - 1], self.z_grid[j], self.z_grid[j + 1]);
        let (f0, f1, f2) = (self.n_s[j - 1], self.n_s[j], self.n_s[j + 1]);
        let num = (z1 - z0).powi(2) * (f1 - f2) - (z1 - z2).powi(2) * (f1 - f0);
        let den = (z1 - z0) * (f1 - f2) - (z1 - z2) * (f1 - f0);
        if den == 0.0 {
            z1
        } else {
            (z1 - 0.5 * num / den).clamp(z0, z2)
        }
    }
}
