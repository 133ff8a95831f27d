//! Exponential integrals `E_n(x) = ∫₁^∞ e^{-xt} t^{-n} dt` and the closed-form
//! slab integrals of the `E_n` kernels.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_TERMS: usize = 200;

// Beyond this e^{-x} underflows.
const UNDERFLOW_X: f64 = 745.0;

fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= -x / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Continued fraction for `E_n(x)`, modified Lentz. Valid for `x >= 1`.
fn en_cfrac(n: u32, x: f64) -> f64 {
    let nm1 = n as f64 - 1.0;
    let mut b = x + n as f64;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let a = -(i as f64) * (nm1 + i as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h * (-x).exp()
}

/// Upward recurrence `n E_{n+1} = e^{-x} - x E_n`, stable for small `x`.
fn en_upward(n: u32, x: f64) -> f64 {
    let ex = (-x).exp();
    let mut e = e1_series(x);
    for k in 1..n {
        e = (ex - x * e) / k as f64;
    }
    e
}

/// Exponential integral of integer order `n >= 1`.
pub fn expint(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("expint order must be >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("expint argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        if n == 1 {
            return Err(Error::Domain("E_1 is singular at x = 0".into()));
        }
        return Ok(1.0 / (n as f64 - 1.0));
    }
    if x > UNDERFLOW_X {
        return Ok(0.0);
    }
    if x < 1.0 {
        Ok(en_upward(n, x))
    } else {
        Ok(en_cfrac(n, x))
    }
}

/// `[E_1(x), E_2(x), E_3(x)]` for `x > 0`, used in kernel evaluation where
/// the argument is known to be valid.
#[inline]
pub fn expint_123(x: f64) -> [f64; 3] {
    debug_assert!(x > 0.0);
    if x > UNDERFLOW_X {
        return [0.0; 3];
    }
    if x < 1.0 {
        let ex = (-x).exp();
        let e1 = e1_series(x);
        let e2 = ex - x * e1;
        let e3 = 0.5 * (ex - x * e2);
        [e1, e2, e3]
    } else {
        [en_cfrac(1, x), en_cfrac(2, x), en_cfrac(3, x)]
    }
}

/// `E_n(x)` for `n >= 2` including `x = 0`; panics are impossible for valid orders.
#[inline]
pub(crate) fn en(n: u32, x: f64) -> f64 {
    debug_assert!(n >= 2);
    expint(n, x.max(0.0)).unwrap_or(0.0)
}

fn check_slab(tau: f64, tau_h: f64) -> Result<()> {
    if !(tau_h >= 0.0) || !tau_h.is_finite() {
        return Err(Error::Domain(format!("slab thickness must be >= 0, got {tau_h}")));
    }
    let slack = 1e-12 * tau_h.max(1.0);
    if !(tau >= -slack && tau <= tau_h + slack) {
        return Err(Error::Domain(format!(
            "optical depth {tau} outside [0, {tau_h}]"
        )));
    }
    Ok(())
}

/// `∫₀^{τ_H} E₁(|τ−τ'|) dτ' = 2 − E₂(τ) − E₂(τ_H−τ)`.
pub fn kernel_primitive_e1(tau: f64, tau_h: f64) -> Result<f64> {
    check_slab(tau, tau_h)?;
    let tau = tau.clamp(0.0, tau_h);
    Ok(2.0 - en(2, tau) - en(2, tau_h - tau))
}

/// `∫₀^{τ_H} E₂(|τ−τ'|) sgn(τ−τ') dτ' = E₃(τ_H−τ) − E₃(τ)`.
pub fn kernel_primitive_e2_signed(tau: f64, tau_h: f64) -> Result<f64> {
    check_slab(tau, tau_h)?;
    let tau = tau.clamp(0.0, tau_h);
    Ok(en(3, tau_h - tau) - en(3, tau))
}

/// `∫₀^{τ_H} E₃(|τ−τ'|) dτ' = 2/3 − E₄(τ) − E₄(τ_H−τ)`.
pub fn kernel_primitive_e3(tau: f64, tau_h: f64) -> Result<f64> {
    check_slab(tau, tau_h)?;
    let tau = tau.clamp(0.0, tau_h);
    Ok(2.0 / 3.0 - en(4, tau) - en(4, tau_h - tau))
}
