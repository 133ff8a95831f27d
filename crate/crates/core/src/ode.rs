//! Adaptive Dormand–Prince 5(4) integration for small autonomous-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-13,
            max_steps: 100_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction). `h0` is
/// the first trial step magnitude.
pub fn dopri5<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    h0: f64,
    opts: &OdeOptions,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut h = h0.abs().min(span.abs()).max(1e-14 * span.abs());
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y)?;
    for _ in 0..opts.max_steps {
        let remaining = (t1 - t).abs();
        if remaining <= 1e-15 * span.abs() {
            return Ok(y);
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                for (j, kj) in k.iter().enumerate().take(s) {
                    *v += hs * A[s][j] * kj[i];
                }
            }
            k[s] = f(t + C[s] * hs, &ys)?;
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += hs * d5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((hs * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::IterationFailure {
                iterations: 0,
                residual: f64::NAN,
                history: vec![],
            });
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y5;
            // First-same-as-last.
            k[0] = k[6];
            if last {
                return Ok(y);
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = hs.abs() * fac;
    }
    Err(Error::IterationFailure {
        iterations: opts.max_steps,
        residual: f64::NAN,
        history: vec![],
    })
}
