//! Phototactic response `M(G)`: the mean swimming direction as a function of
//! the local total intensity.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Ratio `G_max / G_c` of the default shape: the intensity of strongest
/// negative phototaxis relative to the critical intensity.
pub const DEFAULT_PEAK_RATIO: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaxisShape {
    /// `M = 0.8 sin(3πχ/2) − 0.1 sin(πχ/2)` with
    /// `χ = (G/G_max) exp(β(G_max − G))`, β chosen so that `M(G_c) = 0`.
    SineComposite { peak_ratio: f64 },
    /// `M = −amplitude · tanh((G − G_c)/width)`.
    Tanh { width: f64, amplitude: f64 },
    /// Constant response, for degenerate checks. Its zero is not at `G_c`.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxisFunction {
    shape: TaxisShape,
    g_c: f64,
    // Derived constants of the sine-composite shape.
    g_max: f64,
    beta: f64,
}

/// `χ` at which `0.8 sin(3πχ/2) = 0.1 sin(πχ/2)` on `(0, 1)`.
fn sine_composite_root() -> f64 {
    (2.0 / PI) * (2.3f64 / 3.2).sqrt().asin()
}

impl TaxisFunction {
    pub fn new(shape: TaxisShape, g_c: f64) -> Result<Self> {
        if !(g_c > 0.0) || !g_c.is_finite() {
            return Err(Error::validation("g_c", format!("must be > 0, got {g_c}")));
        }
        let (mut g_max, mut beta) = (0.0, 0.0);
        match shape {
            TaxisShape::SineComposite { peak_ratio } => {
                if !(peak_ratio > 1.0) {
                    return Err(Error::validation("peak_ratio", "must be > 1"));
                }
                g_max = peak_ratio * g_c;
                beta = (sine_composite_root() * peak_ratio).ln() / (g_max - g_c);
            }
            TaxisShape::Tanh { width, amplitude } => {
                if !(width > 0.0) {
                    return Err(Error::validation("width", "must be > 0"));
                }
                if !(amplitude > 0.0 && amplitude <= 1.0) {
                    return Err(Error::validation("amplitude", "must lie in (0, 1]"));
                }
            }
            TaxisShape::Constant(m) => {
                if !(-1.0..=1.0).contains(&m) {
                    return Err(Error::validation("constant taxis", "must lie in [-1, 1]"));
                }
            }
        }
        Ok(TaxisFunction {
            shape,
            g_c,
            g_max,
            beta,
        })
    }

    pub fn shape(&self) -> TaxisShape {
        self.shape
    }

    pub fn critical_intensity(&self) -> f64 {
        self.g_c
    }

    fn chi(&self, g: f64) -> (f64, f64) {
        let e = (self.beta * (self.g_max - g)).exp() / self.g_max;
        (g * e, e * (1.0 - self.beta * g))
    }

    pub fn value(&self, g: f64) -> f64 {
        match self.shape {
            TaxisShape::SineComposite { .. } => {
                let (chi, _) = self.chi(g);
                0.8 * (1.5 * PI * chi).sin() - 0.1 * (0.5 * PI * chi).sin()
            }
            TaxisShape::Tanh { width, amplitude } => -amplitude * ((g - self.g_c) / width).tanh(),
            TaxisShape::Constant(m) => m,
        }
    }

    pub fn derivative(&self, g: f64) -> f64 {
        match self.shape {
            TaxisShape::SineComposite { .. } => {
                let (chi, dchi) = self.chi(g);
                let dm = 0.8 * 1.5 * PI * (1.5 * PI * chi).cos()
                    - 0.1 * 0.5 * PI * (0.5 * PI * chi).cos();
                dm * dchi
            }
            TaxisShape::Tanh { width, amplitude } => {
                let c = ((g - self.g_c) / width).cosh();
                -amplitude / (width * c * c)
            }
            TaxisShape::Constant(_) => 0.0,
        }
    }

    /// Short identifier recorded alongside results.
    pub fn id(&self) -> String {
        match self.shape {
            TaxisShape::SineComposite { peak_ratio } => {
                format!("sine_composite(g_c={},peak_ratio={})", self.g_c, peak_ratio)
            }
            TaxisShape::Tanh { width, amplitude } => {
                format!("tanh(g_c={},width={},amplitude={})", self.g_c, width, amplitude)
            }
            TaxisShape::Constant(m) => format!("constant({m})"),
        }
    }
}

/// The shipped response with its zero at `g_c`.
pub fn default_taxis(g_c: f64) -> Result<TaxisFunction> {
    TaxisFunction::new(
        TaxisShape::SineComposite {
            peak_ratio: DEFAULT_PEAK_RATIO,
        },
        g_c,
    )
}
