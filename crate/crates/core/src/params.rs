//! Nondimensional problem parameters and the dimensional-to-nondimensional
//! conversion.

use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Gravitational acceleration in m/s².
pub const GRAVITY: f64 = 9.81;

/// Mechanical condition imposed at the top of the layer. The bottom is
/// always rigid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TopBoundary {
    #[default]
    StressFree,
    Rigid,
}

impl TopBoundary {
    pub fn as_str(self) -> &'static str {
        match self {
            TopBoundary::StressFree => "stress_free",
            TopBoundary::Rigid => "rigid",
        }
    }
}

impl fmt::Display for TopBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopBoundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stress_free" => Ok(TopBoundary::StressFree),
            "rigid" => Ok(TopBoundary::Rigid),
            other => Err(Error::validation(
                "top_boundary",
                format!("expected \"stress_free\" or \"rigid\", got {other:?}"),
            )),
        }
    }
}

/// All nondimensional governing numbers for one case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    /// Schmidt number `S_c = ν/D`.
    pub schmidt: f64,
    /// Scaled swimming speed `V_c = W_c H / D`.
    pub swim_speed: f64,
    /// Optical thickness `τ_H` of the uniform suspension.
    pub extinction: f64,
    /// Single-scattering albedo `ω`.
    pub albedo: f64,
    /// Linear anisotropy coefficient `A` of the phase function `1 + A cosθ cosθ'`.
    pub aniso_coeff: f64,
    /// Magnitude of the diffuse flux entering through the top.
    pub diffuse_flux: f64,
    /// Critical intensity `G_c` at which the phototactic response reverses.
    pub critical_intensity: f64,
    pub top_boundary: TopBoundary,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            schmidt: 20.0,
            swim_speed: 20.0,
            extinction: 0.5,
            albedo: 0.7,
            aniso_coeff: 0.0,
            diffuse_flux: 0.5,
            critical_intensity: 1.0,
            top_boundary: TopBoundary::StressFree,
        }
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {v}")))
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("schmidt", self.schmidt),
            ("swim_speed", self.swim_speed),
            ("extinction", self.extinction),
            ("albedo", self.albedo),
            ("aniso_coeff", self.aniso_coeff),
            ("diffuse_flux", self.diffuse_flux),
            ("critical_intensity", self.critical_intensity),
        ] {
            finite(name, v)?;
        }
        if self.schmidt <= 0.0 {
            return Err(Error::validation("schmidt", "must be > 0"));
        }
        if self.swim_speed <= 0.0 {
            return Err(Error::validation("swim_speed", "must be > 0"));
        }
        if self.extinction <= 0.0 {
            return Err(Error::validation("extinction", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::validation("albedo", "must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&self.aniso_coeff) {
            return Err(Error::validation("aniso_coeff", "must lie in [-1, 1]"));
        }
        if self.diffuse_flux < 0.0 {
            return Err(Error::validation("diffuse_flux", "must be >= 0"));
        }
        if self.critical_intensity <= 0.0 {
            return Err(Error::validation("critical_intensity", "must be > 0"));
        }
        Ok(())
    }

    /// Identifier of the inputs the steady radiative field depends on
    /// (ω, A, B, τ_H).
    pub fn radiative_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in [
            self.albedo,
            self.aniso_coeff,
            self.diffuse_flux,
            self.extinction,
        ] {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Dimensional description of a suspension, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalInputs {
    /// Layer depth `H` (m).
    pub depth: f64,
    /// Cell volume `v` (m³).
    pub cell_volume: f64,
    /// Relative density excess `Δρ/ρ` of a cell.
    pub density_offset: f64,
    /// Cell diffusivity `D` (m²/s).
    pub diffusivity: f64,
    /// Kinematic viscosity `ν` (m²/s).
    pub kinematic_viscosity: f64,
    /// Mean cell concentration `n̄` (1/m³).
    pub mean_concentration: f64,
    /// Mean cell swimming speed `W_c` (m/s). Zero is accepted (non-motile cells).
    pub cell_speed: f64,
    /// Extinction cross-section per cell `κ` (m²).
    pub extinction_per_cell: f64,
}

impl DimensionalInputs {
    /// Representative Chlamydomonas-like suspension in a 1 cm layer.
    pub fn chlamydomonas_reference() -> Self {
        DimensionalInputs {
            depth: 1.0e-2,
            cell_volume: 5.0e-16,
            density_offset: 5.0e-2,
            diffusivity: 5.0e-8,
            kinematic_viscosity: 1.0e-6,
            mean_concentration: 1.0e12,
            cell_speed: 1.0e-4,
            extinction_per_cell: 5.0e-11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strict = [
            ("depth", self.depth),
            ("cell_volume", self.cell_volume),
            ("density_offset", self.density_offset),
            ("diffusivity", self.diffusivity),
            ("kinematic_viscosity", self.kinematic_viscosity),
            ("mean_concentration", self.mean_concentration),
            ("extinction_per_cell", self.extinction_per_cell),
        ];
        for (name, v) in strict {
            finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::validation(name, format!("must be > 0, got {v}")));
            }
        }
        finite("cell_speed", self.cell_speed)?;
        if self.cell_speed < 0.0 {
            return Err(Error::validation(
                "cell_speed",
                format!("must be >= 0, got {}", self.cell_speed),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensional {
    pub schmidt: f64,
    pub swim_speed: f64,
    pub extinction: f64,
    pub rayleigh: f64,
}

pub fn nondimensionalize(inputs: &DimensionalInputs) -> Result<Nondimensional> {
    inputs.validate()?;
    let d = inputs;
    Ok(Nondimensional {
        schmidt: d.kinematic_viscosity / d.diffusivity,
        swim_speed: d.cell_speed * d.depth / d.diffusivity,
        extinction: d.extinction_per_cell * d.mean_concentration * d.depth,
        rayleigh: d.mean_concentration * d.cell_volume * GRAVITY * d.density_offset * d.depth.powi(3)
            / (d.kinematic_viscosity * d.diffusivity),
    })
}
