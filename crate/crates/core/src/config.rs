//! Flat `key = value` case description.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{ProblemParams, TopBoundary};

pub const PHYSICAL_KEYS: [&str; 8] = [
    "schmidt",
    "vc",
    "tau_h",
    "omega",
    "a_coeff",
    "b_flux",
    "g_c",
    "top_boundary",
];

pub const NUMERIC_KEYS: [&str; 8] = [
    "n_z",
    "n_mu",
    "n_phi",
    "tol_fredholm",
    "tol_eigen",
    "k_min",
    "k_max",
    "k_step",
];

const REQUIRED: [&str; 5] = ["vc", "tau_h", "omega", "a_coeff", "b_flux"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Chebyshev polynomial degree in z; the grid has `n_z + 1` points.
    pub n_z: usize,
    /// Gauss–Legendre nodes per hemisphere of the vertical direction cosine.
    pub n_mu: usize,
    pub n_phi: usize,
    pub n_tau: usize,
    pub tol_fredholm: f64,
    pub tol_eigen: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_z: 64,
            n_mu: 24,
            n_phi: 24,
            n_tau: 201,
            tol_fredholm: 1e-9,
            tol_eigen: 1e-8,
            k_min: 0.5,
            k_max: 6.0,
            k_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CaseConfig {
    pub params: ProblemParams,
    pub numerics: Numerics,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse {v:?} as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse {v:?} as a count")))
}

impl CaseConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CaseConfig::default();
        let mut unknown = Vec::new();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            if !PHYSICAL_KEYS.contains(&k) && !NUMERIC_KEYS.contains(&k) {
                unknown.push(k.to_string());
                continue;
            }
            if seen.iter().any(|s: &String| s == k) {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
            seen.push(k.to_string());
            cfg.set(k, v)?;
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let missing: Vec<_> = REQUIRED
            .iter()
            .filter(|r| !seen.iter().any(|s| s == *r))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing keys: {}", missing.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one key. Used for the file parser and for sweep tuples.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        let n = &mut self.numerics;
        match key {
            "schmidt" => p.schmidt = parse_f64(key, v)?,
            "vc" => p.swim_speed = parse_f64(key, v)?,
            "tau_h" => p.extinction = parse_f64(key, v)?,
            "omega" => p.albedo = parse_f64(key, v)?,
            "a_coeff" => p.aniso_coeff = parse_f64(key, v)?,
            "b_flux" => p.diffuse_flux = parse_f64(key, v)?,
            "g_c" => p.critical_intensity = parse_f64(key, v)?,
            "top_boundary" => p.top_boundary = v.parse::<TopBoundary>()?,
            "n_z" => n.n_z = parse_usize(key, v)?,
            "n_mu" => n.n_mu = parse_usize(key, v)?,
            "n_phi" => n.n_phi = parse_usize(key, v)?,
            "tol_fredholm" => n.tol_fredholm = parse_f64(key, v)?,
            "tol_eigen" => n.tol_eigen = parse_f64(key, v)?,
            "k_min" => n.k_min = parse_f64(key, v)?,
            "k_max" => n.k_max = parse_f64(key, v)?,
            "k_step" => n.k_step = parse_f64(key, v)?,
            other => return Err(Error::Config(format!("unknown keys: {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let n = &self.numerics;
        if n.n_z < 64 {
            return Err(Error::Config("`n_z` must be >= 64".into()));
        }
        if n.n_mu < 2 {
            return Err(Error::Config("`n_mu` must be >= 2".into()));
        }
        if n.n_phi < 4 || n.n_phi % 2 != 0 {
            return Err(Error::Config("`n_phi` must be even and >= 4".into()));
        }
        for (k, v) in [("tol_fredholm", n.tol_fredholm), ("tol_eigen", n.tol_eigen)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("`{k}` must be > 0")));
            }
        }
        if !(n.k_min > 0.0 && n.k_max > n.k_min && n.k_step > 0.0) {
            return Err(Error::Config(
                "k range needs 0 < k_min < k_max and k_step > 0".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text form with every key, in fixed order.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let n = &self.numerics;
        let mut s = String::new();
        let rows: [(&str, String); 16] = [
            ("schmidt", format!("{:?}", p.schmidt)),
            ("vc", format!("{:?}", p.swim_speed)),
            ("tau_h", format!("{:?}", p.extinction)),
            ("omega", format!("{:?}", p.albedo)),
            ("a_coeff", format!("{:?}", p.aniso_coeff)),
            ("b_flux", format!("{:?}", p.diffuse_flux)),
            ("g_c", format!("{:?}", p.critical_intensity)),
            ("top_boundary", p.top_boundary.to_string()),
            ("n_z", n.n_z.to_string()),
            ("n_mu", n.n_mu.to_string()),
            ("n_phi", n.n_phi.to_string()),
            ("tol_fredholm", format!("{:?}", n.tol_fredholm)),
            ("tol_eigen", format!("{:?}", n.tol_eigen)),
            ("k_min", format!("{:?}", n.k_min)),
            ("k_max", format!("{:?}", n.k_max)),
            ("k_step", format!("{:?}", n.k_step)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
