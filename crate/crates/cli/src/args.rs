use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "biostab", version, about = "Onset of phototactic bioconvection under diffuse and collimated light")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Flat `key = value` case file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Overrides of the wavenumber scan in the config.
#[derive(Debug, Args, Clone, Default)]
pub struct KRange {
    #[arg(long)]
    pub k_min: Option<f64>,
    #[arg(long)]
    pub k_max: Option<f64>,
    #[arg(long)]
    pub k_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Radiative field and basic-state concentration profile.
    Steady {
        #[command(flatten)]
        common: Common,
    },
    /// Neutral curve R(k) with both branches where present.
    Neutral {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: KRange,
    },
    /// Critical point of a single case.
    Critical {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: KRange,
    },
    /// Critical points for every tuple of a sweep file.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: KRange,
        /// Header row of config keys followed by one tuple per line.
        #[arg(long)]
        sweep_file: PathBuf,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Neutral-mode snapshots and phase portrait.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: KRange,
        /// Wavenumber; the critical one when omitted.
        #[arg(long)]
        k: Option<f64>,
        /// Oscillation periods to cover; 0 writes a single snapshot.
        #[arg(long, default_value_t = 1)]
        periods: usize,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// Horizontal samples per wavelength.
        #[arg(long, default_value_t = 32)]
        x_samples: usize,
    },
}
