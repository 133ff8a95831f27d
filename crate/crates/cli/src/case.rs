//! One parameter set taken from config to a ready stability solver.

use biostab_core::basic_state::{solve_basic_state, BasicState, BasicStateOptions};
use biostab_core::config::CaseConfig;
use biostab_core::perturbed::DirectionSet;
use biostab_core::radiative::{solve_fredholm, FredholmOptions, RadiativeField};
use biostab_core::stability::{CriticalPoint, NeutralCurve, StabilityOptions, StabilitySolver};
use biostab_core::{default_taxis, TaxisFunction};

use crate::Result;

pub struct Case {
    pub config: CaseConfig,
    pub taxis: TaxisFunction,
    pub field: RadiativeField,
    pub state: BasicState,
}

impl Case {
    pub fn prepare(config: &CaseConfig) -> Result<Case> {
        config.validate()?;
        let n = &config.numerics;
        let taxis = default_taxis(config.params.critical_intensity)?;
        let field = solve_fredholm(
            &config.params,
            &FredholmOptions {
                n_nodes: n.n_tau,
                tol: n.tol_fredholm,
                ..Default::default()
            },
        )?;
        let state = solve_basic_state(
            &config.params,
            &field,
            &taxis,
            &BasicStateOptions {
                n_z: n.n_z + 1,
                ..Default::default()
            },
        )?;
        Ok(Case {
            config: *config,
            taxis,
            field,
            state,
        })
    }

    pub fn solver(&self) -> Result<StabilitySolver> {
        let n = &self.config.numerics;
        let dirs = DirectionSet::new(n.n_mu, n.n_phi)?;
        let opts = StabilityOptions {
            tol_eigen: n.tol_eigen,
            ..Default::default()
        };
        Ok(StabilitySolver::new(&self.config.params, &self.state, &dirs, opts)?)
    }

    /// Traced neutral curve over the configured `k` range.
    pub fn neutral_curve(&self, solver: &StabilitySolver) -> Result<NeutralCurve> {
        let n = &self.config.numerics;
        Ok(solver.trace_neutral_curve(n.k_min, n.k_max, n.k_step)?)
    }

    pub fn critical(&self) -> Result<CriticalPoint> {
        let solver = self.solver()?;
        let curve = self.neutral_curve(&solver)?;
        Ok(solver.refine_critical(&curve, 1e-3)?)
    }
}
