//! Linear stability of a phototactic algal suspension lit by diffuse flux.
//!
//! The pipeline runs from the steady radiative field, through the steady
//! concentration profile, to neutral curves of the linearized
//! Boussinesq–taxis–radiation system.

pub mod basic_state;
pub mod chebyshev;
pub mod config;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod params;
pub mod perturbed;
pub mod quadrature;
pub mod radiative;
pub mod special;
pub mod stability;
pub mod taxis;

pub use error::{Error, Result};
pub use params::{nondimensionalize, DimensionalInputs, Nondimensional, ProblemParams, TopBoundary};
pub use taxis::{default_taxis, TaxisFunction, TaxisShape};
