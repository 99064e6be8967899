//! Generation and statistical detection of Pareto-coordinated responses under
//! a joint linear budget.
//!
//! - [`forward`] produces coordinated and non-coordinated probe/response data.
//! - [`afriat`] tests exact rationalizability and reconstructs utilities.
//! - [`detector`] runs the noise-calibrated coordination test.
//! - [`tracking`] hosts the Kalman/Riccati model behind the linear budget.

pub mod afriat;
pub mod cli;
pub mod detector;
pub mod error;
pub mod forward;
pub mod lp;
pub mod model;
pub mod rng;
pub mod tracking;

pub use error::{Error, Result};
pub use model::{
    validate_dataset, AffinePiece, BudgetSpec, NoiseModel, Probe, ProbeResponseDataset, Response,
    SimplexWeights, UtilityKind, Violation,
};
