//! Catching-up integration of the sweeping inclusion, breakpoint restarts,
//! discrete length studies and the state-dependent ODE example.

mod catch_up;
mod field;
mod trajectory;

pub use catch_up::{
    catch_up, catch_up_with, length_study, length_study_with, uniform_grid, validate_halving,
    CatchUpOptions, LengthStudy,
};
pub use field::{
    catch_up_monotone, ode_orbit, verify_state_dependent_inclusion, InclusionCheck, VectorField,
    DIVERGENCE_NORM,
};
pub(crate) use field::rk4_orbit;
pub use trajectory::{fmt as fmt_f64, Trajectory, TrajectoryStatus};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::projection::ProjectionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("declared monotonicity alpha = {alpha} violated (observed {observed})")]
    MonotonicityViolated { alpha: f64, observed: f64 },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
