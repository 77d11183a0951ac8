//! Time-varying semi-algebraic set families `S: R => R^n` and the
//! polynomials that define them.
//!
//! Every family is a finite intersection of closed inequalities whose
//! coefficients are piecewise polynomial in time, so each slice `S(t)` is
//! closed and the graph is semi-algebraic.

mod family;
mod polynomial;
mod region;
mod sampling;
mod time;

pub use family::{membership, Constraint, FamilyKind, MovingHalfspace, SetFamily, Slice, TimeWarp};
pub use polynomial::{poly_eval_grad, Monomial, Polynomial};
pub use region::{random_direction, Region};
pub use sampling::{sample_boundary, BoundarySample};
pub(crate) use sampling::sample_slice;
pub use time::{TimeCurve, TimeFn};

use thiserror::Error;

/// Distance below which a sampled point counts as lying on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("invalid time function: {0}")]
    InvalidTimeFn(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid set family: {0}")]
    InvalidFamily(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} is outside the family's domain")]
    OutOfDomain { t: f64 },
    #[error("non-finite value while evaluating the family")]
    NonFinite,
}
