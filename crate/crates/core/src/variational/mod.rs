//! Estimators for the Lipschitz modulus of a set family, the talweg function,
//! desingularizing reparametrizations and the speed inequalities.
//!
//! The coderivative outer norm is never formed; it is read off the Lipschitz
//! modulus `lip S(t|x)`, estimated by one-sided Hausdorff excess quotients.
//! On families with convex slices or smooth boundaries the two agree; in
//! general the estimate is a lower bound.

mod checks;
mod desing;
mod pchip;
mod talweg;

pub use checks::{verify_desingularized, verify_monotone_bound, verify_speed_bound, DesingCheck, SpeedCheck, SPEED_SLACK};
pub use desing::{desingularize, DesingMap};
pub use pchip::Pchip;
pub use talweg::{geometric_grid, talweg_profile, talweg_profile_with, TalwegProfile};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::geometry::{sample_slice, GeometryError, Region, SetFamily};
use crate::projection::{project_with, ProjectionError, ProjectionOptions};
use crate::rng::StreamKey;

/// Ratios above this count as numerically infinite.
pub const LIP_CAP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("slice at t = {t} is empty inside the region")]
    EmptySlice { t: f64 },
    #[error("point is not in S({t})")]
    NotMember { t: f64 },
    #[error("every slice of the grid is empty")]
    AllEmpty,
    #[error("unremovable singularity at r = {r}")]
    UnremovableSingularity { r: f64 },
    #[error("s = {s} is outside the map domain [{lo}, {hi}]")]
    OutsideMap { s: f64, lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Sampled one-sided excess `sup_{x in S(t_from) ∩ U} dist(x, S(t_to))`.
pub fn excess(
    family: &SetFamily,
    t_from: f64,
    t_to: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<f64, VariationalError> {
    let key = StreamKey::new(seed, "variational.excess").with_f64(t_from).with_f64(t_to);
    excess_keyed(family, t_from, t_to, region, samples, key)?.ok_or(VariationalError::EmptySlice { t: t_from })
}

/// `None` when `S(t_from)` has no sampled point in the region.
fn excess_keyed(
    family: &SetFamily,
    t_from: f64,
    t_to: f64,
    region: &Region,
    samples: usize,
    key: StreamKey,
) -> Result<Option<f64>, VariationalError> {
    if samples == 0 {
        return Err(VariationalError::InvalidArgument("samples must be at least 1".into()));
    }
    if region.dim() != family.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: family.dim(),
            found: region.dim(),
        }
        .into());
    }
    let from = family.slice(t_from)?;
    let to = family.slice(t_to)?;
    if to.empty {
        return Err(VariationalError::EmptySlice { t: t_to });
    }
    let s = sample_slice(&from, region, samples, key);
    if s.interior.is_empty() {
        return Ok(None);
    }
    let opts = ProjectionOptions::default();
    let mut worst: f64 = 0.0;
    for p in s.boundary.iter().chain(&s.interior) {
        if to.contains(p) {
            continue;
        }
        let r = match project_with(family, t_to, p, &opts) {
            Ok(r) => r,
            Err(ProjectionError::EmptySet { .. }) => return Err(VariationalError::EmptySlice { t: t_to }),
            Err(e) => return Err(e.into()),
        };
        worst = worst.max(r.distance);
    }
    Ok(Some(worst))
}

#[derive(Clone, Debug)]
pub struct LipOptions {
    pub dt: f64,
    pub radius: f64,
    pub samples: usize,
    pub lip_cap: f64,
    pub seed: u64,
}

impl Default for LipOptions {
    fn default() -> Self {
        LipOptions {
            dt: 1e-4,
            radius: 0.05,
            samples: 16,
            lip_cap: LIP_CAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipEstimate {
    /// Largest sampled excess quotient; meaningless when `infinite`.
    pub value: f64,
    pub infinite: bool,
    pub t: f64,
    pub x: Vec<f64>,
    pub dt_used: f64,
    pub radius_used: f64,
    /// Some of `t ± dt` fell outside the domain or gave an empty slice.
    pub one_sided: bool,
}

impl LipEstimate {
    pub fn as_f64(&self) -> f64 {
        if self.infinite {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

/// Estimate of `lip S(t|x)` from excess quotients between `t` and each of
/// `t ± dt`, `t ± dt/2`, in both directions, over the ball of the given
/// radius around `x`. Times where `S` is undefined or empty are skipped and
/// mark the estimate one-sided.
pub fn lip_estimate(family: &SetFamily, t: f64, x: &[f64], dt: f64, radius: f64) -> Result<LipEstimate, VariationalError> {
    lip_estimate_with(
        family,
        t,
        x,
        &LipOptions {
            dt,
            radius,
            ..LipOptions::default()
        },
    )
}

pub fn lip_estimate_with(family: &SetFamily, t: f64, x: &[f64], opts: &LipOptions) -> Result<LipEstimate, VariationalError> {
    if !(opts.dt > 0.0 && opts.radius > 0.0) {
        return Err(VariationalError::InvalidArgument("dt and radius must be positive".into()));
    }
    let slice = family.slice(t)?;
    if !slice.contains(x) {
        // projections land inside up to rounding; anything farther is a caller error
        let r = project_with(family, t, x, &ProjectionOptions::default())?;
        if r.distance > 1e-8 * (1.0 + crate::linalg::norm(x)) {
            return Err(VariationalError::NotMember { t });
        }
    }
    let region = Region::new_ball(x.to_vec(), opts.radius)?;
    let key = StreamKey::new(opts.seed, "variational.lip").with_f64(t).with_point(x);
    let mut value: f64 = 0.0;
    let mut one_sided = false;
    for (i, tau) in [t - opts.dt, t + opts.dt, t - 0.5 * opts.dt, t + 0.5 * opts.dt].into_iter().enumerate() {
        if !family.in_domain(tau) {
            one_sided = true;
            continue;
        }
        // both orders of the pair (t, tau), as in the Aubin inclusion
        let back = match excess_keyed(family, t, tau, &region, opts.samples, key.with(2 * i as u64)) {
            Ok(e) => e,
            Err(VariationalError::EmptySlice { .. }) => {
                one_sided = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let fwd = excess_keyed(family, tau, t, &region, opts.samples, key.with(2 * i as u64 + 1))?;
        for e in [back, fwd].into_iter().flatten() {
            value = value.max(e / (tau - t).abs());
        }
    }
    if !family.in_domain(t - opts.dt) && !family.in_domain(t + opts.dt) {
        return Err(VariationalError::InvalidArgument(format!(
            "no admissible time within dt = {} of t = {t}",
            opts.dt
        )));
    }
    Ok(LipEstimate {
        value,
        infinite: value > opts.lip_cap,
        t,
        x: x.to_vec(),
        dt_used: opts.dt,
        radius_used: opts.radius,
        one_sided,
    })
}

/// `|H^{-1}|^+ = 1 / inf_{|x| = 1} dist(0, H(x))` for a positively
/// homogeneous map given through `dist0(x) = dist(0, H(x))`. The unit sphere
/// is `{-1, 1}` in one dimension and sampled otherwise.
pub fn inverse_outer_norm(dim: usize, dist0: impl Fn(&[f64]) -> f64, directions: usize, seed: u64) -> f64 {
    let inf = if dim == 1 {
        dist0(&[1.0]).min(dist0(&[-1.0]))
    } else {
        let mut rng = StreamKey::new(seed, "variational.outer_norm").rng();
        (0..directions.max(1))
            .map(|_| dist0(&crate::geometry::random_direction(dim, &mut rng)))
            .fold(f64::INFINITY, f64::min)
    };
    1.0 / inf
}
