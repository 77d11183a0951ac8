use std::sync::Arc;

use crate::dynamics::{Trajectory, VectorField};
use crate::geometry::{sample_boundary, Region, SetFamily};

use super::{lip_estimate_with, DesingMap, LipOptions, VariationalError};

/// Slack on speed and desingularized-modulus bounds.
pub const SPEED_SLACK: f64 = 0.05;

/// Below this a modulus counts as zero.
const ZERO_LIP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedCheck {
    /// `None` for breakpoint steps.
    pub ratios: Vec<Option<f64>>,
    pub lips: Vec<Option<f64>>,
    pub max_ratio: f64,
    /// Steps that move while the estimated modulus vanishes.
    pub violations: Vec<usize>,
}

impl SpeedCheck {
    pub fn passes(&self, slack: f64) -> bool {
        self.violations.is_empty() && self.max_ratio <= 1.0 + slack
    }
}

fn ratio_check(
    traj: &Trajectory,
    scale: f64,
    lip_at: impl Fn(usize) -> Result<f64, VariationalError>,
) -> Result<SpeedCheck, VariationalError> {
    let mut out = SpeedCheck {
        ratios: Vec::with_capacity(traj.steps()),
        lips: Vec::with_capacity(traj.steps()),
        max_ratio: 0.0,
        violations: Vec::new(),
    };
    for k in 0..traj.steps() {
        if traj.is_breakpoint_step(k) {
            out.ratios.push(None);
            out.lips.push(None);
            continue;
        }
        let speed = scale * traj.step_speeds[k];
        let lip = lip_at(k)?;
        let ratio = if lip <= ZERO_LIP {
            if speed > ZERO_LIP {
                out.violations.push(k);
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            speed / lip
        };
        if ratio.is_finite() {
            out.max_ratio = out.max_ratio.max(ratio);
        }
        out.ratios.push(Some(ratio));
        out.lips.push(Some(lip));
    }
    Ok(out)
}

/// `step_speed_k / lip S(t_k | x_k)` over the non-breakpoint steps.
pub fn verify_speed_bound(traj: &Trajectory, family: &SetFamily, lip: &LipOptions) -> Result<SpeedCheck, VariationalError> {
    ratio_check(traj, 1.0, |k| {
        Ok(lip_estimate_with(family, traj.times[k], traj.step_origin(k), lip)?.as_f64())
    })
}

/// `alpha * step_speed_k / lip S(t_k | F(x_k))` for a trajectory whose
/// constraint acts on `F(x)`.
pub fn verify_monotone_bound(
    traj: &Trajectory,
    field: &VectorField,
    family: &SetFamily,
    lip: &LipOptions,
) -> Result<SpeedCheck, VariationalError> {
    let alpha = match (field.monotonicity_alpha, field.as_scaled_identity()) {
        (Some(a), _) => a,
        (None, Some((a, _))) if a > 0.0 => a,
        _ => {
            return Err(VariationalError::InvalidArgument(
                "field has no monotonicity constant".into(),
            ))
        }
    };
    ratio_check(traj, alpha, |k| {
        let fx = field.eval(traj.step_origin(k));
        Ok(lip_estimate_with(family, traj.times[k], &fx, lip)?.as_f64())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesingCheck {
    pub probes: Vec<f64>,
    /// Max modulus of `S ∘ Psi` over sampled boundary points, per probe.
    pub composed_lip: Vec<f64>,
    /// `composed * phi(Psi(s)) / raw` at the witness of each probe; the chain
    /// rule predicts 1.
    pub chain_ratios: Vec<f64>,
    pub max_lip: f64,
}

impl DesingCheck {
    pub fn passes(&self, slack: f64) -> bool {
        self.max_lip <= 1.0 + slack && self.chain_ratios.iter().all(|r| (r - 1.0).abs() <= slack)
    }
}

/// Modulus of the reparametrized family `s -> S(Psi(s))` at `samples`
/// boundary points per probe time.
pub fn verify_desingularized(
    family: &SetFamily,
    map: &DesingMap,
    region: &Region,
    probes: &[f64],
    samples: usize,
    lip: &LipOptions,
) -> Result<DesingCheck, VariationalError> {
    let composed = SetFamily::reparametrized(family.clone(), Arc::new(map.clone()))?;
    let (lo, hi) = map.s_domain();
    let mut out = DesingCheck {
        probes: probes.to_vec(),
        composed_lip: Vec::new(),
        chain_ratios: Vec::new(),
        max_lip: 0.0,
    };
    for &s in probes {
        let r = map.psi(s)?;
        if !(lo < s && s < hi) {
            return Err(VariationalError::OutsideMap { s, lo, hi });
        }
        let pts = sample_boundary(family, r, region, samples, lip.seed)?.points;
        if pts.is_empty() {
            return Err(VariationalError::EmptySlice { t: r });
        }
        let mut best = (0.0, 0);
        for (i, p) in pts.iter().enumerate() {
            let l = lip_estimate_with(&composed, s, p, lip)?.as_f64();
            if l > best.0 || i == 0 {
                best = (l, i);
            }
        }
        let raw = lip_estimate_with(family, r, &pts[best.1], lip)?.as_f64();
        let ratio = if raw > ZERO_LIP {
            best.0 * map.phi_at(r) / raw
        } else {
            1.0
        };
        out.max_lip = out.max_lip.max(best.0);
        out.composed_lip.push(best.0);
        out.chain_ratios.push(ratio);
    }
    Ok(out)
}
