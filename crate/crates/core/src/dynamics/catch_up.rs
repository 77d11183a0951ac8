use crate::geometry::{membership, SetFamily};
use crate::linalg;
use crate::projection::{project_with, ProjectionError, ProjectionOptions, ProjectionResult};

use super::{DynamicsError, Trajectory, TrajectoryStatus};

#[derive(Clone, Debug)]
pub struct CatchUpOptions {
    /// A step longer than `jump_factor * max(L_est, 1) * h` starts a new piece.
    pub jump_factor: f64,
    /// Number of recent regular steps in the running median behind `L_est`.
    pub median_window: usize,
    /// Extra multistarts for a retried non-converged projection.
    pub retry_starts: usize,
    pub projection: ProjectionOptions,
}

impl Default for CatchUpOptions {
    fn default() -> Self {
        CatchUpOptions {
            jump_factor: 20.0,
            median_window: 32,
            retry_starts: 4,
            projection: ProjectionOptions::default(),
        }
    }
}

/// Uniform grid from `t0` to `t_end`; the last step is shortened when the
/// interval is not a multiple of `h`.
pub fn uniform_grid(t0: f64, t_end: f64, h: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("step h = {h} must be positive")));
    }
    if !(t_end > t0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "t_end = {t_end} must exceed t0 = {t0}"
        )));
    }
    let ratio = (t_end - t0) / h;
    let n = if (ratio - ratio.round()).abs() < 1e-6 {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    let n = n.max(1);
    let mut times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * h).collect();
    times.push(t_end);
    Ok(times)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn project_retrying(
    family: &SetFamily,
    t: f64,
    x: &[f64],
    opts: &CatchUpOptions,
) -> Result<ProjectionResult, ProjectionError> {
    let r = project_with(family, t, x, &opts.projection)?;
    if r.converged {
        return Ok(r);
    }
    let mut retry = opts.projection.clone();
    retry.starts += opts.retry_starts;
    retry.seed = retry.seed.wrapping_add(1);
    let r2 = project_with(family, t, x, &retry)?;
    Ok(if r2.converged || r2.distance < r.distance { r2 } else { r })
}

/// Catching-up scheme `x_{k+1} = P_{S(t_{k+1})}(x_k)` with default options.
pub fn catch_up(
    family: &SetFamily,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, DynamicsError> {
    catch_up_with(family, x0, t0, t_end, h, &CatchUpOptions::default())
}

pub fn catch_up_with(
    family: &SetFamily,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    h: f64,
    opts: &CatchUpOptions,
) -> Result<Trajectory, DynamicsError> {
    if x0.len() != family.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: family.dim(),
            found: x0.len(),
        });
    }
    let grid = uniform_grid(t0, t_end, h)?;
    let mut traj = Trajectory {
        times: vec![t0],
        points: vec![x0.to_vec()],
        step_speeds: Vec::new(),
        cum_length: vec![0.0],
        breakpoints: Vec::new(),
        status: TrajectoryStatus::Completed,
        warnings: Vec::new(),
        initial_projection: None,
    };

    // initial projection onto S(t0)
    let mut current = x0.to_vec();
    match membership(family, t0, x0) {
        Ok(true) => {}
        Ok(false) => match project_retrying(family, t0, x0, opts) {
            Ok(r) => {
                current = r.point.clone();
                traj.initial_projection = Some(r.point);
            }
            Err(ProjectionError::EmptySet { t }) => {
                traj.status = TrajectoryStatus::EmptySweptSet { t };
                return Ok(traj);
            }
            Err(e) => return Err(e.into()),
        },
        Err(e) => return Err(e.into()),
    }

    let mut history: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for k in 0..grid.len() - 1 {
        let (ta, tb) = (grid[k], grid[k + 1]);
        let dt = tb - ta;
        let r = match project_retrying(family, tb, &current, opts) {
            Ok(r) => r,
            Err(ProjectionError::EmptySet { t }) => {
                traj.status = TrajectoryStatus::EmptySweptSet { t };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let motion = linalg::dist(&r.point, &current);
        let prev = traj.points.last().expect("trajectory starts with a node");
        acc += linalg::dist(&r.point, prev);

        let recent = &history[history.len().saturating_sub(opts.median_window)..];
        let l_est = if recent.is_empty() { 0.0 } else { median(recent) / dt };
        let is_break = motion > opts.jump_factor * l_est.max(1.0) * dt;

        traj.times.push(tb);
        traj.points.push(r.point.clone());
        traj.step_speeds.push(motion / dt);
        traj.cum_length.push(acc);
        if is_break {
            traj.breakpoints.push(k + 1);
        } else {
            history.push(motion);
        }
        if !r.converged {
            traj.warnings.push(k + 1);
        }
        current = r.point;
    }
    Ok(traj)
}

/// Discrete lengths for a sequence of halving steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthStudy {
    pub rows: Vec<(f64, f64)>,
    /// `|L(h_i) - L(h_{i+1})|`
    pub gaps: Vec<f64>,
    pub statuses: Vec<TrajectoryStatus>,
}

impl LengthStudy {
    pub fn final_length(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.1)
    }

    /// Gaps shrink strictly; gaps below `floor` count as converged.
    pub fn gaps_decreasing(&self, floor: f64) -> bool {
        self.gaps
            .windows(2)
            .all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor))
    }
}

pub fn length_study(
    family: &SetFamily,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    h_list: &[f64],
) -> Result<LengthStudy, DynamicsError> {
    length_study_with(family, x0, t0, t_end, h_list, &CatchUpOptions::default())
}

pub fn validate_halving(h_list: &[f64]) -> Result<(), DynamicsError> {
    if h_list.len() < 3 {
        return Err(DynamicsError::InvalidArgument(
            "h_list needs at least 3 steps".into(),
        ));
    }
    for w in h_list.windows(2) {
        if (w[1] - 0.5 * w[0]).abs() > 1e-9 * w[0] {
            return Err(DynamicsError::InvalidArgument(format!(
                "h_list must halve at every entry ({} -> {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

pub fn length_study_with(
    family: &SetFamily,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    h_list: &[f64],
    opts: &CatchUpOptions,
) -> Result<LengthStudy, DynamicsError> {
    validate_halving(h_list)?;
    let mut rows = Vec::new();
    let mut statuses = Vec::new();
    for &h in h_list {
        let tr = catch_up_with(family, x0, t0, t_end, h, opts)?;
        rows.push((h, tr.total_length()));
        statuses.push(tr.status);
    }
    let gaps = rows.windows(2).map(|w| (w[0].1 - w[1].1).abs()).collect();
    Ok(LengthStudy { rows, gaps, statuses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Polynomial, TimeCurve, TimeFn};
    use approx::assert_abs_diff_eq;

    /// `{x1 >= t}`
    fn translating_halfspace() -> SetFamily {
        SetFamily::halfspace(TimeCurve::constant(&[-1.0, 0.0]), TimeFn::linear(0.0, -1.0)).unwrap()
    }

    fn shrinking_disk() -> SetFamily {
        SetFamily::sublevel(Polynomial::weighted_squares(&[1.0, 1.0]), TimeFn::linear(1.0, -1.0)).unwrap()
    }

    #[test]
    fn grid_hits_end_exactly() {
        let g = uniform_grid(0.0, 0.99, 1e-3).unwrap();
        assert_eq!(g.len(), 991);
        assert_eq!(*g.last().unwrap(), 0.99);
        let g = uniform_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
        assert!(uniform_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn translating_halfspace_is_dragged_at_unit_speed() {
        let tr = catch_up(&translating_halfspace(), &[0.0, 0.0], 0.0, 1.0, 0.1).unwrap();
        assert_eq!(tr.steps(), 10);
        for (k, p) in tr.points.iter().enumerate() {
            assert_abs_diff_eq!(p[0], tr.times[k], epsilon = 1e-12);
            assert_eq!(p[1], 0.0);
        }
        for s in &tr.step_speeds {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(tr.total_length(), 1.0, epsilon = 1e-12);
        assert!(tr.breakpoints.is_empty());
    }

    #[test]
    fn static_ball_projects_once() {
        let ball = SetFamily::ball(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(1.0)).unwrap();
        let tr = catch_up(&ball, &[2.0, 0.0], 0.0, 1.0, 0.1).unwrap();
        assert_eq!(tr.initial_projection, Some(vec![1.0, 0.0]));
        assert_eq!(tr.points[1], vec![1.0, 0.0]);
        assert!(tr.points[1..].iter().all(|p| p == &vec![1.0, 0.0]));
        assert_eq!(tr.cum_length[1], 1.0);
        assert_eq!(tr.total_length(), 1.0);
        // the initialization jump is not motion of the inclusion
        assert!(tr.step_speeds.iter().all(|&s| s == 0.0));
        assert!(tr.breakpoints.is_empty());
    }

    #[test]
    fn shrinking_disk_follows_sqrt_law() {
        let h = 1e-3;
        let tr = catch_up(&shrinking_disk(), &[1.0, 0.0], 0.0, 0.99, h).unwrap();
        for (t, p) in tr.times.iter().zip(&tr.points) {
            assert!((linalg::norm(p) - (1.0 - t).sqrt()).abs() < 10.0 * h);
        }
        assert!((tr.total_length() - 0.9).abs() < 1e-3);
        assert!(tr.breakpoints.is_empty());
        assert!(tr.warnings.is_empty());
    }

    #[test]
    fn empty_set_stops_integration() {
        let tr = catch_up(&shrinking_disk(), &[1.0, 0.0], 0.0, 1.5, 0.15).unwrap();
        assert!(matches!(tr.status, TrajectoryStatus::EmptySweptSet { t } if t > 1.0));
        assert!(*tr.times.last().unwrap() < 1.0);
        assert_eq!(tr.points.len(), tr.cum_length.len());
    }

    #[test]
    fn inner_semicontinuity_failure_is_a_breakpoint() {
        // the ball jumps from center 0 to center 3 at t = 0.5
        let center = TimeCurve(vec![
            crate::geometry::TimeFn::piecewise(vec![0.5], vec![vec![0.0], vec![3.0]]).unwrap(),
            TimeFn::constant(0.0),
        ]);
        let f = SetFamily::ball(center, TimeFn::constant(1.0)).unwrap();
        let tr = catch_up(&f, &[0.0, 0.0], 0.0, 1.0, 0.01).unwrap();
        assert_eq!(tr.breakpoints.len(), 1);
        let k = tr.breakpoints[0];
        assert_abs_diff_eq!(tr.times[k], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(tr.points[k][0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn length_study_examples() {
        let s = length_study(&translating_halfspace(), &[0.0, 0.0], 0.0, 1.0, &[0.1, 0.05, 0.025]).unwrap();
        for (_, l) in &s.rows {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-12);
        }
        let ball = SetFamily::ball(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(1.0)).unwrap();
        let s = length_study(&ball, &[0.0, 3.0], 0.0, 1.0, &[0.1, 0.05, 0.025]).unwrap();
        for (_, l) in &s.rows {
            assert_eq!(*l, 2.0);
        }
        assert!(length_study(&ball, &[0.0, 3.0], 0.0, 1.0, &[0.1, 0.05]).is_err());
        assert!(length_study(&ball, &[0.0, 3.0], 0.0, 1.0, &[0.1, 0.04, 0.02]).is_err());
    }

    #[test]
    fn shrinking_disk_length_study() {
        let s = length_study(&shrinking_disk(), &[1.0, 0.0], 0.0, 0.99, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        for ((_, l), tol) in s.rows.iter().zip([0.02, 0.01, 0.005]) {
            assert!((l - 0.9).abs() <= tol * 0.9, "{l}");
        }
    }
}
