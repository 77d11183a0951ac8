//! Gradient curves of a polynomial as sublevel sweeping solutions.
//!
//! The flow `x' = -grad f(x)` is reparametrized by the value drop
//! `s = b - f(x(t))`, `b = f(x(0))`. The curve `u(s) = x(t(s))` then satisfies
//! `u' = -grad f / |grad f|^2`, i.e. it is swept by `S(s) = [f <= b - s]`.

use std::io::{self, Write};

use thiserror::Error;

use crate::dynamics::{fmt_f64 as fmt, rk4_orbit, DynamicsError, Trajectory, TrajectoryStatus};
use crate::geometry::{GeometryError, Polynomial, Region, SetFamily, TimeFn};
use crate::linalg;
use crate::rng::StreamKey;
use crate::variational::{TalwegProfile, VariationalError};

/// The flow stops once `|grad f|` falls below this.
pub const GRAD_STOP: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("f increases along the flow at node {index}")]
    NonMonotoneFlow { index: usize },
    #[error("gradient flow diverged at t = {t}")]
    Diverged { t: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientFlow {
    pub trajectory: Trajectory,
    /// `f` at the last node; the asymptotic critical value when the flow
    /// stopped at a critical point.
    pub final_value: f64,
    pub reached_critical: bool,
}

/// RK4 integration of `x' = -grad f(x)` on `[0, t_end]`.
pub fn gradient_flow(f: &Polynomial, x0: &[f64], t_end: f64, h: f64) -> Result<GradientFlow, BridgeError> {
    if x0.len() != f.dim() {
        return Err(BridgeError::DimensionMismatch {
            expected: f.dim(),
            found: x0.len(),
        });
    }
    let rhs = |x: &[f64]| linalg::scale(&f.gradient(x), -1.0);
    let stop = |x: &[f64]| linalg::norm(&f.gradient(x)) < GRAD_STOP;
    let trajectory = rk4_orbit(&rhs, x0, t_end, h, &stop)?;
    if let TrajectoryStatus::Diverged { t } = trajectory.status {
        return Err(BridgeError::Diverged { t });
    }
    let last = trajectory.points.last().expect("flow has its initial node");
    Ok(GradientFlow {
        final_value: f.value(last),
        reached_critical: stop(last),
        trajectory,
    })
}

/// Curve `u` on the value grid `s_k = b - f(x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweptCurve {
    pub b: f64,
    pub curve: Trajectory,
    /// `du/ds` by three-point stencils on the nonuniform grid; `None` for a
    /// single node.
    pub du_ds: Vec<Option<Vec<f64>>>,
    /// Flow nodes dropped because `f` did not decrease.
    pub collapsed: usize,
}

/// Tolerance under which consecutive values count as tied.
fn value_tol(b: f64) -> f64 {
    1e-14 * (1.0 + b.abs())
}

pub fn reparametrize_by_value(flow: &Trajectory, f: &Polynomial) -> Result<SweptCurve, BridgeError> {
    let Some(first) = flow.points.first() else {
        return Err(BridgeError::InvalidArgument("flow has no nodes".into()));
    };
    let b = f.value(first);
    let tol = value_tol(b);
    let mut s = vec![0.0];
    let mut pts = vec![first.clone()];
    let mut last_value = b;
    let mut collapsed = 0;
    for (k, p) in flow.points.iter().enumerate().skip(1) {
        let v = f.value(p);
        if v > last_value + tol {
            return Err(BridgeError::NonMonotoneFlow { index: k });
        }
        let sk = b - v;
        if v >= last_value - tol || sk <= *s.last().expect("nonempty") {
            collapsed += 1;
            continue;
        }
        s.push(sk);
        pts.push(p.clone());
        last_value = v;
    }
    let du_ds = stencil_derivatives(&s, &pts);
    Ok(SweptCurve {
        b,
        curve: Trajectory::from_polyline(s, pts, TrajectoryStatus::Completed),
        du_ds,
        collapsed,
    })
}

/// Second-order derivatives on a nonuniform grid: centered three-point
/// weights inside, one-sided three-point weights at the ends.
fn stencil_derivatives(s: &[f64], u: &[Vec<f64>]) -> Vec<Option<Vec<f64>>> {
    let n = s.len();
    if n < 2 {
        return vec![None; n];
    }
    let combo = |w: [f64; 3], idx: [usize; 3]| -> Vec<f64> {
        (0..u[0].len())
            .map(|j| w[0] * u[idx[0]][j] + w[1] * u[idx[1]][j] + w[2] * u[idx[2]][j])
            .collect()
    };
    if n == 2 {
        let d = linalg::scale(&linalg::sub(&u[1], &u[0]), 1.0 / (s[1] - s[0]));
        return vec![Some(d.clone()), Some(d)];
    }
    let mut out = Vec::with_capacity(n);
    // left end, nodes 0, 1, 2
    let (h1, h2) = (s[1] - s[0], s[2] - s[1]);
    out.push(Some(combo(
        [-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))],
        [0, 1, 2],
    )));
    for k in 1..n - 1 {
        let (h1, h2) = (s[k] - s[k - 1], s[k + 1] - s[k]);
        out.push(Some(combo(
            [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))],
            [k - 1, k, k + 1],
        )));
    }
    // right end, nodes n-3, n-2, n-1
    let (h1, h2) = (s[n - 2] - s[n - 3], s[n - 1] - s[n - 2]);
    out.push(Some(combo(
        [h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2.0 * h2 + h1) / (h2 * (h1 + h2))],
        [n - 3, n - 2, n - 1],
    )));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BridgeResult {
    pub flow: GradientFlow,
    pub swept: SweptCurve,
    /// Angle between `-du/ds` and `grad f(u)`; `None` where either vanishes.
    pub inclusion_residuals: Vec<Option<f64>>,
    /// `|f(u(s)) - (b - s)|`
    pub value_residuals: Vec<f64>,
}

impl BridgeResult {
    pub fn max_inclusion_residual(&self) -> f64 {
        self.inclusion_residuals.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_value_residual(&self) -> f64 {
        self.value_residuals.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// The sweeping family `S(s) = [f <= b - s]` of the swept curve.
    pub fn family(&self, f: &Polynomial) -> Result<SetFamily, BridgeError> {
        Ok(SetFamily::sublevel(f.clone(), TimeFn::linear(self.swept.b, -1.0))?)
    }

    /// CSV with columns `s, u_1..u_n, inclusion_residual, value_residual`;
    /// skipped residuals are blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let c = &self.swept.curve;
        let mut header = vec!["s".to_string()];
        header.extend((1..=c.dim()).map(|i| format!("u_{i}")));
        header.extend(["inclusion_residual", "value_residual"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..c.points.len() {
            let mut row = vec![fmt(c.times[k])];
            row.extend(c.points[k].iter().map(|&v| fmt(v)));
            row.push(self.inclusion_residuals[k].map(fmt).unwrap_or_default());
            row.push(fmt(self.value_residuals[k]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Residuals of `u' in -N_{[f <= b - s]}(u)` along the swept curve.
pub fn verify_sublevel_inclusion(swept: &SweptCurve, f: &Polynomial) -> (Vec<Option<f64>>, Vec<f64>) {
    let c = &swept.curve;
    let mut angles = Vec::with_capacity(c.points.len());
    let mut values = Vec::with_capacity(c.points.len());
    for (k, u) in c.points.iter().enumerate() {
        values.push((f.value(u) - (swept.b - c.times[k])).abs());
        let g = f.gradient(u);
        let angle = match &swept.du_ds[k] {
            Some(d) if linalg::norm(&g) > 0.0 && linalg::norm(d) > 0.0 => {
                Some(linalg::angle_between(&linalg::scale(d, -1.0), &g))
            }
            _ => None,
        };
        angles.push(angle);
    }
    (angles, values)
}

/// Flow, reparametrization and residuals in one pass.
pub fn bridge(f: &Polynomial, x0: &[f64], t_end: f64, h: f64) -> Result<BridgeResult, BridgeError> {
    let flow = gradient_flow(f, x0, t_end, h)?;
    let swept = reparametrize_by_value(&flow.trajectory, f)?;
    let (inclusion_residuals, value_residuals) = verify_sublevel_inclusion(&swept, f);
    Ok(BridgeResult {
        flow,
        swept,
        inclusion_residuals,
        value_residuals,
    })
}

/// Newton steps along `grad f` onto `[f = r]`.
fn onto_level(f: &Polynomial, r: f64, x: &[f64]) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    for _ in 0..50 {
        let (v, g) = (f.value(&y), f.gradient(&y));
        let gn2 = linalg::dot(&g, &g);
        if gn2 == 0.0 || !gn2.is_finite() {
            return None;
        }
        let gap = v - r;
        if gap.abs() <= 1e-13 * (1.0 + r.abs()) {
            return Some(y);
        }
        y = linalg::axpy(&y, -gap / gn2, &g);
    }
    let ok = (f.value(&y) - r).abs() <= 1e-9 * (1.0 + r.abs());
    ok.then_some(y)
}

/// `|grad f|^2` and its gradient `2 H grad f`.
fn grad_sq(f: &Polynomial, x: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let g = f.gradient(x);
    let hess = f.hessian(x);
    let d = (0..n)
        .map(|i| 2.0 * (0..n).map(|j| hess[i * n + j] * g[j]).sum::<f64>())
        .collect();
    (linalg::dot(&g, &g), d)
}

/// Local minimum of `|grad f|` on `[f = r] ∩ region` from `x` by projected
/// gradient steps with backtracking.
fn minimize_on_level(f: &Polynomial, r: f64, region: &Region, x: Vec<f64>) -> (f64, Vec<f64>) {
    let mut x = x;
    let (mut val, mut dval) = grad_sq(f, &x);
    let mut step = 0.1 * region.circumradius();
    for _ in 0..200 {
        let g = f.gradient(&x);
        let Some(nrm) = linalg::normalized(&g) else { break };
        // tangential part of the descent direction
        let along = linalg::dot(&dval, &nrm);
        let t = linalg::axpy(&dval, -along, &nrm);
        let tn = linalg::norm(&t);
        if tn <= 1e-14 * (1.0 + val) {
            break;
        }
        let dir = linalg::scale(&t, -1.0 / tn);
        let mut moved = false;
        while step > 1e-12 {
            if let Some(y) = onto_level(f, r, &linalg::axpy(&x, step, &dir)) {
                if region.contains(&y) {
                    let (v2, d2) = grad_sq(f, &y);
                    if v2 < val {
                        x = y;
                        val = v2;
                        dval = d2;
                        moved = true;
                        step *= 1.5;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (val.sqrt(), x)
}

/// Talweg of the sublevel family `[f <= r]` from `phi(r) = 1 / min |grad f|`
/// over `[f = r] ∩ region`.
pub fn level_talweg(
    f: &Polynomial,
    region: &Region,
    r_grid: &[f64],
    starts: usize,
    seed: u64,
) -> Result<TalwegProfile, BridgeError> {
    if region.dim() != f.dim() {
        return Err(BridgeError::DimensionMismatch {
            expected: f.dim(),
            found: region.dim(),
        });
    }
    if starts == 0 || r_grid.is_empty() || r_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(BridgeError::InvalidArgument(
            "need starts >= 1 and a strictly increasing r_grid".into(),
        ));
    }
    let mut out = TalwegProfile::from_fn(r_grid.to_vec(), |_| 0.0);
    for (i, &r) in r_grid.iter().enumerate() {
        let mut rng = StreamKey::new(seed, "bridge.level_talweg").with_f64(r).rng();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut found = 0;
        for _ in 0..64 * starts {
            if found >= starts {
                break;
            }
            let Some(y) = onto_level(f, r, &region.sample(&mut rng)) else { continue };
            if !region.contains(&y) {
                continue;
            }
            found += 1;
            let (gmin, w) = minimize_on_level(f, r, region, y);
            if best.as_ref().is_none_or(|(b, _)| gmin < *b) {
                best = Some((gmin, w));
            }
        }
        match best {
            Some((gmin, w)) => {
                if gmin <= 1.0 / crate::variational::LIP_CAP {
                    out.infinite[i] = true;
                    out.phi[i] = f64::INFINITY;
                } else {
                    out.phi[i] = 1.0 / gmin;
                }
                out.witnesses[i] = Some(w);
            }
            None => out.empty[i] = true,
        }
    }
    if out.empty.iter().all(|&e| e) {
        return Err(VariationalError::AllEmpty.into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::{geometric_grid, talweg_profile, verify_speed_bound, LipOptions};
    use approx::assert_abs_diff_eq;

    fn half_norm_sq() -> Polynomial {
        Polynomial::weighted_squares(&[0.5, 0.5])
    }

    fn anisotropic() -> Polynomial {
        Polynomial::weighted_squares(&[0.5, 2.0])
    }

    #[test]
    fn linear_flow_decays_exponentially() {
        let fl = gradient_flow(&half_norm_sq(), &[1.0, 0.0], 2.0, 1e-2).unwrap();
        for (t, p) in fl.trajectory.times.iter().zip(&fl.trajectory.points) {
            assert_abs_diff_eq!(p[0], (-t).exp(), epsilon = 1e-9);
            assert_abs_diff_eq!(half_norm_sq().value(p), 0.5 * (-2.0 * t).exp(), epsilon = 1e-9);
        }
        assert!(!fl.reached_critical);
    }

    #[test]
    fn constant_f_is_stationary() {
        let c = Polynomial::affine(&[0.0, 0.0], 3.0);
        let fl = gradient_flow(&c, &[0.2, 0.4], 1.0, 0.1).unwrap();
        assert_eq!(fl.trajectory.points.len(), 1);
        assert!(fl.reached_critical);
        assert_eq!(fl.final_value, 3.0);
        let sw = reparametrize_by_value(&fl.trajectory, &c).unwrap();
        assert_eq!(sw.curve.points.len(), 1);
        assert_eq!(sw.du_ds, vec![None]);
    }

    #[test]
    fn decoupled_rates() {
        let fl = gradient_flow(&anisotropic(), &[1.0, 1.0], 1.0, 1e-2).unwrap();
        let end = fl.trajectory.points.last().unwrap();
        assert_abs_diff_eq!(end[0], (-1.0f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(end[1], (-4.0f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn half_norm_bridge() {
        let f = half_norm_sq();
        let res = bridge(&f, &[1.0, 0.0], 3.0, 1e-3).unwrap();
        let c = &res.swept.curve;
        for (s, u) in c.times.iter().zip(&c.points) {
            if *s <= 0.45 {
                let exact = (1.0 - 2.0 * s).sqrt();
                assert!((linalg::norm(u) / exact - 1.0).abs() < 1e-6);
            }
        }
        assert!(res.max_inclusion_residual() <= 1e-12);
        assert!(res.max_value_residual() <= 1e-12);
        let (lf, ls) = (res.flow.trajectory.total_length(), c.total_length());
        assert!((lf - ls).abs() <= 1e-6 * lf);
    }

    #[test]
    fn one_dimensional_derivative() {
        let f = Polynomial::weighted_squares(&[0.5]);
        let res = bridge(&f, &[1.0], 1.0, 1e-3).unwrap();
        let c = &res.swept.curve;
        for k in 1..c.points.len() - 1 {
            let s = c.times[k];
            let d = res.swept.du_ds[k].as_ref().unwrap()[0];
            assert!((d + 1.0 / (1.0 - 2.0 * s).sqrt()).abs() < 1e-4);
            assert_eq!(res.inclusion_residuals[k], Some(0.0));
        }
    }

    #[test]
    fn anisotropic_bridge_residual_is_second_order() {
        let f = anisotropic();
        let r1 = bridge(&f, &[1.0, 1.0], 1.0, 2e-3).unwrap().max_inclusion_residual();
        let r2 = bridge(&f, &[1.0, 1.0], 1.0, 1e-3).unwrap().max_inclusion_residual();
        assert!(r1 < 1e-2 && r2 < 1e-2);
        assert!(r2 < r1 / 3.0, "{r1} -> {r2}");
    }

    #[test]
    fn increasing_values_are_rejected() {
        let f = half_norm_sq();
        let tr = Trajectory::from_polyline(
            vec![0.0, 1.0],
            vec![vec![0.5, 0.0], vec![1.0, 0.0]],
            TrajectoryStatus::Completed,
        );
        assert_eq!(
            reparametrize_by_value(&tr, &f),
            Err(BridgeError::NonMonotoneFlow { index: 1 })
        );
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let s = [0.0, 0.1, 0.35, 0.4, 0.9];
        let u: Vec<Vec<f64>> = s.iter().map(|&v| vec![v * v - v]).collect();
        for (k, d) in stencil_derivatives(&s, &u).iter().enumerate() {
            assert_abs_diff_eq!(d.as_ref().unwrap()[0], 2.0 * s[k] - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bridge_respects_speed_bound() {
        let f = half_norm_sq();
        let res = bridge(&f, &[1.0, 0.0], 1.0, 1e-2).unwrap();
        let fam = res.family(&f).unwrap();
        let chk = verify_speed_bound(&res.swept.curve, &fam, &LipOptions::default()).unwrap();
        assert!(chk.passes(0.05), "{}", chk.max_ratio);
    }

    #[test]
    fn level_talweg_examples() {
        let unit = Region::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = Polynomial::weighted_squares(&[1.0, 1.0]);
        let grid = geometric_grid(0.01, 1.0, 8);
        let p = level_talweg(&f, &unit, &grid, 8, 3).unwrap();
        for (r, phi) in grid.iter().zip(&p.phi) {
            assert!((phi * 2.0 * r.sqrt() - 1.0).abs() < 0.05);
        }
        let lin = Polynomial::affine(&[1.0, 0.0], 0.0);
        let p = level_talweg(&lin, &unit, &[-0.5, 0.0, 0.5], 4, 3).unwrap();
        assert!(p.phi.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ellipse_talweg_matches_scan() {
        let f = anisotropic();
        let region = Region::new_ball(vec![0.0, 0.0], 2.0).unwrap();
        let p = level_talweg(&f, &region, &[0.5], 8, 5).unwrap();
        // 1/2 x^2 + 2 y^2 = 1/2 is (cos a, sin a / 2)
        let scan = (0..100_000)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 100_000.0;
                linalg::norm(&f.gradient(&[a.cos(), 0.5 * a.sin()]))
            })
            .fold(f64::INFINITY, f64::min);
        assert!((p.phi[0] * scan - 1.0).abs() < 1e-6, "{} vs {}", p.phi[0], 1.0 / scan);
    }

    #[test]
    fn level_and_sampled_talwegs_agree() {
        let f = Polynomial::weighted_squares(&[1.0, 1.0]);
        let unit = Region::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let grid = geometric_grid(0.05, 0.8, 5);
        let a = level_talweg(&f, &unit, &grid, 8, 1).unwrap();
        let fam = SetFamily::sublevel(f, TimeFn::linear(0.0, 1.0)).unwrap();
        let b = talweg_profile(&fam, &unit, &grid, 8, 1).unwrap();
        for (x, y) in a.phi.iter().zip(&b.phi) {
            assert!((x / y - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn bridge_csv_layout() {
        let f = Polynomial::weighted_squares(&[0.5]);
        let res = bridge(&f, &[1.0], 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("s,u_1,inclusion_residual,value_residual"));
        assert_eq!(lines.next(), Some("0.0,1.0,0.0,0.0"));
        assert_eq!(lines.count(), 2);
    }
}
