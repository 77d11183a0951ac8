use crate::geometry::{Polynomial, Region, SetFamily};
use crate::linalg;
use crate::rng::StreamKey;

use super::catch_up::{catch_up_with, uniform_grid, CatchUpOptions};
use super::{DynamicsError, Trajectory, TrajectoryStatus};

/// Divergence threshold for explicit integrators.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Polynomial vector field `F: R^n -> R^n`, optionally declared
/// `alpha`-monotone.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Polynomial>,
    pub monotonicity_alpha: Option<f64>,
}

impl VectorField {
    pub fn new(components: Vec<Polynomial>, monotonicity_alpha: Option<f64>) -> Result<Self, DynamicsError> {
        let n = components.len();
        if n == 0 {
            return Err(DynamicsError::InvalidArgument("vector field needs components".into()));
        }
        if let Some(bad) = components.iter().find(|p| p.dim() != n) {
            return Err(DynamicsError::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        if let Some(a) = monotonicity_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(DynamicsError::InvalidArgument(format!(
                    "monotonicity alpha = {a} must be positive"
                )));
            }
        }
        Ok(VectorField {
            components,
            monotonicity_alpha,
        })
    }

    /// `F(x) = alpha * x`
    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        let components = (0..dim)
            .map(|i| {
                let mut c = vec![0.0; dim];
                c[i] = alpha;
                Polynomial::affine(&c, 0.0)
            })
            .collect();
        VectorField {
            components,
            monotonicity_alpha: (alpha > 0.0).then_some(alpha),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.value(x)).collect()
    }

    /// `(alpha, c)` when `F(x) = alpha x + c` exactly.
    pub fn as_scaled_identity(&self) -> Option<(f64, Vec<f64>)> {
        let n = self.dim();
        let mut alpha = None;
        let mut shift = vec![0.0; n];
        for (i, p) in self.components.iter().enumerate() {
            if p.degree() > 1 {
                return None;
            }
            let mut lin = vec![0.0; n];
            for t in p.terms() {
                match t.exponents.iter().position(|&e| e == 1) {
                    None => shift[i] += t.coeff,
                    Some(j) => lin[j] += t.coeff,
                }
            }
            for (j, &c) in lin.iter().enumerate() {
                if j != i && c != 0.0 {
                    return None;
                }
            }
            match alpha {
                None => alpha = Some(lin[i]),
                Some(a) if a == lin[i] => {}
                Some(_) => return None,
            }
        }
        alpha.map(|a| (a, shift))
    }

    /// Samples pairs in `region` and returns the smallest observed ratio
    /// `<F(x) - F(y), x - y> / |x - y|^2`.
    pub fn min_monotonicity_ratio(&self, region: &Region, pairs: usize, seed: u64) -> f64 {
        let mut rng = StreamKey::new(seed, "dynamics.monotonicity").rng();
        let mut worst = f64::INFINITY;
        for _ in 0..pairs {
            let x = region.sample(&mut rng);
            let y = region.sample(&mut rng);
            let d = linalg::sub(&x, &y);
            let dd = linalg::dot(&d, &d);
            if dd == 0.0 {
                continue;
            }
            let df = linalg::sub(&self.eval(&x), &self.eval(&y));
            worst = worst.min(linalg::dot(&df, &d) / dd);
        }
        worst
    }

    /// Checks the declared monotonicity constant on sampled pairs.
    pub fn validate_monotonicity(&self, region: &Region, pairs: usize, seed: u64) -> Result<(), DynamicsError> {
        let Some(alpha) = self.monotonicity_alpha else {
            return Ok(());
        };
        let worst = self.min_monotonicity_ratio(region, pairs, seed);
        if worst < alpha * (1.0 - 1e-12) {
            return Err(DynamicsError::MonotonicityViolated { alpha, observed: worst });
        }
        Ok(())
    }
}

fn rk4_step(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let k1 = f(x);
    let k2 = f(&linalg::axpy(x, 0.5 * h, &k1));
    let k3 = f(&linalg::axpy(x, 0.5 * h, &k2));
    let k4 = f(&linalg::axpy(x, h, &k3));
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Classical RK4 for an autonomous system on a uniform grid starting at
/// `t = 0`. `stop` may end the integration early after a node.
pub(crate) fn rk4_orbit(
    rhs: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    t_end: f64,
    h: f64,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<Trajectory, DynamicsError> {
    let grid = uniform_grid(0.0, t_end, h)?;
    let mut times = vec![grid[0]];
    let mut points = vec![x0.to_vec()];
    let mut status = TrajectoryStatus::Completed;
    let mut x = x0.to_vec();
    for w in grid.windows(2) {
        if stop(&x) {
            break;
        }
        x = rk4_step(rhs, &x, w[1] - w[0]);
        let nx = linalg::norm(&x);
        if !(nx <= DIVERGENCE_NORM) {
            status = TrajectoryStatus::Diverged { t: w[1] };
            break;
        }
        times.push(w[1]);
        points.push(x.clone());
    }
    Ok(Trajectory::from_polyline(times, points, status))
}

/// Orbit of `x' = F(x)` from `x0` over `[0, t_end]`.
pub fn ode_orbit(field: &VectorField, x0: &[f64], t_end: f64, h: f64) -> Result<Trajectory, DynamicsError> {
    if x0.len() != field.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: field.dim(),
            found: x0.len(),
        });
    }
    rk4_orbit(&|x| field.eval(x), x0, t_end, h, &|_| false)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionCheck {
    pub max_residual: f64,
    /// Per interior node; `None` where `F` vanishes.
    pub residuals: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Residual of `gamma' in -N_{S(gamma)}(gamma)` for `S(x) = x + F(x)^perp`:
/// the normal space there is `span F(x)`, so the discrete velocity must be
/// parallel to `F`.
pub fn verify_state_dependent_inclusion(traj: &Trajectory, field: &VectorField) -> InclusionCheck {
    let mut residuals = Vec::new();
    let mut skipped = 0;
    let mut max_residual: f64 = 0.0;
    let pts = &traj.points;
    for k in 1..pts.len().saturating_sub(1) {
        let f = field.eval(&pts[k]);
        let Some(u) = linalg::normalized(&f) else {
            skipped += 1;
            residuals.push(None);
            continue;
        };
        let v = linalg::scale(
            &linalg::sub(&pts[k + 1], &pts[k - 1]),
            1.0 / (traj.times[k + 1] - traj.times[k - 1]),
        );
        let vn = linalg::norm(&v);
        let r = if vn == 0.0 {
            0.0
        } else {
            let along = linalg::dot(&v, &u);
            linalg::norm(&linalg::axpy(&v, -along, &u)) / vn
        };
        max_residual = max_residual.max(r);
        residuals.push(Some(r));
    }
    InclusionCheck {
        max_residual,
        residuals,
        skipped,
    }
}

/// Catching-up for `gamma' in -N_{S(t)}(F(gamma))` with `F(x) = alpha x + c`,
/// `alpha > 0`: the constraint is pulled back through `F`, i.e. `z = F(gamma)`
/// follows the ordinary scheme and `gamma = (z - c) / alpha`.
pub fn catch_up_monotone(
    family: &SetFamily,
    field: &VectorField,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    h: f64,
    opts: &CatchUpOptions,
) -> Result<Trajectory, DynamicsError> {
    let Some((alpha, c)) = field.as_scaled_identity() else {
        return Err(DynamicsError::Unsupported(
            "monotone sweeping needs F(x) = alpha x + c".into(),
        ));
    };
    if !(alpha > 0.0) {
        return Err(DynamicsError::Unsupported(format!(
            "F = {alpha} x + c is not invertible with a positive factor"
        )));
    }
    let z0 = field.eval(x0);
    let zt = catch_up_with(family, &z0, t0, t_end, h, opts)?;
    let back = |z: &Vec<f64>| linalg::scale(&linalg::sub(z, &c), 1.0 / alpha);
    Ok(Trajectory {
        points: zt.points.iter().map(back).collect(),
        step_speeds: zt.step_speeds.iter().map(|s| s / alpha).collect(),
        cum_length: zt.cum_length.iter().map(|l| l / alpha).collect(),
        initial_projection: zt.initial_projection.as_ref().map(back),
        ..zt
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{TimeCurve, TimeFn};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn rotation() -> VectorField {
        VectorField::new(
            vec![Polynomial::affine(&[0.0, -1.0], 0.0), Polynomial::affine(&[1.0, 0.0], 0.0)],
            None,
        )
        .unwrap()
    }

    fn limit_cycle() -> VectorField {
        // (-y + x(1 - x^2 - y^2), x + y(1 - x^2 - y^2))
        let p1 = Polynomial::from_terms(
            2,
            &[(-1.0, &[0, 1]), (1.0, &[1, 0]), (-1.0, &[3, 0]), (-1.0, &[1, 2])],
        )
        .unwrap();
        let p2 = Polynomial::from_terms(
            2,
            &[(1.0, &[1, 0]), (1.0, &[0, 1]), (-1.0, &[2, 1]), (-1.0, &[0, 3])],
        )
        .unwrap();
        VectorField::new(vec![p1, p2], None).unwrap()
    }

    #[test]
    fn rotation_returns_after_full_turn() {
        for (h, tol) in [(2.0 * PI / 100.0, 1e-6), (2.0 * PI / 200.0, 1e-7)] {
            let tr = ode_orbit(&rotation(), &[1.0, 0.0], 2.0 * PI, h).unwrap();
            let end = tr.points.last().unwrap();
            assert!(linalg::dist(end, &[1.0, 0.0]) < tol, "h = {h}: {end:?}");
            assert!((tr.total_length() - 2.0 * PI).abs() < 2e-3);
        }
    }

    #[test]
    fn zero_field_is_stationary() {
        let f = VectorField::new(vec![Polynomial::zero(2), Polynomial::zero(2)], None).unwrap();
        let tr = ode_orbit(&f, &[0.3, -2.0], 1.0, 0.1).unwrap();
        assert!(tr.points.iter().all(|p| p == &vec![0.3, -2.0]));
        assert_eq!(tr.total_length(), 0.0);
        let chk = verify_state_dependent_inclusion(&tr, &f);
        assert_eq!(chk.max_residual, 0.0);
        assert_eq!(chk.skipped, tr.points.len() - 2);
    }

    #[test]
    fn radial_contraction() {
        let f = VectorField::new(
            vec![Polynomial::affine(&[-1.0, 0.0], 0.0), Polynomial::affine(&[0.0, -1.0], 0.0)],
            None,
        )
        .unwrap();
        let tr = ode_orbit(&f, &[1.0, 0.0], 10.0, 1e-2).unwrap();
        let end = linalg::norm(tr.points.last().unwrap());
        assert_abs_diff_eq!(end, (-10.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(tr.total_length(), 1.0 - (-10.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn divergence_is_reported() {
        // x' = x^2 blows up at t = 1 from x0 = 1
        let f = VectorField::new(vec![Polynomial::from_terms(1, &[(1.0, &[2])]).unwrap()], None).unwrap();
        let tr = ode_orbit(&f, &[1.0], 2.0, 1e-3).unwrap();
        assert!(matches!(tr.status, TrajectoryStatus::Diverged { .. }));
    }

    #[test]
    fn rotation_inclusion_residual_is_second_order() {
        let r1 = verify_state_dependent_inclusion(&ode_orbit(&rotation(), &[1.0, 0.0], 10.0, 0.02).unwrap(), &rotation());
        let r2 = verify_state_dependent_inclusion(&ode_orbit(&rotation(), &[1.0, 0.0], 10.0, 0.01).unwrap(), &rotation());
        assert!(r1.max_residual < 1e-4);
        assert!(r2.max_residual <= r1.max_residual);
    }

    #[test]
    fn limit_cycle_has_linear_length_growth() {
        let f = limit_cycle();
        let h = 1e-2;
        let tr = ode_orbit(&f, &[0.1, 0.0], 60.0, h).unwrap();
        let chk = verify_state_dependent_inclusion(&tr, &f);
        assert!(chk.max_residual < 1e-3, "{}", chk.max_residual);
        // after the transient the orbit runs along the unit circle at speed 1
        let l30 = tr.length_at(30.0).unwrap();
        let l60 = tr.length_at(60.0).unwrap();
        assert!(((l60 - l30) / 30.0 - 1.0).abs() < 1e-3);
        assert!((linalg::norm(tr.points.last().unwrap()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_identity_detection() {
        let f = VectorField::scaled_identity(2, 2.0);
        assert_eq!(f.as_scaled_identity(), Some((2.0, vec![0.0, 0.0])));
        assert_eq!(rotation().as_scaled_identity(), None);
        let shifted = VectorField::new(
            vec![Polynomial::affine(&[3.0, 0.0], 1.0), Polynomial::affine(&[0.0, 3.0], -2.0)],
            Some(3.0),
        )
        .unwrap();
        assert_eq!(shifted.as_scaled_identity(), Some((3.0, vec![1.0, -2.0])));
    }

    #[test]
    fn monotonicity_is_validated() {
        let region = Region::cube(&[0.0, 0.0], 1.0).unwrap();
        assert!(VectorField::scaled_identity(2, 2.0).validate_monotonicity(&region, 200, 1).is_ok());
        let mut bad = rotation();
        bad.monotonicity_alpha = Some(0.5);
        assert!(matches!(
            bad.validate_monotonicity(&region, 200, 1),
            Err(DynamicsError::MonotonicityViolated { .. })
        ));
    }

    #[test]
    fn monotone_pullback_halves_speed() {
        let half = SetFamily::halfspace(TimeCurve::constant(&[-1.0, 0.0]), TimeFn::linear(0.0, -1.0)).unwrap();
        let f = VectorField::scaled_identity(2, 2.0);
        let tr = catch_up_monotone(&half, &f, &[0.0, 0.0], 0.0, 1.0, 1e-2, &CatchUpOptions::default()).unwrap();
        for (t, p) in tr.times.iter().zip(&tr.points) {
            assert_abs_diff_eq!(p[0], t / 2.0, epsilon = 1e-12);
        }
        for s in &tr.step_speeds {
            assert_abs_diff_eq!(*s, 0.5, epsilon = 1e-9);
        }
        assert!(catch_up_monotone(&half, &rotation(), &[0.0, 0.0], 0.0, 1.0, 0.1, &CatchUpOptions::default()).is_err());
    }
}
