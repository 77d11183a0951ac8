use rand::Rng;
use rand_distr::StandardNormal;

use super::GeometryError;
use crate::linalg;

/// Bounded localization window with nonempty interior.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeometryError::InvalidRegion(
                "box bounds must have equal positive length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(GeometryError::InvalidRegion(
                "box needs finite bounds with lower < upper".into(),
            ));
        }
        Ok(Region::Box { lower, upper })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidRegion("ball center must be finite".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRegion(
                "ball radius must be positive and finite".into(),
            ));
        }
        Ok(Region::Ball { center, radius })
    }

    /// Square box `[-half, half]^dim` around `center`.
    pub fn cube(center: &[f64], half: f64) -> Result<Self, GeometryError> {
        Self::new_box(
            center.iter().map(|c| c - half).collect(),
            center.iter().map(|c| c + half).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lower, .. } => lower.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            Region::Ball { center, radius } => linalg::dist(x, center) <= *radius,
        }
    }

    /// Radius of the smallest centered ball containing the region.
    pub fn circumradius(&self) -> f64 {
        match self {
            Region::Box { lower, upper } => {
                0.5 * linalg::dist(lower, upper)
            }
            Region::Ball { radius, .. } => *radius,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Region::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            Region::Ball { center, .. } => center.clone(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.gen_range(*l..=*u))
                .collect(),
            Region::Ball { center, radius } => {
                let n = center.len();
                let d = random_direction(n, rng);
                let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
                linalg::axpy(center, r, &d)
            }
        }
    }

    /// Largest `s >= 0` with `p + s d` in the region, for `p` inside and unit `d`.
    pub fn exit_distance(&self, p: &[f64], d: &[f64]) -> f64 {
        match self {
            Region::Box { lower, upper } => {
                let mut s = f64::INFINITY;
                for i in 0..p.len() {
                    if d[i] > 0.0 {
                        s = s.min((upper[i] - p[i]) / d[i]);
                    } else if d[i] < 0.0 {
                        s = s.min((lower[i] - p[i]) / d[i]);
                    }
                }
                s.max(0.0)
            }
            Region::Ball { center, radius } => {
                let w = linalg::sub(p, center);
                let b = linalg::dot(&w, d);
                let c = linalg::dot(&w, &w) - radius * radius;
                let disc = (b * b - c).max(0.0);
                (-b + disc.sqrt()).max(0.0)
            }
        }
    }
}

/// Uniformly distributed unit vector.
pub fn random_direction<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = linalg::normalized(&v) {
            return u;
        }
    }
}
