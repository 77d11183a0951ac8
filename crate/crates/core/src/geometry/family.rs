use std::fmt;
use std::sync::Arc;

use super::{GeometryError, Polynomial, TimeCurve, TimeFn};
use crate::linalg;

/// Monotone reparametrization of the time axis, `s -> warp(s)`.
pub trait TimeWarp: Send + Sync + fmt::Debug {
    /// `None` outside the domain.
    fn warp(&self, s: f64) -> Option<f64>;
    fn domain(&self) -> (f64, f64);
}

/// Moving half-space `{ y : <normal(t), y> <= offset(t) }`.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingHalfspace {
    pub normal: TimeCurve,
    pub offset: TimeFn,
}

#[derive(Clone, Debug)]
pub enum FamilyKind {
    MovingBall { center: TimeCurve, radius: TimeFn },
    MovingHalfspace(MovingHalfspace),
    MovingPolytope(Vec<MovingHalfspace>),
    /// `{ y : poly(y) <= level(t) }`
    Sublevel { poly: Polynomial, level: TimeFn },
    Intersection(Vec<SetFamily>),
    /// `base(t) + shift(t)`
    Translate { base: Box<SetFamily>, shift: TimeCurve },
    /// `base(warp(s))`, used to compose a family with a time change.
    Reparametrized { base: Box<SetFamily>, warp: Arc<dyn TimeWarp> },
}

/// Time-indexed closed set `S(t)` in `R^dim`.
#[derive(Clone, Debug)]
pub struct SetFamily {
    dim: usize,
    kind: FamilyKind,
    domain: Option<(f64, f64)>,
}

impl SetFamily {
    pub fn new(dim: usize, kind: FamilyKind) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidFamily("dimension must be positive".into()));
        }
        let check = |what: &str, got: usize| {
            if got == dim {
                Ok(())
            } else {
                Err(GeometryError::InvalidFamily(format!(
                    "{what} has dimension {got}, family has {dim}"
                )))
            }
        };
        match &kind {
            FamilyKind::MovingBall { center, .. } => check("ball center", center.dim())?,
            FamilyKind::MovingHalfspace(h) => check("half-space normal", h.normal.dim())?,
            FamilyKind::MovingPolytope(hs) => {
                for h in hs {
                    check("polytope facet normal", h.normal.dim())?;
                }
            }
            FamilyKind::Sublevel { poly, .. } => check("sublevel polynomial", poly.dim())?,
            FamilyKind::Intersection(members) => {
                for m in members {
                    check("intersection member", m.dim)?;
                }
            }
            FamilyKind::Translate { base, shift } => {
                check("translated base", base.dim)?;
                check("shift curve", shift.dim())?;
            }
            FamilyKind::Reparametrized { base, .. } => check("reparametrized base", base.dim)?,
        }
        let domain = match &kind {
            FamilyKind::Reparametrized { warp, .. } => Some(warp.domain()),
            _ => None,
        };
        Ok(SetFamily { dim, kind, domain })
    }

    pub fn ball(center: TimeCurve, radius: TimeFn) -> Result<Self, GeometryError> {
        Self::new(center.dim(), FamilyKind::MovingBall { center, radius })
    }

    pub fn halfspace(normal: TimeCurve, offset: TimeFn) -> Result<Self, GeometryError> {
        Self::new(
            normal.dim(),
            FamilyKind::MovingHalfspace(MovingHalfspace { normal, offset }),
        )
    }

    pub fn polytope(dim: usize, facets: Vec<MovingHalfspace>) -> Result<Self, GeometryError> {
        Self::new(dim, FamilyKind::MovingPolytope(facets))
    }

    pub fn sublevel(poly: Polynomial, level: TimeFn) -> Result<Self, GeometryError> {
        Self::new(poly.dim(), FamilyKind::Sublevel { poly, level })
    }

    pub fn intersection(dim: usize, members: Vec<SetFamily>) -> Result<Self, GeometryError> {
        Self::new(dim, FamilyKind::Intersection(members))
    }

    pub fn translate(base: SetFamily, shift: TimeCurve) -> Result<Self, GeometryError> {
        Self::new(
            base.dim,
            FamilyKind::Translate {
                base: Box::new(base),
                shift,
            },
        )
    }

    /// `s -> base(warp(s))`; the domain is the warp's domain.
    pub fn reparametrized(base: SetFamily, warp: Arc<dyn TimeWarp>) -> Result<Self, GeometryError> {
        let (lo, hi) = warp.domain();
        Self::new(
            base.dim,
            FamilyKind::Reparametrized {
                base: Box::new(base),
                warp,
            },
        )?
        .with_domain(lo, hi)
    }

    /// Restricts the admissible times to `[lo, hi]`.
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        if !(lo < hi) {
            return Err(GeometryError::InvalidFamily("domain needs lo < hi".into()));
        }
        let (lo, hi) = match self.domain {
            Some((a, b)) => (lo.max(a), hi.min(b)),
            None => (lo, hi),
        };
        self.domain = Some((lo, hi));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        self.domain
    }

    pub fn in_domain(&self, t: f64) -> bool {
        t.is_finite()
            && match self.domain {
                Some((lo, hi)) => lo <= t && t <= hi,
                None => true,
            }
    }

    /// Concrete set `S(t)` as a list of inequality constraints.
    pub fn slice(&self, t: f64) -> Result<Slice<'_>, GeometryError> {
        if !self.in_domain(t) {
            return Err(GeometryError::OutOfDomain { t });
        }
        let mut out = Slice {
            dim: self.dim,
            constraints: Vec::new(),
            empty: false,
        };
        self.collect(t, &vec![0.0; self.dim], &mut out)?;
        Ok(out)
    }

    fn collect<'a>(&'a self, t: f64, shift: &[f64], out: &mut Slice<'a>) -> Result<(), GeometryError> {
        match &self.kind {
            FamilyKind::MovingBall { center, radius } => {
                let r = radius.eval(t);
                if r.is_nan() {
                    return Err(GeometryError::NonFinite);
                }
                if r < 0.0 {
                    out.empty = true;
                }
                out.constraints.push(Constraint::Ball {
                    center: linalg::add(&center.eval(t), shift),
                    radius: r,
                });
            }
            FamilyKind::MovingHalfspace(h) => push_halfspace(h, t, shift, out)?,
            FamilyKind::MovingPolytope(hs) => {
                for h in hs {
                    push_halfspace(h, t, shift, out)?;
                }
            }
            FamilyKind::Sublevel { poly, level } => {
                out.constraints.push(Constraint::Sublevel {
                    poly,
                    level: level.eval(t),
                    shift: shift.to_vec(),
                });
            }
            FamilyKind::Intersection(members) => {
                for m in members {
                    if !m.in_domain(t) {
                        return Err(GeometryError::OutOfDomain { t });
                    }
                    m.collect(t, shift, out)?;
                }
            }
            FamilyKind::Translate { base, shift: s } => {
                if !base.in_domain(t) {
                    return Err(GeometryError::OutOfDomain { t });
                }
                let total = linalg::add(shift, &s.eval(t));
                base.collect(t, &total, out)?;
            }
            FamilyKind::Reparametrized { base, warp } => {
                let inner = warp.warp(t).ok_or(GeometryError::OutOfDomain { t })?;
                if !base.in_domain(inner) {
                    return Err(GeometryError::OutOfDomain { t: inner });
                }
                base.collect(inner, shift, out)?;
            }
        }
        Ok(())
    }
}

fn push_halfspace<'a>(
    h: &MovingHalfspace,
    t: f64,
    shift: &[f64],
    out: &mut Slice<'a>,
) -> Result<(), GeometryError> {
    let a = h.normal.eval(t);
    // <a, y - shift> <= b  <=>  <a, y> <= b + <a, shift>
    let b = h.offset.eval(t) + linalg::dot(&a, shift);
    if a.iter().chain(std::iter::once(&b)).any(|v| v.is_nan()) {
        return Err(GeometryError::NonFinite);
    }
    if a.iter().all(|&v| v == 0.0) {
        // either the whole space or nothing
        if b < 0.0 {
            out.empty = true;
        }
        return Ok(());
    }
    out.constraints.push(Constraint::Halfspace { normal: a, offset: b });
    Ok(())
}

/// One closed inequality `g(y) <= 0` of a slice.
#[derive(Clone, Debug)]
pub enum Constraint<'a> {
    /// `|y - center| <= radius`
    Ball { center: Vec<f64>, radius: f64 },
    /// `<normal, y> <= offset`
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `poly(y - shift) <= level`
    Sublevel {
        poly: &'a Polynomial,
        level: f64,
        shift: Vec<f64>,
    },
}

impl Constraint<'_> {
    /// Exact inequality test on computed values.
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Constraint::Ball { center, radius } => {
                *radius >= 0.0 && sq_dist(y, center) <= radius * radius
            }
            Constraint::Halfspace { normal, offset } => linalg::dot(normal, y) <= *offset,
            Constraint::Sublevel { poly, level, shift } => {
                poly.value(&linalg::sub(y, shift)) <= *level
            }
        }
    }

    /// Smooth defining function (squared form for balls).
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Constraint::Ball { center, radius } => sq_dist(y, center) - radius * radius,
            Constraint::Halfspace { normal, offset } => linalg::dot(normal, y) - offset,
            Constraint::Sublevel { poly, level, shift } => {
                poly.value(&linalg::sub(y, shift)) - level
            }
        }
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Ball { center, .. } => linalg::scale(&linalg::sub(y, center), 2.0),
            Constraint::Halfspace { normal, .. } => normal.clone(),
            Constraint::Sublevel { poly, shift, .. } => poly.gradient(&linalg::sub(y, shift)),
        }
    }

    /// Row-major Hessian of [`Constraint::value`].
    pub fn hessian(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        match self {
            Constraint::Ball { .. } => {
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    h[i * n + i] = 2.0;
                }
                h
            }
            Constraint::Halfspace { .. } => vec![0.0; n * n],
            Constraint::Sublevel { poly, shift, .. } => poly.hessian(&linalg::sub(y, shift)),
        }
    }

    /// Signed distance estimate `g / |grad g|` (first order).
    pub fn boundary_gap(&self, y: &[f64]) -> f64 {
        match self {
            Constraint::Ball { center, radius } => linalg::dist(y, center) - radius,
            Constraint::Halfspace { normal, offset } => {
                (linalg::dot(normal, y) - offset) / linalg::norm(normal)
            }
            Constraint::Sublevel { .. } => {
                let g = self.value(y);
                let gn = linalg::norm(&self.gradient(y));
                if gn > 0.0 {
                    g / gn
                } else if g == 0.0 {
                    0.0
                } else {
                    g.signum() * f64::INFINITY
                }
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The set `S(t)` at a fixed time.
#[derive(Clone, Debug)]
pub struct Slice<'a> {
    pub dim: usize,
    pub constraints: Vec<Constraint<'a>>,
    /// Set when a constraint is infeasible on its own (negative radius,
    /// zero normal with negative offset).
    pub empty: bool,
}

impl Slice<'_> {
    pub fn contains(&self, y: &[f64]) -> bool {
        !self.empty && self.constraints.iter().all(|c| c.contains(y))
    }
}

/// `x in S(t)` with exact inequalities.
pub fn membership(family: &SetFamily, t: f64, x: &[f64]) -> Result<bool, GeometryError> {
    if x.len() != family.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: family.dim(),
            found: x.len(),
        });
    }
    Ok(family.slice(t)?.contains(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shrinking_ball() -> SetFamily {
        SetFamily::ball(TimeCurve::constant(&[0.0, 0.0]), TimeFn::linear(1.0, -1.0)).unwrap()
    }

    #[test]
    fn ball_membership_examples() {
        let f = shrinking_ball();
        assert!(membership(&f, 0.0, &[1.0, 0.0]).unwrap());
        assert!(!membership(&f, 0.5, &[1.0, 0.0]).unwrap());
        assert!(membership(&f, 1.0, &[0.0, 0.0]).unwrap());
        // negative radius: empty, reported as such
        let s = f.slice(1.5).unwrap();
        assert!(s.empty);
        assert!(!membership(&f, 1.5, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn saddle_sublevel_membership() {
        let p = Polynomial::from_terms(2, &[(1.0, &[2, 0]), (-1.0, &[0, 2])]).unwrap();
        let f = SetFamily::sublevel(p, TimeFn::constant(0.0)).unwrap();
        assert!(membership(&f, 0.0, &[1.0, 2.0]).unwrap());
        assert!(!membership(&f, 0.0, &[2.0, 1.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let f = shrinking_ball();
        assert!(matches!(
            membership(&f, 0.0, &[0.0]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
        assert!(SetFamily::translate(f, TimeCurve::constant(&[1.0])).is_err());
    }

    #[test]
    fn translate_shifts_every_constraint() {
        let half = SetFamily::halfspace(TimeCurve::constant(&[-1.0, 0.0]), TimeFn::constant(0.0)).unwrap();
        let moved = SetFamily::translate(
            half,
            TimeCurve(vec![TimeFn::linear(0.0, 1.0), TimeFn::constant(0.0)]),
        )
        .unwrap();
        assert!(membership(&moved, 0.5, &[0.5, 3.0]).unwrap());
        assert!(!membership(&moved, 0.5, &[0.49, 3.0]).unwrap());
    }

    #[test]
    fn zero_normal_halfspace() {
        let whole = SetFamily::halfspace(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(1.0)).unwrap();
        assert!(membership(&whole, 0.0, &[1e6, -1e6]).unwrap());
        let none = SetFamily::halfspace(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(-1.0)).unwrap();
        assert!(none.slice(0.0).unwrap().empty);
    }

    #[test]
    fn domain_is_enforced() {
        let f = shrinking_ball().with_domain(0.0, 1.0).unwrap();
        assert!(matches!(f.slice(1.2), Err(GeometryError::OutOfDomain { .. })));
    }
}
