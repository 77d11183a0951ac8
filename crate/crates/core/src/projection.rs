//! Nearest-point projection onto a slice `S(t)` and proximal normals.
//!
//! Balls and half-spaces use closed forms, intersections of half-spaces use
//! exact active-set enumeration, and sublevel sets use a damped Newton solve
//! of the KKT system started from several boundary samples. Mixed
//! intersections run Dykstra's alternating projections and polish the limit
//! with a KKT solve on the active constraints.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::{
    sample_slice, Constraint, GeometryError, Region, SetFamily, Slice,
    BOUNDARY_TOL,
};
use crate::linalg;
use crate::rng::StreamKey;

/// Constraints with `g / |grad g|` above `-ACTIVE_TOL` count as active.
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("S({t}) is empty")]
    EmptySet { t: f64 },
    #[error("vanishing normal at a boundary point (variationally critical)")]
    SingularNormal,
    #[error("point is not on the set (gap {gap:e})")]
    NotOnSet { gap: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug)]
pub struct ProjectionOptions {
    /// Multistart count for nonconvex sublevel projections.
    pub starts: usize,
    /// Stationarity residual accepted as converged.
    pub kkt_tol: f64,
    /// Newton steps per start.
    pub max_newton: usize,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            starts: 8,
            kkt_tol: 1e-10,
            max_newton: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    pub distance: f64,
    /// `(x - point) / distance`, absent when the input was already in the set.
    pub normal: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl ProjectionResult {
    fn from_point(x: &[f64], point: Vec<f64>, converged: bool, iterations: usize) -> Self {
        let diff = linalg::sub(x, &point);
        let distance = linalg::norm(&diff);
        let normal = if distance > 0.0 {
            Some(linalg::scale(&diff, 1.0 / distance))
        } else {
            None
        };
        ProjectionResult {
            point,
            distance,
            normal,
            converged,
            iterations,
        }
    }
}

/// Projection with default options.
pub fn project(family: &SetFamily, t: f64, x: &[f64]) -> Result<ProjectionResult, ProjectionError> {
    project_with(family, t, x, &ProjectionOptions::default())
}

pub fn project_with(
    family: &SetFamily,
    t: f64,
    x: &[f64],
    opts: &ProjectionOptions,
) -> Result<ProjectionResult, ProjectionError> {
    if x.len() != family.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: family.dim(),
            found: x.len(),
        }
        .into());
    }
    let slice = family.slice(t)?;
    let key = StreamKey::new(opts.seed, "projection").with_f64(t).with_point(x);
    project_slice(&slice, x, opts, key).map_err(|e| match e {
        ProjectionError::EmptySet { .. } => ProjectionError::EmptySet { t },
        other => other,
    })
}

pub(crate) fn project_slice(
    slice: &Slice<'_>,
    x: &[f64],
    opts: &ProjectionOptions,
    key: StreamKey,
) -> Result<ProjectionResult, ProjectionError> {
    if slice.empty {
        return Err(ProjectionError::EmptySet { t: f64::NAN });
    }
    if slice.contains(x) {
        return Ok(ProjectionResult::from_point(x, x.to_vec(), true, 0));
    }
    let cs = &slice.constraints;
    let all_half = cs.iter().all(|c| matches!(c, Constraint::Halfspace { .. }));
    if all_half {
        return project_polytope(slice, x);
    }
    if cs.len() == 1 {
        return match &cs[0] {
            Constraint::Ball { center, radius } => {
                let y = ball_closed_form(center, *radius, x);
                let y = snap_inside(slice, y);
                Ok(ProjectionResult::from_point(x, y, true, 0))
            }
            Constraint::Sublevel { .. } => project_sublevel(slice, x, opts, key),
            Constraint::Halfspace { .. } => unreachable!("handled above"),
        };
    }
    project_mixed(slice, x, opts, key)
}

fn ball_closed_form(center: &[f64], radius: f64, x: &[f64]) -> Vec<f64> {
    let d = linalg::sub(x, center);
    match linalg::normalized(&d) {
        Some(u) => linalg::axpy(center, radius, &u),
        None => center.to_vec(),
    }
}

/// Pushes a nearly feasible point inside by tiny Newton corrections on the
/// violated constraints, so that exact membership holds.
fn snap_inside(slice: &Slice<'_>, mut y: Vec<f64>) -> Vec<f64> {
    let scale = 1.0 + linalg::norm(&y);
    for k in 0..80 {
        if slice.contains(&y) {
            return y;
        }
        let bump = f64::EPSILON * scale * 2f64.powi(k.min(40));
        for c in &slice.constraints {
            if c.contains(&y) {
                continue;
            }
            let g = c.value(&y);
            let grad = c.gradient(&y);
            let gn = linalg::norm(&grad);
            if gn == 0.0 {
                continue;
            }
            let step = g / (gn * gn) + bump / gn;
            y = linalg::axpy(&y, -step, &grad);
        }
    }
    y
}

// ---------------------------------------------------------------------------
// polytopes

const MAX_ACTIVE_SUBSETS: usize = 200_000;

fn project_polytope(slice: &Slice<'_>, x: &[f64]) -> Result<ProjectionResult, ProjectionError> {
    let facets: Vec<(&[f64], f64)> = slice
        .constraints
        .iter()
        .map(|c| match c {
            Constraint::Halfspace { normal, offset } => (normal.as_slice(), *offset),
            _ => unreachable!(),
        })
        .collect();
    if facets.len() == 1 {
        let (a, b) = facets[0];
        let y = linalg::axpy(x, -(linalg::dot(a, x) - b) / linalg::dot(a, a), a);
        let y = snap_inside(slice, y);
        return Ok(ProjectionResult::from_point(x, y, true, 0));
    }
    let n = x.len();
    let m = facets.len();
    let kmax = n.min(m);
    if subset_count(m, kmax) > MAX_ACTIVE_SUBSETS {
        return Err(GeometryError::InvalidFamily(format!(
            "{m} facets in dimension {n} exceed the active-set enumeration budget"
        ))
        .into());
    }
    let scale = 1.0 + linalg::norm(x);
    let feas_tol = 1e-10 * scale;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut tried = 0usize;
    for k in 1..=kmax {
        for subset in Combinations::new(m, k) {
            tried += 1;
            let Some(y) = equality_projection(&facets, &subset, x) else {
                continue;
            };
            let (y, lambda) = y;
            if lambda.iter().any(|&l| l < -feas_tol) {
                continue;
            }
            if facets
                .iter()
                .any(|(a, b)| linalg::dot(a, &y) - b > feas_tol * (1.0 + linalg::norm(a)))
            {
                continue;
            }
            let d = linalg::dist(x, &y);
            let better = match &best {
                None => true,
                Some((bd, by)) => d < *bd - 1e-12 * scale
                    || (d <= *bd + 1e-12 * scale && linalg::lex_cmp(&y, by).is_lt()),
            };
            if better {
                best = Some((d, y));
            }
        }
    }
    match best {
        Some((_, y)) => {
            let y = snap_inside(slice, y);
            Ok(ProjectionResult::from_point(x, y, true, tried))
        }
        None => Err(ProjectionError::EmptySet { t: f64::NAN }),
    }
}

/// Projection of `x` onto `{ a_i . y = b_i, i in subset }` and the multipliers.
fn equality_projection(facets: &[(&[f64], f64)], subset: &[usize], x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = subset.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for (r, &i) in subset.iter().enumerate() {
        let (ai, bi) = facets[i];
        rhs[r] = linalg::dot(ai, x) - bi;
        for (c, &j) in subset.iter().enumerate() {
            gram[(r, c)] = linalg::dot(ai, facets[j].0);
        }
    }
    // reject nearly dependent facet sets
    let det_scale: f64 = subset.iter().map(|&i| linalg::dot(facets[i].0, facets[i].0)).product();
    if gram.determinant().abs() <= 1e-12 * det_scale {
        return None;
    }
    let lambda = linalg::solve(gram, &rhs)?;
    let mut y = x.to_vec();
    for (r, &i) in subset.iter().enumerate() {
        y = linalg::axpy(&y, -lambda[r], facets[i].0);
    }
    Some((y, lambda))
}

fn subset_count(m: usize, kmax: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for k in 1..=kmax {
        c = c.saturating_mul(m + 1 - k) / k;
        total = total.saturating_add(c);
    }
    total
}

/// Lexicographic k-subsets of `0..m`.
struct Combinations {
    m: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(m: usize, k: usize) -> Self {
        Combinations {
            m,
            idx: (0..k).collect(),
            done: k > m,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.m - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// KKT Newton

#[derive(Clone, Debug)]
pub(crate) struct NewtonOutcome {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn kkt_residual(cs: &[&Constraint<'_>], x: &[f64], y: &[f64], lambda: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut f = linalg::sub(y, x);
    for (c, &l) in cs.iter().zip(lambda) {
        f = linalg::axpy(&f, l, &c.gradient(y));
    }
    f.extend(cs.iter().map(|c| c.value(y)));
    debug_assert_eq!(f.len(), n + cs.len());
    f
}

/// Damped Newton on `y - x + sum l_i grad g_i(y) = 0, g_i(y) = 0`.
pub(crate) fn kkt_newton(
    cs: &[&Constraint<'_>],
    x: &[f64],
    y0: Vec<f64>,
    lambda0: Vec<f64>,
    opts: &ProjectionOptions,
) -> NewtonOutcome {
    let n = x.len();
    let k = cs.len();
    let tol = opts.kkt_tol * (1.0 + linalg::norm(x));
    let mut y = y0;
    let mut lambda = lambda0;
    let mut f = kkt_residual(cs, x, &y, &lambda);
    let mut res = linalg::norm(&f);
    let mut it = 0;
    while it < opts.max_newton && res > tol {
        it += 1;
        let mut jac = DMatrix::zeros(n + k, n + k);
        for i in 0..n {
            jac[(i, i)] = 1.0;
        }
        for (c, &l) in cs.iter().zip(&lambda) {
            if l != 0.0 {
                let h = c.hessian(&y);
                for i in 0..n {
                    for j in 0..n {
                        jac[(i, j)] += l * h[i * n + j];
                    }
                }
            }
        }
        for (r, c) in cs.iter().enumerate() {
            let g = c.gradient(&y);
            for i in 0..n {
                jac[(i, n + r)] = g[i];
                jac[(n + r, i)] = g[i];
            }
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let Some(step) = linalg::solve(jac, &rhs) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-10 {
            let y_try: Vec<f64> = y.iter().zip(&step[..n]).map(|(a, s)| a + alpha * s).collect();
            let l_try: Vec<f64> = lambda.iter().zip(&step[n..]).map(|(a, s)| a + alpha * s).collect();
            let f_try = kkt_residual(cs, x, &y_try, &l_try);
            let r_try = linalg::norm(&f_try);
            if r_try.is_finite() && r_try < (1.0 - 1e-4 * alpha) * res {
                y = y_try;
                lambda = l_try;
                f = f_try;
                res = r_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonOutcome {
        converged: res <= tol,
        y,
        lambda,
        iterations: it,
    }
}

// ---------------------------------------------------------------------------
// sublevel sets

/// A boundary point of the slice reachable from the outside point `x`,
/// giving an upper bound on the distance.
fn boundary_point_near(slice: &Slice<'_>, x: &[f64], key: StreamKey) -> Option<Vec<f64>> {
    let c = &slice.constraints[0];
    let mut y = x.to_vec();
    let mut g = c.value(&y);
    // Newton on a convex g approaches the level from outside; aim a little below it
    let margin = 1e-12 * (1.0 + g.abs());
    for _ in 0..60 {
        if slice.contains(&y) {
            return Some(bisect_segment(slice, x, &y));
        }
        let grad = c.gradient(&y);
        let gn2 = linalg::dot(&grad, &grad);
        if gn2 == 0.0 || !gn2.is_finite() {
            break;
        }
        let mut step = (g + margin) / gn2;
        let mut moved = false;
        for _ in 0..40 {
            let y_try = linalg::axpy(&y, -step, &grad);
            let g_try = c.value(&y_try);
            if g_try < g {
                y = y_try;
                g = g_try;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if slice.contains(&y) {
        return Some(bisect_segment(slice, x, &y));
    }
    // descent stalled (critical point above the level): random search
    let mut half = 1.0 + linalg::norm(x);
    for round in 0..24 {
        let region = Region::cube(x, half).ok()?;
        let s = sample_slice(slice, &region, 4, key.with(1000 + round));
        if let Some(p) = s
            .interior
            .iter()
            .min_by(|a, b| linalg::dist(x, a).total_cmp(&linalg::dist(x, b)))
        {
            return Some(bisect_segment(slice, x, p));
        }
        half *= 2.0;
    }
    None
}

/// Boundary point on the segment from outside `out` to member `inside`.
fn bisect_segment(slice: &Slice<'_>, out: &[f64], inside: &[f64]) -> Vec<f64> {
    let d = linalg::sub(out, inside);
    let len = linalg::norm(&d);
    if len == 0.0 {
        return inside.to_vec();
    }
    let u = linalg::scale(&d, 1.0 / len);
    let (mut lo, mut hi) = (0.0, len);
    while hi - lo > BOUNDARY_TOL * 1e-3 * (1.0 + len) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slice.contains(&linalg::axpy(inside, mid, &u)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    linalg::axpy(inside, lo, &u)
}

struct Candidate {
    point: Vec<f64>,
    distance: f64,
    converged: bool,
}

fn pick_best(x: &[f64], mut cands: Vec<Candidate>) -> Option<Candidate> {
    let any_conv = cands.iter().any(|c| c.converged);
    if any_conv {
        cands.retain(|c| c.converged);
    }
    let scale = 1.0 + linalg::norm(x);
    let dmin = cands.iter().map(|c| c.distance).fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|c| c.distance <= dmin + 1e-9 * scale)
        .min_by(|a, b| linalg::lex_cmp(&a.point, &b.point))
}

fn project_sublevel(
    slice: &Slice<'_>,
    x: &[f64],
    opts: &ProjectionOptions,
    key: StreamKey,
) -> Result<ProjectionResult, ProjectionError> {
    let c = &slice.constraints[0];
    let Some(b) = boundary_point_near(slice, x, key.with(1)) else {
        return Err(ProjectionError::EmptySet { t: f64::NAN });
    };
    let d_ub = linalg::dist(x, &b);
    let mut starts = vec![b.clone()];
    if opts.starts > 1 {
        let radius = 2.0 * d_ub + 1e-12 * (1.0 + linalg::norm(x));
        if let Ok(region) = Region::new_ball(x.to_vec(), radius) {
            let s = sample_slice(slice, &region, opts.starts - 1, key.with(2));
            starts.extend(s.boundary);
        }
    }
    let grad_x = c.gradient(x);
    let mut cands = vec![Candidate {
        point: b.clone(),
        distance: d_ub,
        converged: false,
    }];
    let mut iterations = 0;
    for y0 in starts {
        let gy = linalg::norm(&c.gradient(&y0));
        let gx = linalg::norm(&grad_x);
        let dist0 = linalg::dist(x, &y0);
        let lambda0 = if gy > 0.0 {
            dist0 / gy
        } else if gx > 0.0 {
            dist0 / gx
        } else {
            1.0
        };
        let out = kkt_newton(&[c], x, y0, vec![lambda0], opts);
        iterations += out.iterations;
        if !out.y.iter().all(|v| v.is_finite()) {
            continue;
        }
        let lam_ok = out.lambda[0] >= -opts.kkt_tol;
        let y = snap_inside(slice, out.y);
        if !slice.contains(&y) {
            continue;
        }
        let distance = linalg::dist(x, &y);
        cands.push(Candidate {
            point: y,
            distance,
            converged: out.converged && lam_ok,
        });
    }
    let best = pick_best(x, cands).expect("the bracketing boundary point is always a candidate");
    Ok(ProjectionResult::from_point(
        x,
        best.point,
        best.converged,
        iterations,
    ))
}

// ---------------------------------------------------------------------------
// mixed intersections

fn project_single(
    slice: &Slice<'_>,
    c: &Constraint<'_>,
    x: &[f64],
    opts: &ProjectionOptions,
    key: StreamKey,
) -> Result<Vec<f64>, ProjectionError> {
    let single = Slice {
        dim: slice.dim,
        constraints: vec![c.clone()],
        empty: false,
    };
    Ok(project_slice(&single, x, opts, key)?.point)
}

/// Least-squares multipliers `l >= 0` for `x - y = sum l_i grad g_i(y)` over
/// the active constraints, and the resulting stationarity residual.
pub(crate) fn stationarity(cs: &[&Constraint<'_>], x: &[f64], y: &[f64]) -> (Vec<usize>, Vec<f64>, f64) {
    let target = linalg::sub(x, y);
    let mut active: Vec<usize> = (0..cs.len())
        .filter(|&i| cs[i].boundary_gap(y) >= -ACTIVE_TOL)
        .collect();
    loop {
        let grads: Vec<Vec<f64>> = active.iter().map(|&i| cs[i].gradient(y)).collect();
        let k = grads.len();
        let lambda = if k == 0 {
            Vec::new()
        } else {
            let mut gram = DMatrix::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for r in 0..k {
                rhs[r] = linalg::dot(&grads[r], &target);
                for c in 0..k {
                    gram[(r, c)] = linalg::dot(&grads[r], &grads[c]);
                }
                gram[(r, r)] += 1e-14;
            }
            linalg::solve(gram, &rhs).unwrap_or_else(|| vec![0.0; k])
        };
        if let Some(neg) = lambda.iter().position(|&l| l < 0.0) {
            active.remove(neg);
            continue;
        }
        let mut r = target.clone();
        for (g, &l) in grads.iter().zip(&lambda) {
            r = linalg::axpy(&r, -l, g);
        }
        return (active, lambda, linalg::norm(&r));
    }
}

fn project_mixed(
    slice: &Slice<'_>,
    x: &[f64],
    opts: &ProjectionOptions,
    key: StreamKey,
) -> Result<ProjectionResult, ProjectionError> {
    let cs = &slice.constraints;
    let m = cs.len();
    let n = x.len();
    let scale = 1.0 + linalg::norm(x);
    // Dykstra
    let mut y = x.to_vec();
    let mut incr = vec![vec![0.0; n]; m];
    let mut iterations = 0;
    for sweep in 0..2000 {
        iterations = sweep + 1;
        let prev = y.clone();
        for (i, c) in cs.iter().enumerate() {
            let z = linalg::add(&y, &incr[i]);
            let p = project_single(slice, c, &z, opts, key.with(sweep as u64 * 64 + i as u64))?;
            incr[i] = linalg::sub(&z, &p);
            y = p;
        }
        if linalg::dist(&prev, &y) <= 1e-14 * scale {
            break;
        }
    }
    let refs: Vec<&Constraint<'_>> = cs.iter().collect();
    let (active, lambda, _) = stationarity(&refs, x, &y);
    let act_refs: Vec<&Constraint<'_>> = active.iter().map(|&i| refs[i]).collect();
    if !act_refs.is_empty() {
        let polished = kkt_newton(&act_refs, x, y.clone(), lambda, opts);
        iterations += polished.iterations;
        if polished.converged && polished.lambda.iter().all(|&l| l >= -opts.kkt_tol) {
            let cand = snap_inside(slice, polished.y);
            if slice.contains(&cand) {
                y = cand;
            }
        }
    }
    let y = snap_inside(slice, y);
    if !slice.contains(&y) {
        // alternating projections never reached a common point
        let worst = cs.iter().map(|c| c.boundary_gap(&y)).fold(0.0, f64::max);
        if worst > 1e-6 * scale {
            return Err(ProjectionError::EmptySet { t: f64::NAN });
        }
        return Ok(ProjectionResult::from_point(x, y, false, iterations));
    }
    let (_, _, res) = stationarity(&refs, x, &y);
    let converged = res < opts.kkt_tol * scale * 10.0;
    Ok(ProjectionResult::from_point(x, y, converged, iterations))
}

// ---------------------------------------------------------------------------
// normals

/// Unit generator of the proximal normal cone at a point of `S(t)`, or the
/// zero vector at interior points.
pub fn proximal_normal(family: &SetFamily, t: f64, x_on_set: &[f64]) -> Result<Vec<f64>, ProjectionError> {
    if x_on_set.len() != family.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: family.dim(),
            found: x_on_set.len(),
        }
        .into());
    }
    let slice = family.slice(t)?;
    if slice.empty {
        return Err(ProjectionError::EmptySet { t });
    }
    let mut sum = vec![0.0; family.dim()];
    let mut any = false;
    for c in &slice.constraints {
        let gap = c.boundary_gap(x_on_set);
        if gap > BOUNDARY_TOL * 10.0 {
            return Err(ProjectionError::NotOnSet { gap });
        }
        if gap < -ACTIVE_TOL {
            continue;
        }
        let grad = c.gradient(x_on_set);
        let Some(u) = linalg::normalized(&grad) else {
            return Err(ProjectionError::SingularNormal);
        };
        sum = linalg::add(&sum, &u);
        any = true;
    }
    if !any {
        return Ok(vec![0.0; family.dim()]);
    }
    linalg::normalized(&sum).ok_or(ProjectionError::SingularNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{membership, MovingHalfspace, Polynomial, TimeCurve, TimeFn};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_ball() -> SetFamily {
        SetFamily::ball(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(1.0)).unwrap()
    }

    fn half_ge(c: f64) -> SetFamily {
        // x1 >= c
        SetFamily::halfspace(TimeCurve::constant(&[-1.0, 0.0]), TimeFn::constant(-c)).unwrap()
    }

    fn disk_sublevel() -> SetFamily {
        SetFamily::sublevel(Polynomial::weighted_squares(&[1.0, 1.0]), TimeFn::constant(1.0)).unwrap()
    }

    fn cone() -> SetFamily {
        SetFamily::sublevel(
            Polynomial::from_terms(2, &[(1.0, &[2, 0]), (-1.0, &[0, 2])]).unwrap(),
            TimeFn::constant(0.0),
        )
        .unwrap()
    }

    fn square() -> SetFamily {
        let facet = |a: [f64; 2], b: f64| MovingHalfspace {
            normal: TimeCurve::constant(&a),
            offset: TimeFn::constant(b),
        };
        SetFamily::polytope(
            2,
            vec![
                facet([1.0, 0.0], 1.0),
                facet([-1.0, 0.0], 0.0),
                facet([0.0, 1.0], 1.0),
                facet([0.0, -1.0], 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ball_projection() {
        let r = project(&unit_ball(), 0.0, &[2.0, 0.0]).unwrap();
        assert_eq!(r.point, vec![1.0, 0.0]);
        assert_eq!(r.distance, 1.0);
        assert_eq!(r.normal, Some(vec![1.0, 0.0]));
        assert!(r.converged);
    }

    #[test]
    fn halfspace_projection() {
        let r = project(&half_ge(0.5), 0.0, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-15);
        assert_eq!(r.point[1], 0.0);
        assert_abs_diff_eq!(r.distance, 0.5, epsilon = 1e-15);
        let n = r.normal.unwrap();
        assert_abs_diff_eq!(n[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn disk_sublevel_radial_projection() {
        let r = project(&disk_sublevel(), 0.0, &[3.0, 4.0]).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.point[0], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(r.point[1], 0.8, epsilon = 1e-9);
        assert_abs_diff_eq!(r.distance, 4.0, epsilon = 1e-9);
        assert!(membership(&disk_sublevel(), 0.0, &r.point).unwrap());
    }

    /// Grid oracle over `[-2,2]^2`, independent of the Newton path.
    fn grid_distance(f: &SetFamily, x: &[f64], cells: usize) -> (f64, Vec<f64>) {
        let step = 4.0 / (cells - 1) as f64;
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        for i in 0..cells {
            for j in 0..cells {
                let p = [-2.0 + i as f64 * step, -2.0 + j as f64 * step];
                if membership(f, 0.0, &p).unwrap() {
                    let d = linalg::dist(x, &p);
                    if d < best.0 {
                        best = (d, p.to_vec());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn cone_projection_matches_grid_oracle() {
        let r = project(&cone(), 0.0, &[1.0, 0.0]).unwrap();
        let (gd, _) = grid_distance(&cone(), &[1.0, 0.0], 2001);
        let cell = 4.0 / 2000.0 * 2f64.sqrt();
        assert!(r.converged);
        assert!((r.distance - gd).abs() <= cell);
        assert_abs_diff_eq!(r.distance, 0.5f64.sqrt(), epsilon = 1e-9);
        // lexicographic tie-break between (0.5, 0.5) and (0.5, -0.5)
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(r.point[1], -0.5, epsilon = 1e-9);
    }

    #[test]
    fn proximal_normal_examples() {
        assert_eq!(proximal_normal(&unit_ball(), 0.0, &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let n = proximal_normal(&disk_sublevel(), 0.0, &[0.6, 0.8]).unwrap();
        assert_abs_diff_eq!(n[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(n[1], 0.8, epsilon = 1e-12);
        assert_eq!(
            proximal_normal(&cone(), 0.0, &[0.0, 0.0]),
            Err(ProjectionError::SingularNormal)
        );
        assert_eq!(proximal_normal(&unit_ball(), 0.0, &[0.1, 0.2]).unwrap(), vec![0.0, 0.0]);
        let n = proximal_normal(&half_ge(0.5), 0.0, &[0.5, 7.0]).unwrap();
        assert_eq!(n, vec![-1.0, 0.0]);
        assert!(matches!(
            proximal_normal(&unit_ball(), 0.0, &[2.0, 0.0]),
            Err(ProjectionError::NotOnSet { .. })
        ));
    }

    #[test]
    fn empty_sets_are_errors() {
        let f = SetFamily::ball(TimeCurve::constant(&[0.0, 0.0]), TimeFn::constant(-1.0)).unwrap();
        assert_eq!(
            project(&f, 0.3, &[1.0, 0.0]),
            Err(ProjectionError::EmptySet { t: 0.3 })
        );
        let g = SetFamily::sublevel(Polynomial::weighted_squares(&[1.0, 1.0]), TimeFn::constant(-1.0)).unwrap();
        assert!(matches!(project(&g, 0.0, &[1.0, 1.0]), Err(ProjectionError::EmptySet { .. })));
        let disjoint = SetFamily::polytope(
            1,
            vec![
                MovingHalfspace { normal: TimeCurve::constant(&[1.0]), offset: TimeFn::constant(0.0) },
                MovingHalfspace { normal: TimeCurve::constant(&[-1.0]), offset: TimeFn::constant(-1.0) },
            ],
        )
        .unwrap();
        assert!(matches!(project(&disjoint, 0.0, &[3.0]), Err(ProjectionError::EmptySet { .. })));
    }

    #[test]
    fn square_projection_hits_corner_and_edge() {
        let r = project(&square(), 0.0, &[2.0, 2.0]).unwrap();
        assert_eq!(r.point, vec![1.0, 1.0]);
        let r = project(&square(), 0.0, &[0.5, 2.0]).unwrap();
        assert_eq!(r.point, vec![0.5, 1.0]);
        let r = project(&square(), 0.0, &[0.5, 0.5]).unwrap();
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn mixed_intersection_of_ball_and_halfspace() {
        let f = SetFamily::intersection(2, vec![unit_ball(), half_ge(0.5)]).unwrap();
        // nearest point of the cap {|y|<=1, y1>=0.5} to (0,2) is the corner (0.5, sqrt(0.75))
        let r = project(&f, 0.0, &[0.0, 2.0]).unwrap();
        assert!(r.converged, "{r:?}");
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(r.point[1], 0.75f64.sqrt(), epsilon = 1e-8);
        // a point whose projection lies on the arc only
        let r = project(&f, 0.0, &[2.0, 0.5]).unwrap();
        let expect = linalg::normalized(&[2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(r.point[0], expect[0], epsilon = 1e-8);
        assert_abs_diff_eq!(r.point[1], expect[1], epsilon = 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn translated_sublevel() {
        let f = SetFamily::translate(disk_sublevel(), TimeCurve::constant(&[5.0, 0.0])).unwrap();
        let r = project(&f, 0.0, &[8.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.point[0], 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.distance, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn proximal_normal_ball_excludes_set() {
        // sampled check: the ball of radius d/2 around point + (d/2) normal
        // meets S only at the projected point
        let cases = [(cone(), vec![1.0, 0.0]), (disk_sublevel(), vec![1.5, -0.7]), (square(), vec![1.7, 0.4])];
        let mut rng = StreamKey::new(1, "test.normal").rng();
        for (f, x) in cases {
            let r = project(&f, 0.0, &x).unwrap();
            let n = r.normal.clone().unwrap();
            let rho = r.distance / 2.0;
            let c = linalg::axpy(&r.point, rho, &n);
            let region = Region::new_ball(c.clone(), rho).unwrap();
            for _ in 0..2000 {
                let p = region.sample(&mut rng);
                if linalg::dist(&p, &r.point) > 1e-6 {
                    assert!(!membership(&f, 0.0, &p).unwrap(), "{p:?} in set");
                }
            }
        }
    }

    fn random_point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_is_idempotent(x in random_point()) {
            for f in [unit_ball(), square(), disk_sublevel(), cone()] {
                let r = project(&f, 0.0, &x).unwrap();
                prop_assert!(membership(&f, 0.0, &r.point).unwrap());
                let again = project(&f, 0.0, &r.point).unwrap();
                prop_assert_eq!(again.distance, 0.0);
            }
        }

        #[test]
        fn convex_projection_is_nonexpansive(x in random_point(), y in random_point()) {
            for f in [unit_ball(), square(), half_ge(0.2)] {
                let px = project(&f, 0.0, &x).unwrap().point;
                let py = project(&f, 0.0, &y).unwrap().point;
                prop_assert!(linalg::dist(&px, &py) <= linalg::dist(&x, &y) + 1e-12);
            }
        }

        #[test]
        fn distance_beats_boundary_samples(x in random_point(), seed in 0u64..1000) {
            for f in [disk_sublevel(), cone(), square()] {
                let r = project(&f, 0.0, &x).unwrap();
                let region = Region::cube(&[0.0, 0.0], 3.0).unwrap();
                let s = crate::geometry::sample_boundary(&f, 0.0, &region, 16, seed).unwrap();
                for p in &s.points {
                    prop_assert!(r.distance <= linalg::dist(&x, p) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn grid_oracle_equivalence_on_2d_families() {
        let cell = 4.0 / 400.0 * 2f64.sqrt();
        let mut rng = StreamKey::new(2, "test.grid").rng();
        for f in [unit_ball(), square(), cone(), disk_sublevel()] {
            for _ in 0..5 {
                let x = Region::cube(&[0.0, 0.0], 1.9).unwrap().sample(&mut rng);
                let r = project(&f, 0.0, &x).unwrap();
                let (gd, _) = grid_distance(&f, &x, 401);
                assert!(r.distance <= gd + 1e-12, "{x:?}: {} vs {gd}", r.distance);
                assert!(gd - r.distance <= cell, "{x:?}: {} vs {gd}", r.distance);
            }
        }
    }
}
