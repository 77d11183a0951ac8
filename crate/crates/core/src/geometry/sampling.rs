use super::region::random_direction;
use super::{GeometryError, Region, SetFamily, Slice, BOUNDARY_TOL};
use crate::linalg;
use crate::rng::StreamKey;

/// Output of [`sample_boundary`].
#[derive(Clone, Debug, Default)]
pub struct BoundarySample {
    pub points: Vec<Vec<f64>>,
    /// No point of `S(t)` was hit inside the region within the retry budget.
    pub possibly_empty: bool,
}

/// Interior hits from rejection sampling plus the boundary points reached
/// from them.
#[derive(Clone, Debug, Default)]
pub(crate) struct SliceSample {
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
    pub possibly_empty: bool,
}

const DIRECTION_TRIES: usize = 16;

fn attempt_budget(count: usize) -> usize {
    4096 + 64 * count
}

/// Up to `count` points of `S(t)` inside `region` that lie within
/// [`BOUNDARY_TOL`] of the complement of `S(t)`.
///
/// Rejection sampling finds interior seeds; each output point is then found
/// by bisection along a random ray from a seed until membership flips.
pub fn sample_boundary(
    family: &SetFamily,
    t: f64,
    region: &Region,
    count: usize,
    seed: u64,
) -> Result<BoundarySample, GeometryError> {
    if count == 0 {
        return Err(GeometryError::InvalidArgument("count must be at least 1".into()));
    }
    if region.dim() != family.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: family.dim(),
            found: region.dim(),
        });
    }
    let slice = family.slice(t)?;
    let key = StreamKey::new(seed, "geometry.sample_boundary").with_f64(t);
    let s = sample_slice(&slice, region, count, key);
    Ok(BoundarySample {
        points: s.boundary,
        possibly_empty: s.possibly_empty,
    })
}

pub(crate) fn sample_slice(slice: &Slice<'_>, region: &Region, count: usize, key: StreamKey) -> SliceSample {
    let mut out = SliceSample::default();
    if slice.empty {
        out.possibly_empty = true;
        return out;
    }
    let mut rng = key.rng();
    let budget = attempt_budget(count);
    let center = region.center();
    if slice.contains(&center) {
        out.interior.push(center);
    }
    for _ in 0..budget {
        if out.interior.len() >= count {
            break;
        }
        let p = region.sample(&mut rng);
        if slice.contains(&p) {
            out.interior.push(p);
        }
    }
    if out.interior.is_empty() {
        out.possibly_empty = true;
        return out;
    }
    let n = slice.dim;
    for i in 0..count {
        let p = &out.interior[i % out.interior.len()];
        for _ in 0..DIRECTION_TRIES {
            let d = random_direction(n, &mut rng);
            if let Some(b) = bisect_to_boundary(slice, region, p, &d) {
                out.boundary.push(b);
                break;
            }
        }
    }
    out
}

/// Walks from a member `p` along unit `d`; returns the last member point
/// before the set is left, if that happens inside the region.
pub(crate) fn bisect_to_boundary(slice: &Slice<'_>, region: &Region, p: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let s_max = region.exit_distance(p, d);
    let mut lo = 0.0;
    let mut hi = s_max;
    if slice.contains(&linalg::axpy(p, hi, d)) {
        // the boundary may sit exactly on the region edge
        let beyond = linalg::axpy(p, hi + BOUNDARY_TOL, d);
        if slice.contains(&beyond) {
            return None;
        }
        return Some(linalg::axpy(p, hi, d));
    }
    while hi - lo > BOUNDARY_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slice.contains(&linalg::axpy(p, mid, d)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(linalg::axpy(p, lo, d))
}
