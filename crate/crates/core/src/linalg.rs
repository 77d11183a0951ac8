//! Small dense vector helpers over `&[f64]`.
//!
//! Points live in low dimension (at most 8), so plain slices are used
//! everywhere and `nalgebra` is only pulled in for linear solves.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    match a {
        [x] => x.abs(),
        _ => dot(a, a).sqrt(),
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Unit vector in the direction of `a`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Lexicographic comparison used for deterministic tie-breaking.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Solves the dense square system `m * x = rhs`; `None` when singular.
pub fn solve(m: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let b = DVector::from_column_slice(rhs);
    let lu = m.lu();
    let x = lu.solve(&b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Angle in radians between two nonzero vectors, robust near 0 and pi.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    let u: Vec<f64> = a.iter().map(|x| x / na).collect();
    let v: Vec<f64> = b.iter().map(|x| x / nb).collect();
    let s = norm(&sub(&u, &v));
    let c = norm(&add(&u, &v));
    2.0 * s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_is_accurate_for_tiny_angles() {
        let a = [1.0, 0.0];
        let b = [1.0, 1e-12];
        assert!((angle_between(&a, &b) - 1e-12).abs() < 1e-20);
        assert!((angle_between(&a, &[-1.0, 0.0]) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn singular_system_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(m, &[1.0, 1.0]).is_none());
    }
}
