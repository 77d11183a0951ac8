use std::io::{self, Write};

use crate::dynamics::fmt_f64 as fmt;
use crate::geometry::TimeWarp;

use super::{Pchip, TalwegProfile, VariationalError};

/// `Phi(r) = a + int_a^r phi` on knots and its inverse `Psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesingMap {
    pub a: f64,
    pub knots: Vec<f64>,
    /// Talweg values used for the quadrature (the head knot `a` repeats the
    /// first grid value).
    pub phi: Vec<f64>,
    pub big_phi: Vec<f64>,
    /// Richardson estimate `|Phi_h - Phi_2h| / 3` at shared knots.
    pub quad_error: f64,
    /// Fitted exponent of `phi ~ (r - a)^-beta` on the head interval.
    pub head_exponent: Option<f64>,
    psi: Pchip,
    forward: Pchip,
}

impl DesingMap {
    /// Domain of `Psi`: `[a, Phi(last knot)]`.
    pub fn s_domain(&self) -> (f64, f64) {
        self.psi.domain()
    }

    pub fn r_domain(&self) -> (f64, f64) {
        (self.a, *self.knots.last().expect("nonempty"))
    }

    pub fn big_phi_at(&self, r: f64) -> f64 {
        self.forward.eval(r)
    }

    pub fn psi(&self, s: f64) -> Result<f64, VariationalError> {
        let (lo, hi) = self.s_domain();
        if !(lo <= s && s <= hi) {
            return Err(VariationalError::OutsideMap { s, lo, hi });
        }
        Ok(self.psi.eval(s))
    }

    /// Talweg between knots, interpolated linearly in log-log coordinates
    /// (exact for power laws) and linearly where a value vanishes.
    pub fn phi_at(&self, r: f64) -> f64 {
        let k = self.knots.partition_point(|&v| v <= r);
        let n = self.knots.len();
        if k == 0 {
            return self.phi[0];
        }
        if k == n {
            return self.phi[n - 1];
        }
        let (r0, r1) = (self.knots[k - 1], self.knots[k]);
        let (p0, p1) = (self.phi[k - 1], self.phi[k]);
        let w = (r - r0) / (r1 - r0);
        if let (1, Some(beta)) = (k, self.head_exponent) {
            // fitted head between a and the first grid knot
            return p1 * ((r1 - self.a) / (r - self.a).max(f64::MIN_POSITIVE)).powf(beta);
        }
        if p0 > 0.0 && p1 > 0.0 && r0 > self.a {
            let lw = ((r - self.a) / (r0 - self.a)).ln() / ((r1 - self.a) / (r0 - self.a)).ln();
            (p0.ln() + lw * (p1 / p0).ln()).exp()
        } else {
            p0 + w * (p1 - p0)
        }
    }

    /// CSV with columns `r, Phi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,Phi")?;
        for (r, p) in self.knots.iter().zip(&self.big_phi) {
            writeln!(w, "{},{}", fmt(*r), fmt(*p))?;
        }
        Ok(())
    }
}

impl TimeWarp for DesingMap {
    fn warp(&self, s: f64) -> Option<f64> {
        self.psi(s).ok()
    }

    fn domain(&self) -> (f64, f64) {
        self.s_domain()
    }
}

/// Trapezoid sums along `r` starting from `start`.
fn cumulative(r: &[f64], phi: &[f64], start: f64) -> Vec<f64> {
    let mut out = vec![start];
    for i in 1..r.len() {
        let prev = out[i - 1];
        out.push(prev + 0.5 * (phi[i - 1] + phi[i]) * (r[i] - r[i - 1]));
    }
    out
}

/// Builds `Phi` by trapezoid quadrature of the talweg from `a` and `Psi`
/// by monotone cubic inversion.
///
/// When `a` is not a grid point the head integral from `a` to the next knot
/// uses a power law `phi ~ (r - a)^-beta` fitted on the two knots after `a`,
/// which captures integrable blow-up at `a`.
pub fn desingularize(profile: &TalwegProfile, a: f64) -> Result<DesingMap, VariationalError> {
    let n = profile.len();
    if n < 2 {
        return Err(VariationalError::InvalidArgument("profile needs at least two knots".into()));
    }
    if !a.is_finite() {
        return Err(VariationalError::InvalidArgument("a must be finite".into()));
    }
    let first = profile.r_grid.partition_point(|&r| r < a);
    if first >= n {
        return Err(VariationalError::InvalidArgument(format!("a = {a} is beyond the profile")));
    }
    for i in first..n {
        if profile.infinite[i] {
            return Err(VariationalError::UnremovableSingularity { r: profile.r_grid[i] });
        }
    }
    let mut knots: Vec<f64> = profile.r_grid[first..].to_vec();
    let mut phi: Vec<f64> = profile.phi[first..].to_vec();
    let mut head_exponent = None;
    let head_inserted = knots[0] != a;
    let mut big_phi;
    if !head_inserted {
        big_phi = cumulative(&knots, &phi, a);
    } else {
        let (r1, p1) = (knots[0], phi[0]);
        let mut head = p1 * (r1 - a);
        if knots.len() >= 2 && p1 > 0.0 && phi[1] > 0.0 {
            let beta = (-(phi[1] / p1).ln() / ((knots[1] - a) / (r1 - a)).ln()).clamp(0.0, 0.95);
            head_exponent = Some(beta);
            head /= 1.0 - beta;
        }
        big_phi = cumulative(&knots, &phi, a + head);
        knots.insert(0, a);
        phi.insert(0, p1);
        big_phi.insert(0, a);
    }

    // Richardson: compare with every other knot past the head
    let start = usize::from(head_inserted);
    let fine = &big_phi[start..];
    let coarse_r: Vec<f64> = knots[start..].iter().step_by(2).copied().collect();
    let coarse_p: Vec<f64> = phi[start..].iter().step_by(2).copied().collect();
    let coarse = cumulative(&coarse_r, &coarse_p, fine[0]);
    let quad_error = coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .map(|(c, f)| (c - f).abs() / 3.0)
        .fold(0.0, f64::max);

    // Psi needs strictly increasing Phi; plateaus (phi = 0) keep their first knot
    let mut s_knots = Vec::with_capacity(knots.len());
    let mut r_knots = Vec::with_capacity(knots.len());
    for (r, s) in knots.iter().zip(&big_phi) {
        if s_knots.last().is_none_or(|&last| *s > last) {
            s_knots.push(*s);
            r_knots.push(*r);
        }
    }
    let psi = Pchip::new(s_knots, r_knots).ok_or_else(|| {
        VariationalError::InvalidArgument("talweg vanishes on the whole window; Phi is constant".into())
    })?;
    let forward = Pchip::new(knots.clone(), big_phi.clone())
        .ok_or_else(|| VariationalError::InvalidArgument("non-finite quadrature".into()))?;
    Ok(DesingMap {
        a,
        knots,
        phi,
        big_phi,
        quad_error,
        head_exponent,
        psi,
        forward,
    })
}
