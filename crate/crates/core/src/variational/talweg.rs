use std::io::{self, Write};

use crate::dynamics::fmt_f64 as fmt;
use crate::geometry::{sample_boundary, Region, SetFamily};

use super::{lip_estimate_with, LipOptions, VariationalError};

/// Sampled talweg `phi(r) = sup { lip S(r|x) : x in S(r) ∩ U }`.
#[derive(Clone, Debug, PartialEq)]
pub struct TalwegProfile {
    pub r_grid: Vec<f64>,
    /// Finite part of `phi`; check `infinite` before use.
    pub phi: Vec<f64>,
    pub infinite: Vec<bool>,
    /// No boundary point of `S(r) ∩ U` was found.
    pub empty: Vec<bool>,
    /// Boundary point realizing the maximum.
    pub witnesses: Vec<Option<Vec<f64>>>,
}

impl TalwegProfile {
    pub fn len(&self) -> usize {
        self.r_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_grid.is_empty()
    }

    /// Profile given by a closed form, useful for quadrature checks.
    pub fn from_fn(r_grid: Vec<f64>, phi: impl Fn(f64) -> f64) -> Self {
        let n = r_grid.len();
        TalwegProfile {
            phi: r_grid.iter().map(|&r| phi(r)).collect(),
            r_grid,
            infinite: vec![false; n],
            empty: vec![false; n],
            witnesses: vec![None; n],
        }
    }

    /// CSV with columns `r, phi, w_1..w_n`; infinite knots print `inf`,
    /// empty knots leave the witness blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.witnesses.iter().flatten().map(Vec::len).next().unwrap_or(0);
        let mut header = vec!["r".to_string(), "phi".to_string()];
        header.extend((1..=dim).map(|i| format!("w_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![fmt(self.r_grid[i])];
            row.push(if self.infinite[i] { "inf".into() } else { fmt(self.phi[i]) });
            match &self.witnesses[i] {
                Some(p) => row.extend(p.iter().map(|&v| fmt(v))),
                None => row.extend(std::iter::repeat(String::new()).take(dim)),
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Talweg over `r_grid` with `samples` boundary points per knot.
pub fn talweg_profile(
    family: &SetFamily,
    region: &Region,
    r_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<TalwegProfile, VariationalError> {
    talweg_profile_with(family, region, r_grid, samples, seed, &LipOptions::default())
}

pub fn talweg_profile_with(
    family: &SetFamily,
    region: &Region,
    r_grid: &[f64],
    samples: usize,
    seed: u64,
    lip: &LipOptions,
) -> Result<TalwegProfile, VariationalError> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(VariationalError::InvalidArgument(
            "r_grid must be nonempty and strictly increasing".into(),
        ));
    }
    let lip = LipOptions { seed, ..lip.clone() };
    let mut out = TalwegProfile {
        r_grid: r_grid.to_vec(),
        phi: Vec::new(),
        infinite: Vec::new(),
        empty: Vec::new(),
        witnesses: Vec::new(),
    };
    for &r in r_grid {
        let bs = sample_boundary(family, r, region, samples, seed)?;
        let mut best: Option<(f64, bool, Vec<f64>)> = None;
        for p in &bs.points {
            let l = lip_estimate_with(family, r, p, &lip)?;
            let better = match &best {
                None => true,
                Some((v, inf, _)) => !inf && (l.infinite || l.value > *v),
            };
            if better {
                best = Some((l.value, l.infinite, p.clone()));
            }
        }
        match best {
            Some((v, inf, w)) => {
                out.phi.push(v);
                out.infinite.push(inf);
                out.empty.push(false);
                out.witnesses.push(Some(w));
            }
            None => {
                out.phi.push(0.0);
                out.infinite.push(false);
                out.empty.push(true);
                out.witnesses.push(None);
            }
        }
    }
    if out.empty.iter().all(|&e| e) {
        return Err(VariationalError::AllEmpty);
    }
    Ok(out)
}

/// `n` points from `a` to `b` with constant ratio.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let q = (b / a).powf(1.0 / (n - 1) as f64);
    let mut g: Vec<f64> = (0..n).map(|i| a * q.powi(i as i32)).collect();
    g[n - 1] = b;
    g
}
