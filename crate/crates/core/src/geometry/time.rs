use super::GeometryError;

/// Piecewise-polynomial scalar function of time.
///
/// `pieces[i]` holds ascending power coefficients in the absolute time `t`
/// and is active on `[breaks[i-1], breaks[i])`; the first piece extends to
/// `-inf` and the last to `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFn {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl TimeFn {
    pub fn constant(c: f64) -> Self {
        TimeFn {
            breaks: Vec::new(),
            pieces: vec![vec![c]],
        }
    }

    /// `c0 + c1 t`
    pub fn linear(c0: f64, c1: f64) -> Self {
        Self::poly(vec![c0, c1])
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        TimeFn {
            breaks: Vec::new(),
            pieces: vec![coeffs],
        }
    }

    pub fn piecewise(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if pieces.len() != breaks.len() + 1 {
            return Err(GeometryError::InvalidTimeFn(format!(
                "{} breaks need {} pieces, got {}",
                breaks.len(),
                breaks.len() + 1,
                pieces.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(GeometryError::InvalidTimeFn(
                "breaks must be finite and strictly increasing".into(),
            ));
        }
        if pieces.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidTimeFn(
                "coefficients must be finite".into(),
            ));
        }
        Ok(TimeFn { breaks, pieces })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= t);
        self.pieces[idx]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn is_constant(&self) -> bool {
        self.pieces.iter().all(|p| p.iter().skip(1).all(|&c| c == 0.0))
            && self
                .pieces
                .windows(2)
                .all(|w| w[0].first().copied().unwrap_or(0.0) == w[1].first().copied().unwrap_or(0.0))
    }
}

/// A point-valued function of time, one [`TimeFn`] per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeCurve(pub Vec<TimeFn>);

impl TimeCurve {
    pub fn constant(p: &[f64]) -> Self {
        TimeCurve(p.iter().map(|&c| TimeFn::constant(c)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|f| f.eval(t)).collect()
    }
}
