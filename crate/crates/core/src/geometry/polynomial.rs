use super::GeometryError;

/// One term `coeff * x_1^e_1 * ... * x_n^e_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Multivariate polynomial stored as a flat term list.
///
/// Derivatives are computed term-wise, so gradient and Hessian are exact up
/// to floating point rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidPolynomial(
                "dimension must be positive".into(),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.exponents.len() != dim {
                return Err(GeometryError::InvalidPolynomial(format!(
                    "term {i} has {} exponents, expected {dim}",
                    t.exponents.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(GeometryError::InvalidPolynomial(format!(
                    "term {i} has a non-finite coefficient"
                )));
            }
        }
        Ok(Polynomial { dim, terms })
    }

    /// Builds a polynomial from `(coeff, exponents)` pairs.
    pub fn from_terms(dim: usize, terms: &[(f64, &[u32])]) -> Result<Self, GeometryError> {
        Self::new(
            dim,
            terms
                .iter()
                .map(|(c, e)| Monomial {
                    coeff: *c,
                    exponents: e.to_vec(),
                })
                .collect(),
        )
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: Vec::new(),
        }
    }

    /// `sum_i weights[i] * x_i^2`
    pub fn weighted_squares(weights: &[f64]) -> Self {
        let n = weights.len();
        let terms = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let mut e = vec![0; n];
                e[i] = 2;
                Monomial {
                    coeff: w,
                    exponents: e,
                }
            })
            .collect();
        Polynomial { dim: n, terms }
    }

    /// `sum_i coeffs[i] * x_i + constant`
    pub fn affine(coeffs: &[f64], constant: f64) -> Self {
        let n = coeffs.len();
        let mut terms: Vec<Monomial> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| {
                let mut e = vec![0; n];
                e[i] = 1;
                Monomial {
                    coeff: c,
                    exponents: e,
                }
            })
            .collect();
        if constant != 0.0 {
            terms.push(Monomial {
                coeff: constant,
                exponents: vec![0; n],
            });
        }
        Polynomial { dim: n, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.coeff != 0.0)
            .map(|t| t.exponents.iter().sum())
            .max()
            .unwrap_or(0)
    }

    fn check(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Value at `x`. The caller guarantees `x.len() == self.dim()`.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exponents
                        .iter()
                        .zip(x)
                        .map(|(&e, &xi)| powu(xi, e))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut g = vec![0.0; self.dim];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let ei = t.exponents[i];
                if ei == 0 {
                    continue;
                }
                let mut v = t.coeff * f64::from(ei) * powu(x[i], ei - 1);
                for (j, (&ej, &xj)) in t.exponents.iter().zip(x).enumerate() {
                    if j != i {
                        v *= powu(xj, ej);
                    }
                }
                *gi += v;
            }
        }
        g
    }

    /// Row-major `dim x dim` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let n = self.dim;
        let mut h = vec![0.0; n * n];
        for t in &self.terms {
            for i in 0..n {
                for j in i..n {
                    let mut e = t.exponents.clone();
                    let mut c = t.coeff;
                    if e[i] == 0 {
                        continue;
                    }
                    c *= f64::from(e[i]);
                    e[i] -= 1;
                    if e[j] == 0 {
                        continue;
                    }
                    c *= f64::from(e[j]);
                    e[j] -= 1;
                    let v = c * e
                        .iter()
                        .zip(x)
                        .map(|(&ek, &xk)| powu(xk, ek))
                        .product::<f64>();
                    h[i * n + j] += v;
                    if i != j {
                        h[j * n + i] += v;
                    }
                }
            }
        }
        h
    }

    /// Checked evaluation of value and exact gradient.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), GeometryError> {
        self.check(x)?;
        Ok((self.value(x), self.gradient(x)))
    }
}

fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

/// Value and gradient of `p` at `x`.
pub fn poly_eval_grad(p: &Polynomial, x: &[f64]) -> Result<(f64, Vec<f64>), GeometryError> {
    p.eval_grad(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn saddle() -> Polynomial {
        Polynomial::from_terms(2, &[(1.0, &[2, 0]), (-1.0, &[0, 2])]).unwrap()
    }

    #[test]
    fn sum_of_squares_value_and_gradient() {
        let p = Polynomial::weighted_squares(&[1.0, 1.0]);
        let (v, g) = poly_eval_grad(&p, &[1.0, 2.0]).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(g, vec![2.0, 4.0]);
    }

    #[test]
    fn zero_polynomial() {
        let p = Polynomial::zero(3);
        let (v, g) = poly_eval_grad(&p, &[0.3, -2.0, 7.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn saddle_value_and_gradient() {
        let (v, g) = poly_eval_grad(&saddle(), &[3.0, 1.0]).unwrap();
        assert_eq!(v, 8.0);
        assert_eq!(g, vec![6.0, -2.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            poly_eval_grad(&saddle(), &[1.0]),
            Err(GeometryError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(Polynomial::from_terms(2, &[(1.0, &[1])]).is_err());
    }

    #[test]
    fn hessian_of_mixed_term() {
        // x^2 y + 3 y^3
        let p = Polynomial::from_terms(2, &[(1.0, &[2, 1]), (3.0, &[0, 3])]).unwrap();
        let h = p.hessian(&[2.0, -1.0]);
        // d2/dx2 = 2y, d2/dxdy = 2x, d2/dy2 = 18y
        assert_eq!(h, vec![-2.0, 4.0, 4.0, -18.0]);
    }

    fn random_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((-2.0f64..2.0, prop::collection::vec(0u32..4, 3)), 0..6)
            .prop_map(|terms| {
                Polynomial::new(
                    3,
                    terms
                        .into_iter()
                        .map(|(coeff, exponents)| Monomial { coeff, exponents })
                        .collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            p in random_poly(),
            x in prop::collection::vec(-1.5f64..1.5, 3),
        ) {
            let g = p.gradient(&x);
            let mut errs = Vec::new();
            for step in [1e-2, 1e-3, 1e-4] {
                let mut worst: f64 = 0.0;
                for i in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * step);
                    worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
                }
                errs.push(worst);
            }
            // central differences of a cubic-in-each-variable polynomial are O(step^2)
            prop_assert!(errs[2] <= 1e-6);
            prop_assert!(errs[2] <= errs[0] + 1e-9);
        }

        #[test]
        fn hessian_matches_gradient_differences(
            p in random_poly(),
            x in prop::collection::vec(-1.5f64..1.5, 3),
        ) {
            let h = p.hessian(&x);
            let step = 1e-5;
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += step;
                xm[j] -= step;
                let gp = p.gradient(&xp);
                let gm = p.gradient(&xm);
                for i in 0..3 {
                    let fd = (gp[i] - gm[i]) / (2.0 * step);
                    prop_assert!((fd - h[i * 3 + j]).abs() <= 1e-5 * (1.0 + fd.abs()));
                }
            }
        }
    }
}
