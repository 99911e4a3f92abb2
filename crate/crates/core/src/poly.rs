//! Dense univariate polynomials in the monomial basis.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::Scalar;

/// `Σ_k coeffs[k] x^k`. Trailing zeros are trimmed, so the zero polynomial
/// has an empty coefficient list.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| *c == T::zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = T::one();
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> T {
        self.coeffs.last().copied().unwrap_or_else(T::zero)
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * T::from_count(k))
            .collect();
        Self::new(coeffs)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Horner evaluation with a square matrix argument.
    pub fn eval_matrix(&self, m: &DMatrix<T>) -> DMatrix<T> {
        assert!(m.is_square(), "matrix argument must be square");
        let n = m.nrows();
        let mut acc = DMatrix::zeros(n, n);
        for &c in self.coeffs.iter().rev() {
            acc = &acc * m;
            for i in 0..n {
                acc[(i, i)] += c;
            }
        }
        acc
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;

    fn add(self, rhs: Self) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Sub for &Poly<T> {
    type Output = Poly<T>;

    fn sub(self, rhs: Self) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;

    fn mul(self, rhs: Self) -> Poly<T> {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl<T: Scalar> Neg for &Poly<T> {
    type Output = Poly<T>;

    fn neg(self) -> Poly<T> {
        self.scale(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Poly::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Poly::<f64>::new(vec![0.0]).is_zero());
    }

    #[test]
    fn derivative_and_eval() {
        // V = x^4/4 + x^2/2
        let v = Poly::new(vec![0.0, 0.0, 0.5, 0.0, 0.25]);
        assert_eq!(v.derivative().eval(1.0), 2.0);
        assert_eq!(v.derivative().derivative().eval(1.0), 4.0);
        assert_eq!(v.derivative().derivative().derivative().eval(2.0), 12.0);
    }

    #[test]
    fn product_matches_pointwise() {
        let a = Poly::new(vec![1.0, -2.0, 3.0]);
        let b = Poly::new(vec![0.5, 0.0, 0.0, 1.0]);
        let c = &a * &b;
        for x in [-1.5f64, 0.0, 0.3, 2.0] {
            assert!((c.eval(x) - a.eval(x) * b.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_horner_on_diagonal() {
        let p = Poly::new(vec![1.0, 0.0, 2.0]);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let pm = p.eval_matrix(&m);
        assert_eq!(pm[(0, 0)], 3.0);
        assert_eq!(pm[(1, 1)], 9.0);
        assert_eq!(pm[(2, 2)], 19.0);
        assert_eq!(pm[(0, 1)], 0.0);
    }
}
