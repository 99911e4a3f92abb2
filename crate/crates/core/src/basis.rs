//! Gauss rules of a measure and its orthonormal polynomial basis, with the
//! multiplication (Jacobi) and differentiation matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::Measure1D;
use crate::poly::Poly;
use crate::quadrature::golub_welsch;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureTarget<T> {
    /// Gauss rule of the probability measure (weights sum to one).
    Measure,
    /// Plain Lebesgue measure on `[a, b]`.
    Lebesgue { a: T, b: T },
}

#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub target: QuadratureTarget<T>,
    /// Highest polynomial degree integrated exactly.
    pub exactness: usize,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// `order`-point Gauss rule of `m`, exact for polynomials of degree
/// `2 order - 1`.
pub fn build_quadrature<T: Scalar>(m: &Measure1D<T>, order: usize) -> Result<QuadratureRule<T>> {
    if order < 1 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    let rec = m.recurrence();
    if order > rec.max_order() {
        return Err(Error::MomentOverflow(format!(
            "order {order} exceeds the degree cap {}",
            rec.max_order()
        )));
    }
    let (nodes, weights) = golub_welsch(&rec.alpha, &rec.off, order);
    if nodes.iter().chain(&weights).any(|v| !v.is_finite_value()) {
        return Err(Error::MomentOverflow(format!("non-finite Gauss rule at order {order}")));
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        target: QuadratureTarget::Measure,
        exactness: 2 * order - 1,
    })
}

/// Orthonormal polynomials `p_0, …, p_K` of `L₂(μ)`.
#[derive(Debug, Clone)]
pub struct PolyBasis<T> {
    measure: Measure1D<T>,
    max_degree: usize,
    /// Row `k` holds the monomial coefficients of `p_k`.
    coefficients: DMatrix<T>,
    multiplication: DMatrix<T>,
    differentiation: DMatrix<T>,
    quadrature: QuadratureRule<T>,
}

/// Gram residual above which a basis is rejected.
const ORTHOGONALITY_LIMIT: f64 = 1e-8;

pub fn build_basis<T: Scalar>(m: &Measure1D<T>, max_degree: usize) -> Result<PolyBasis<T>> {
    PolyBasis::new(m, max_degree)
}

impl<T: Scalar> PolyBasis<T> {
    pub fn new(m: &Measure1D<T>, max_degree: usize) -> Result<Self> {
        let k = max_degree;
        let rec = m.recurrence();
        // Rule of order K + 3 is exact to degree 2K + 5.
        if k + 3 > rec.max_order() {
            return Err(Error::MomentOverflow(format!(
                "basis degree {k} exceeds the degree cap {}",
                rec.max_order() - 3
            )));
        }
        let quadrature = build_quadrature(m, k + 3)?;
        let (alpha, off) = (&rec.alpha, &rec.off);

        let jacobi = DMatrix::from_fn(k + 1, k + 1, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                T::zero()
            }
        });

        let mut coefficients = DMatrix::zeros(k + 1, k + 1);
        coefficients[(0, 0)] = T::one();
        for n in 0..k {
            // p_{n+1} = ((x - a_n) p_n - b_n p_{n-1}) / b_{n+1}
            for c in 0..=n {
                let shifted = coefficients[(n, c)];
                coefficients[(n + 1, c + 1)] += shifted / off[n];
                coefficients[(n + 1, c)] -= alpha[n] * shifted / off[n];
                if n > 0 {
                    let prev = coefficients[(n - 1, c)];
                    coefficients[(n + 1, c)] -= off[n - 1] * prev / off[n];
                }
            }
        }

        // Column n of D holds the expansion of p_n'. Differentiating the
        // recurrence gives
        // b_{n+1} p_{n+1}' = (x - a_n) p_n' + p_n - b_n p_{n-1}'.
        let mut differentiation = DMatrix::zeros(k + 1, k + 1);
        for n in 0..k {
            let dn = differentiation.column(n).clone_owned();
            let xdn = &jacobi * &dn;
            for i in 0..=k {
                let mut v = xdn[i] - alpha[n] * dn[i];
                if n > 0 {
                    v -= off[n - 1] * differentiation[(i, n - 1)];
                }
                if i == n {
                    v += T::one();
                }
                differentiation[(i, n + 1)] = v / off[n];
            }
        }

        let basis = Self {
            measure: m.clone(),
            max_degree: k,
            coefficients,
            multiplication: jacobi,
            differentiation,
            quadrature,
        };
        let residual = basis.gram_residual();
        let limit = T::tol(ORTHOGONALITY_LIMIT);
        if residual > limit || !residual.is_finite_value() {
            return Err(Error::LossOfOrthogonality {
                residual: residual.as_f64(),
                limit: limit.as_f64(),
            });
        }
        Ok(basis)
    }

    pub fn measure(&self) -> &Measure1D<T> {
        &self.measure
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.max_degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coefficient_table(&self) -> &DMatrix<T> {
        &self.coefficients
    }

    /// `p_k` in the monomial basis.
    pub fn poly(&self, k: usize) -> Poly<T> {
        Poly::new(self.coefficients.row(k).iter().copied().collect())
    }

    /// Matrix of multiplication by `x` (truncated Jacobi matrix). Exact on
    /// inputs of degree `< K`.
    pub fn multiplication(&self) -> &DMatrix<T> {
        &self.multiplication
    }

    /// Matrix of `d/dx`: column `k` is the expansion of `p_k'`.
    pub fn differentiation(&self) -> &DMatrix<T> {
        &self.differentiation
    }

    pub fn quadrature(&self) -> &QuadratureRule<T> {
        &self.quadrature
    }

    /// `[p_0(x), …, p_K(x)]` by the recurrence.
    pub fn eval_all(&self, x: T) -> Vec<T> {
        let rec = self.measure.recurrence();
        let mut out = Vec::with_capacity(self.len());
        out.push(T::one());
        if self.max_degree == 0 {
            return out;
        }
        out.push((x - rec.alpha[0]) / rec.off[0]);
        for n in 1..self.max_degree {
            let next = ((x - rec.alpha[n]) * out[n] - rec.off[n - 1] * out[n - 1]) / rec.off[n];
            out.push(next);
        }
        out
    }

    pub fn eval(&self, k: usize, x: T) -> T {
        self.eval_all(x)[k]
    }

    /// Derivatives `[p_0'(x), …, p_K'(x)]`.
    pub fn eval_derivatives(&self, x: T) -> Vec<T> {
        let values = self.eval_all(x);
        (0..self.len())
            .map(|k| (0..self.len()).fold(T::zero(), |acc, i| acc + self.differentiation[(i, k)] * values[i]))
            .collect()
    }

    /// `max |G - I|` for the Gram matrix under the basis' own Gauss rule.
    pub fn gram_residual(&self) -> T {
        let n = self.len();
        let mut gram = DMatrix::<T>::zeros(n, n);
        for (&x, &w) in self.quadrature.nodes.iter().zip(&self.quadrature.weights) {
            let p = self.eval_all(x);
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += w * p[i] * p[j];
                }
            }
        }
        (gram - DMatrix::identity(n, n)).amax()
    }

    /// Coefficients of a polynomial of degree ≤ K in this basis (orthogonal
    /// projection for higher degrees).
    pub fn expand(&self, q: &Poly<T>) -> Result<Vec<T>> {
        let deg = q.degree().unwrap_or(0);
        let rule = build_quadrature(&self.measure, (deg + self.max_degree) / 2 + 1)?;
        let mut out = vec![T::zero(); self.len()];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = self.eval_all(x);
            let qx = q.eval(x);
            for (o, pk) in out.iter_mut().zip(&p) {
                *o += w * qx * *pk;
            }
        }
        Ok(out)
    }

    /// Matrix of multiplication by `q` compressed to the basis:
    /// `M[i][k] = ⟨p_i, q p_k⟩`, built as `q(J)` on a Jacobi matrix large
    /// enough that every retained entry is exact.
    pub fn multiplication_by(&self, q: &Poly<T>) -> Result<DMatrix<T>> {
        let extra = q.degree().unwrap_or(0);
        let size = self.len() + extra;
        let rec = self.measure.recurrence();
        if size > rec.max_order() {
            return Err(Error::DegreeOverflow(format!(
                "multiplication by a degree-{extra} polynomial needs degree {} > cap {}",
                size - 1,
                rec.max_order() - 1
            )));
        }
        let jacobi = DMatrix::from_fn(size, size, |i, j| {
            if i == j {
                rec.alpha[i]
            } else if i + 1 == j {
                rec.off[i]
            } else if j + 1 == i {
                rec.off[j]
            } else {
                T::zero()
            }
        });
        let full = q.eval_matrix(&jacobi);
        Ok(full.view((0, 0), (self.len(), self.len())).clone_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> Measure1D<f64> {
        Measure1D::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]).unwrap()
    }

    /// Gaussian moments by the double factorial: m_{2k} = (2k-1)!!.
    fn gaussian_moment(k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        (1..k).step_by(2).map(|j| j as f64).product()
    }

    #[test]
    fn gauss_hermite_moments() {
        let rule = build_quadrature(&Measure1D::<f64>::standard_gaussian(), 5).unwrap();
        for k in 0..=9 {
            let q = rule.integrate(|x| x.powi(k as i32));
            assert!((q - gaussian_moment(k)).abs() < 1e-10, "m_{k}: {q}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [Measure1D::standard_gaussian(), quartic()] {
            for order in [2, 5, 17, 40] {
                let rule = build_quadrature(&m, order).unwrap();
                let s: f64 = rule.weights.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "order {order}: {s}");
            }
        }
    }

    #[test]
    fn quartic_fourth_moment_is_stable_under_refinement() {
        let m = quartic();
        let a = build_quadrature(&m, 6).unwrap().integrate(|x| x.powi(4));
        let b = build_quadrature(&m, 12).unwrap().integrate(|x| x.powi(4));
        assert!((a - b).abs() < 1e-8);
        // cross-check against direct integration of the density
        let direct =
            crate::quadrature::CompositeRule::<f64>::new(-8.0, 8.0, 400).integrate(|x: f64| x.powi(4) * m.density(x));
        assert!((a - direct).abs() < 1e-10);
    }

    #[test]
    fn quadrature_order_cap() {
        let m = quartic();
        assert!(matches!(
            build_quadrature(&m, crate::measures::RECURRENCE_LEN + 1),
            Err(Error::MomentOverflow(_))
        ));
    }

    #[test]
    fn hermite_second_basis_polynomial() {
        // Gram–Schmidt of {1, x, x²} against Gaussian moments (1, 0, 1, 0, 3):
        // x² - ⟨x²,1⟩ = x² - 1, ‖x² - 1‖² = 3 - 2 + 1 = 2.
        let b = build_basis(&Measure1D::<f64>::standard_gaussian(), 2).unwrap();
        let p2 = b.poly(2);
        let s = 2f64.sqrt();
        assert!((p2.coeff(0) + 1.0 / s).abs() < 1e-14);
        assert!(p2.coeff(1).abs() < 1e-14);
        assert!((p2.coeff(2) - 1.0 / s).abs() < 1e-14);
    }

    #[test]
    fn constant_first_basis_function() {
        for m in [Measure1D::standard_gaussian(), quartic()] {
            let b = build_basis(&m, 6).unwrap();
            assert_eq!(b.poly(0).coeffs(), &[1.0]);
            for k in 0..=6 {
                assert_eq!(b.poly(k).degree(), Some(k));
                assert!(b.poly(k).leading() > 0.0);
            }
        }
    }

    #[test]
    fn hermite_derivative_identity() {
        // h_k' = k h_{k-1}  ⇒  ĥ_k' = √k ĥ_{k-1}
        let b = build_basis(&Measure1D::<f64>::standard_gaussian(), 5).unwrap();
        let d = b.differentiation();
        for k in 0..=5 {
            for i in 0..=5 {
                let expected = if k > 0 && i + 1 == k { (k as f64).sqrt() } else { 0.0 };
                assert!((d[(i, k)] - expected).abs() < 1e-13, "D[{i},{k}] = {}", d[(i, k)]);
            }
        }
    }

    #[test]
    fn gram_residual_is_small() {
        for m in [Measure1D::standard_gaussian(), quartic()] {
            assert!(build_basis(&m, 10).unwrap().gram_residual() <= 1e-10);
        }
    }

    #[test]
    fn differentiation_matches_monomial_derivative() {
        let b = build_basis(&quartic(), 8).unwrap();
        let d = b.differentiation();
        let dd = d * d;
        for k in 0..=8 {
            let exact = b.poly(k).derivative().derivative();
            let via_basis = (0..=8).fold(Poly::zero(), |acc, i| &acc + &b.poly(i).scale(dd[(i, k)]));
            let diff = &exact - &via_basis;
            assert!(diff.coeffs().iter().all(|c| c.abs() < 1e-9), "k = {k}");
        }
        // strictly lower triangular in degree
        for i in 0..=8 {
            for k in 0..=i {
                assert_eq!(d[(i, k)], 0.0);
            }
        }
    }

    #[test]
    fn integration_by_parts_seed() {
        // ∫ p_k' p_l dμ = -∫ p_k (p_l' + β p_l) dμ
        let m = quartic();
        let b = build_basis(&m, 10).unwrap();
        let rule = build_quadrature(&m, 20).unwrap();
        for k in 0..10 {
            for l in 0..10 {
                let lhs = rule.integrate(|x| b.eval_derivatives(x)[k] * b.eval(l, x));
                let rhs =
                    -rule.integrate(|x| b.eval(k, x) * (b.eval_derivatives(x)[l] + m.log_derivative(x) * b.eval(l, x)));
                assert!((lhs - rhs).abs() < 1e-8, "k={k} l={l}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn multiplication_by_matches_quadrature() {
        let m = quartic();
        let b = build_basis(&m, 6).unwrap();
        let q = Poly::new(vec![1.0, 0.0, 3.0]);
        let mq = b.multiplication_by(&q).unwrap();
        let rule = build_quadrature(&m, 12).unwrap();
        for i in 0..=6 {
            for k in 0..=6 {
                let v = rule.integrate(|x| b.eval(i, x) * q.eval(x) * b.eval(k, x));
                assert!((mq[(i, k)] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn expand_recovers_basis_functions() {
        let b = build_basis(&quartic(), 7).unwrap();
        let c = b.expand(&b.poly(4)).unwrap();
        for (i, ci) in c.iter().enumerate() {
            let expected = if i == 4 { 1.0 } else { 0.0 };
            assert!((ci - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_basis() {
        let b = build_basis(&Measure1D::<f32>::standard_gaussian(), 4).unwrap();
        assert!(b.gram_residual() < 1e-4);
    }
}
