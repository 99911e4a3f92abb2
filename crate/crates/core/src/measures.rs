//! Log-concave probability measures `Z⁻¹ e^{-V(x)} dx` on the line and their
//! coordinate products.

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quadrature::CompositeRule;
use crate::Scalar;

/// `V(x) - min V` at the ends of the support interval used for all
/// moment computations. `e^{-200}` is far below double precision relative to
/// the bulk of the mass, so polynomial moments of moderate degree are
/// unaffected by the cut.
const SUPPORT_BARRIER: f64 = 200.0;
/// Mass allowed outside the mass interval.
const TAIL_MASS: f64 = 1e-12;
/// Number of recurrence coefficients computed per measure; bounds the
/// polynomial degree available to bases and quadrature rules.
pub const RECURRENCE_LEN: usize = 72;

#[derive(Debug, Clone, PartialEq)]
pub enum Potential<T> {
    /// `V(x) = Σ_k c_k x^k`, even degree ≥ 2, positive leading coefficient.
    Polynomial(Poly<T>),
    /// `V(x) = x² / (2 σ²)`.
    Gaussian { variance: T },
}

impl<T: Scalar> Potential<T> {
    pub fn polynomial(coeffs: Vec<T>) -> Result<Self> {
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite_value()) {
            return Err(Error::InvalidPotential(format!("coefficient {k} is not finite")));
        }
        let poly = Poly::new(coeffs);
        let degree = poly.degree().unwrap_or(0);
        if degree < 2 || degree % 2 == 1 {
            return Err(Error::InvalidPotential(format!(
                "polynomial degree must be even and at least 2 (got {degree})"
            )));
        }
        if poly.leading() <= T::zero() {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient must be positive (got {})",
                poly.leading()
            )));
        }
        Ok(Self::Polynomial(poly))
    }

    pub fn gaussian(variance: T) -> Result<Self> {
        if !variance.is_finite_value() || variance <= T::zero() {
            return Err(Error::InvalidPotential(format!(
                "variance must be positive and finite (got {variance})"
            )));
        }
        Ok(Self::Gaussian { variance })
    }

    pub fn standard_gaussian() -> Self {
        Self::Gaussian { variance: T::one() }
    }

    pub fn to_poly(&self) -> Poly<T> {
        match self {
            Self::Polynomial(p) => p.clone(),
            Self::Gaussian { variance } => Poly::new(vec![T::zero(), T::zero(), T::one() / (T::lit(2.0) * *variance)]),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Self::Polynomial(p) => p.degree().unwrap_or(0),
            Self::Gaussian { .. } => 2,
        }
    }
}

/// Orthonormal three-term recurrence
/// `x p_k = off[k] p_{k+1} + alpha[k] p_k + off[k-1] p_{k-1}` of a
/// probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence<T> {
    pub alpha: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Scalar> Recurrence<T> {
    /// Largest `n` for which an `n`-point Gauss rule is available.
    pub fn max_order(&self) -> usize {
        self.alpha.len()
    }
}

#[derive(Debug, Clone)]
pub struct Measure1D<T> {
    potential: Potential<T>,
    v: Poly<T>,
    dv: Poly<T>,
    d2v: Poly<T>,
    d3v: Poly<T>,
    shift: T,
    shifted_normalization: T,
    mass_interval: (T, T),
    support: (T, T),
    recurrence: Recurrence<T>,
}

impl<T: Scalar> Measure1D<T> {
    pub fn new(potential: Potential<T>) -> Result<Self> {
        let v = potential.to_poly();
        let dv = v.derivative();
        let d2v = dv.derivative();
        let d3v = d2v.derivative();

        let radius = critical_radius(&dv);
        let shift = grid_minimum(&v, radius);
        let half_width = barrier_half_width(&v, shift, radius)?;
        let support = (-half_width, half_width);

        let density_unnormalized = |x: T| (-(v.eval(x) - shift)).exp();
        let shifted_normalization = refine_integral("normalization", |panels| {
            CompositeRule::new(support.0, support.1, panels).integrate(density_unnormalized)
        })?;

        let mut measure = Self {
            potential,
            v,
            dv,
            d2v,
            d3v,
            shift,
            shifted_normalization,
            mass_interval: support,
            support,
            recurrence: Recurrence {
                alpha: Vec::new(),
                off: Vec::new(),
            },
        };
        measure.mass_interval = measure.find_mass_interval();
        measure.recurrence = measure.compute_recurrence()?;
        Ok(measure)
    }

    pub fn standard_gaussian() -> Self {
        Self::new(Potential::standard_gaussian()).expect("standard Gaussian is valid")
    }

    pub fn gaussian(variance: T) -> Result<Self> {
        Self::new(Potential::gaussian(variance)?)
    }

    pub fn polynomial(coeffs: Vec<T>) -> Result<Self> {
        Self::new(Potential::polynomial(coeffs)?)
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn potential_poly(&self) -> &Poly<T> {
        &self.v
    }

    /// `V'` as a polynomial; `β_μ = -V'`.
    pub fn potential_derivative(&self) -> &Poly<T> {
        &self.dv
    }

    /// `V''` as a polynomial; equals `R_μ`.
    pub fn potential_second_derivative(&self) -> &Poly<T> {
        &self.d2v
    }

    pub fn potential_third_derivative(&self) -> &Poly<T> {
        &self.d3v
    }

    /// Degree by which multiplication with `β_μ` raises polynomial degree.
    pub fn log_derivative_degree(&self) -> usize {
        self.dv.degree().unwrap_or(0)
    }

    /// Logarithmic derivative `β_μ(x) = -V'(x)`.
    pub fn log_derivative(&self, x: T) -> T {
        match self.potential {
            Potential::Gaussian { variance } => -x / variance,
            Potential::Polynomial(_) => -self.dv.eval(x),
        }
    }

    /// Coefficient `R_μ(x) = -β_μ'(x) = V''(x)`.
    pub fn coefficient(&self, x: T) -> T {
        match self.potential {
            Potential::Gaussian { variance } => T::one() / variance,
            Potential::Polynomial(_) => self.d2v.eval(x),
        }
    }

    /// `R_μ'(x) = V'''(x)`.
    pub fn coefficient_derivative(&self, x: T) -> T {
        match self.potential {
            Potential::Gaussian { .. } => T::zero(),
            Potential::Polynomial(_) => self.d3v.eval(x),
        }
    }

    /// Normalized density `e^{-V(x)} / Z`.
    pub fn density(&self, x: T) -> T {
        (-(self.v.eval(x) - self.shift)).exp() / self.shifted_normalization
    }

    /// `Z = ∫ e^{-V}` over the line.
    pub fn normalization(&self) -> T {
        self.shifted_normalization * (-self.shift).exp()
    }

    pub fn log_normalization(&self) -> T {
        self.shifted_normalization.ln() - self.shift
    }

    /// Symmetric interval carrying all but `1e-12` of the mass.
    pub fn mass_interval(&self) -> (T, T) {
        self.mass_interval
    }

    pub fn in_mass_interval(&self, x: T) -> bool {
        x >= self.mass_interval.0 && x <= self.mass_interval.1
    }

    /// Interval outside which `V - min V > 200`; used for moment computations.
    pub fn support(&self) -> (T, T) {
        self.support
    }

    pub fn recurrence(&self) -> &Recurrence<T> {
        &self.recurrence
    }

    /// Quadrature of the density over the mass interval.
    pub fn mass(&self) -> T {
        let (a, b) = self.mass_interval;
        CompositeRule::new(a, b, 128).integrate(|x| self.density(x))
    }

    fn tail_mass(&self, half_width: T) -> T {
        let (lo, hi) = self.support;
        if half_width >= hi {
            return T::zero();
        }
        let right = CompositeRule::new(half_width, hi, 64).integrate(|x| self.density(x));
        let left = CompositeRule::new(lo, -half_width, 64).integrate(|x| self.density(x));
        right + left
    }

    fn find_mass_interval(&self) -> (T, T) {
        let target = T::tol(TAIL_MASS) / T::lit(2.0);
        let mut lo = T::zero();
        let mut hi = self.support.1;
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.tail_mass(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= T::default_epsilon() * T::lit(16.0) * self.support.1 {
                break;
            }
        }
        (-hi, hi)
    }

    fn compute_recurrence(&self) -> Result<Recurrence<T>> {
        if self.v.degree() == Some(2) {
            // Gaussian closure: shifted and scaled Hermite recurrence.
            let c2 = self.v.coeff(2);
            let mean = -self.v.coeff(1) / (T::lit(2.0) * c2);
            let sigma = (T::one() / (T::lit(2.0) * c2)).sqrt();
            let alpha = vec![mean; RECURRENCE_LEN];
            let off = (1..=RECURRENCE_LEN).map(|k| sigma * T::from_count(k).sqrt()).collect();
            return Ok(Recurrence { alpha, off });
        }
        let tol = T::tol(1e-12);
        let mut panels = 64;
        let mut previous = self.stieltjes(panels)?;
        loop {
            panels *= 2;
            let current = self.stieltjes(panels)?;
            let change = previous
                .alpha
                .iter()
                .zip(&current.alpha)
                .chain(previous.off.iter().zip(&current.off))
                .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs() / (T::one() + b.abs())));
            if change <= tol {
                return Ok(current);
            }
            if panels >= 4096 {
                return Err(Error::MomentOverflow(format!(
                    "recurrence did not converge under discretization refinement (change {change})"
                )));
            }
            previous = current;
        }
    }

    /// Lanczos form of the discretized Stieltjes procedure with full
    /// reorthogonalization.
    fn stieltjes(&self, panels: usize) -> Result<Recurrence<T>> {
        let (lo, hi) = self.support;
        let rule = CompositeRule::new(lo, hi, panels);
        let x = &rule.nodes;
        let mut w: Vec<T> = rule.weights.iter().zip(x).map(|(&w, &x)| w * self.density(x)).collect();
        let mass = w.iter().fold(T::zero(), |a, &b| a + b);
        w.iter_mut().for_each(|wi| *wi /= mass);

        let n = RECURRENCE_LEN;
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        basis.push(w.iter().map(|wi| wi.sqrt()).collect());
        let mut alpha = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n);
        for k in 0..n {
            let q = &basis[k];
            let a = q.iter().zip(x).fold(T::zero(), |acc, (&qi, &xi)| acc + xi * qi * qi);
            let mut r: Vec<T> = q.iter().zip(x).map(|(&qi, &xi)| (xi - a) * qi).collect();
            if k > 0 {
                let b = off[k - 1];
                for (ri, &pi) in r.iter_mut().zip(&basis[k - 1]) {
                    *ri -= b * pi;
                }
            }
            for _ in 0..2 {
                for prev in &basis {
                    let proj = dot(&r, prev);
                    for (ri, &pi) in r.iter_mut().zip(prev) {
                        *ri -= proj * pi;
                    }
                }
            }
            let b = dot(&r, &r).sqrt();
            if !b.is_finite_value() || b <= T::default_epsilon() {
                return Err(Error::MomentOverflow(format!(
                    "recurrence breaks down at degree {k} (b = {b})"
                )));
            }
            r.iter_mut().for_each(|ri| *ri /= b);
            alpha.push(a);
            off.push(b);
            basis.push(r);
        }
        Ok(Recurrence { alpha, off })
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Cauchy bound on the real roots of `V'`: all critical points of `V` lie in
/// `[-r, r]` and `V` is monotone outside.
fn critical_radius<T: Scalar>(dv: &Poly<T>) -> T {
    let lead = dv.leading();
    let coeffs = dv.coeffs();
    let ratio = coeffs[..coeffs.len().saturating_sub(1)]
        .iter()
        .fold(T::zero(), |acc, c| acc.max((*c / lead).abs()));
    T::one() + ratio
}

fn grid_minimum<T: Scalar>(v: &Poly<T>, radius: T) -> T {
    let n = 4000;
    (0..=n)
        .map(|i| v.eval(-radius + radius * T::lit(2.0) * T::from_count(i) / T::from_count(n)))
        .fold(v.eval(T::zero()), |acc, y| acc.min(y))
}

fn barrier_half_width<T: Scalar>(v: &Poly<T>, shift: T, radius: T) -> Result<T> {
    let barrier = T::lit(SUPPORT_BARRIER);
    let clears = |l: T| v.eval(l) - shift >= barrier && v.eval(-l) - shift >= barrier;
    let mut hi = radius;
    let mut doublings = 0;
    while !clears(hi) {
        hi *= T::lit(2.0);
        doublings += 1;
        if doublings > 200 || !hi.is_finite_value() {
            return Err(Error::InvalidPotential(
                "potential does not grow fast enough to confine the measure".into(),
            ));
        }
    }
    let mut lo = radius;
    if clears(lo) {
        return Ok(lo);
    }
    for _ in 0..100 {
        let mid = (lo + hi) / T::lit(2.0);
        if clears(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn refine_integral<T: Scalar>(name: &str, integral: impl Fn(usize) -> T) -> Result<T> {
    let tol = T::tol(1e-13);
    let mut panels = 32;
    let mut previous = integral(panels);
    while panels < 1 << 14 {
        panels *= 2;
        let current = integral(panels);
        if (current - previous).abs() <= tol * current.abs() {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::DivergentIntegral {
        name: name.to_string(),
        coarse: previous.as_f64(),
        fine: integral(panels).as_f64(),
    })
}

/// Coordinate product of one-dimensional measures on `ℝᵈ`.
#[derive(Debug, Clone)]
pub struct ProductMeasure<T> {
    factors: Vec<Measure1D<T>>,
}

impl<T: Scalar> ProductMeasure<T> {
    pub fn new(factors: Vec<Measure1D<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "product measure needs at least one factor".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn single(m: Measure1D<T>) -> Self {
        Self { factors: vec![m] }
    }

    pub fn dimension(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Measure1D<T>] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &Measure1D<T> {
        &self.factors[j]
    }

    pub fn log_derivative(&self, x: &[T]) -> Vec<T> {
        self.factors
            .iter()
            .zip(x)
            .map(|(m, &xj)| m.log_derivative(xj))
            .collect()
    }

    /// Diagonal of `R_μ(x)`.
    pub fn coefficient_diagonal(&self, x: &[T]) -> Vec<T> {
        self.factors.iter().zip(x).map(|(m, &xj)| m.coefficient(xj)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UlcMethod {
    AnalyticInfimum,
    GridMinimization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlcCertificate<T> {
    pub constant: T,
    pub method: UlcMethod,
    pub grid_resolution: Option<usize>,
    /// Per-coordinate infima of `V_j''`.
    pub per_coordinate: Vec<T>,
}

/// Largest `C` with `V_j''(x) ≥ C` for every coordinate: exact infimum when
/// `V''` has degree ≤ 2, otherwise the minimum over `resolution` points of the
/// mass interval.
pub fn check_ulc<T: Scalar>(m: &ProductMeasure<T>, resolution: usize) -> Result<UlcCertificate<T>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "ULC grid resolution must be at least 2 (got {resolution})"
        )));
    }
    let mut method = UlcMethod::AnalyticInfimum;
    let mut per_coordinate = Vec::with_capacity(m.dimension());
    for (j, f) in m.factors().iter().enumerate() {
        let d2v = f.potential_second_derivative();
        let (min_value, at) = match d2v.degree() {
            None | Some(0) => (d2v.coeff(0), T::zero()),
            Some(2) => {
                let (a, b, c) = (d2v.coeff(2), d2v.coeff(1), d2v.coeff(0));
                let at = -b / (T::lit(2.0) * a);
                (c - b * b / (T::lit(4.0) * a), at)
            }
            _ => {
                method = UlcMethod::GridMinimization;
                let (lo, hi) = f.mass_interval();
                (0..resolution)
                    .map(|i| {
                        let x = lo + (hi - lo) * T::from_count(i) / T::from_count(resolution - 1);
                        (d2v.eval(x), x)
                    })
                    .fold((d2v.eval(lo), lo), |acc, cur| if cur.0 < acc.0 { cur } else { acc })
            }
        };
        if min_value <= T::zero() {
            return Err(Error::NotUlc {
                coordinate: j,
                min_value: min_value.as_f64(),
                at: at.as_f64(),
            });
        }
        per_coordinate.push(min_value);
    }
    let constant = per_coordinate.iter().copied().fold(per_coordinate[0], |a, b| a.min(b));
    Ok(UlcCertificate {
        constant,
        method,
        grid_resolution: (method == UlcMethod::GridMinimization).then_some(resolution),
        per_coordinate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityEstimate<T> {
    /// `∫ β_{μ,φ}² dμ`
    pub i1: T,
    /// `∫ |R_μ(x) φ|² dμ`
    pub i2: T,
    pub order: usize,
    pub refined_order: usize,
}

/// Quadrature estimates of `∫ β_{μ,φ}² dμ` and `∫ |R_μ φ|² dμ` at orders
/// `order` and `2 order`; the refined values are returned once both agree to
/// `1e-8` relative.
pub fn check_integrability<T: Scalar>(
    m: &ProductMeasure<T>,
    phi: &[T],
    order: usize,
) -> Result<IntegrabilityEstimate<T>> {
    if phi.len() != m.dimension() {
        return Err(Error::InvalidArgument(format!(
            "direction has length {} but measure dimension is {}",
            phi.len(),
            m.dimension()
        )));
    }
    let norm = phi.iter().fold(T::zero(), |a, &p| a + p * p).sqrt();
    if (norm - T::one()).abs() > T::tol(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "direction must be a unit vector (norm {norm})"
        )));
    }
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature order must be at least 2 (got {order})"
        )));
    }
    let coarse = integrability_at(m, phi, order)?;
    let fine = integrability_at(m, phi, 2 * order)?;
    let tol = T::tol(1e-8);
    for (name, c, f) in [("I1", coarse.0, fine.0), ("I2", coarse.1, fine.1)] {
        if !f.is_finite_value() || (c - f).abs() > tol * T::one().max(f.abs()) {
            return Err(Error::DivergentIntegral {
                name: name.to_string(),
                coarse: c.as_f64(),
                fine: f.as_f64(),
            });
        }
    }
    Ok(IntegrabilityEstimate {
        i1: fine.0,
        i2: fine.1,
        order,
        refined_order: 2 * order,
    })
}

fn integrability_at<T: Scalar>(m: &ProductMeasure<T>, phi: &[T], order: usize) -> Result<(T, T)> {
    let mut mean_beta = Vec::with_capacity(m.dimension());
    let mut i1 = T::zero();
    let mut i2 = T::zero();
    for (f, &p) in m.factors().iter().zip(phi) {
        let rule = crate::basis::build_quadrature(f, order)?;
        let (mut b1, mut b2, mut r2) = (T::zero(), T::zero(), T::zero());
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let beta = f.log_derivative(x);
            let r = f.coefficient(x);
            b1 += w * beta;
            b2 += w * beta * beta;
            r2 += w * r * r;
        }
        mean_beta.push(b1 * p);
        i1 += p * p * b2;
        i2 += p * p * r2;
    }
    for j in 0..mean_beta.len() {
        for k in 0..mean_beta.len() {
            if j != k {
                i1 += mean_beta[j] * mean_beta[k];
            }
        }
    }
    Ok((i1, i2))
}
