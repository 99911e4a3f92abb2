//! The Segal map `e(α) ↦ Π_j ĥ_{α_j}(y_j)` from `Γ(ℝᵈ)` to `L₂(γ)`, and the
//! operators it transports to `L₂(μ) ⊗ L₂(γ)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{build_quadrature, PolyBasis};
use crate::dirichlet::{apply_h_mu, basis_label, reliability_note};
use crate::error::{Error, Result};
use crate::fock::{assemble_dgamma, assemble_h_mu_lifted, assemble_laplacian, GammaMuVector};
use crate::index::MultiIndexSet;
use crate::measures::Measure1D;
use crate::operator::OperatorMatrix;
use crate::space::{Discretization, TensorField};
use crate::Scalar;

/// Normalized probabilists' Hermite polynomial `h_k(y) / √k!`, from
/// `h_{k+1} = y h_k - k h_{k-1}`.
pub fn hermite<T: Scalar>(k: usize, y: T) -> T {
    let (mut prev, mut cur) = (T::zero(), T::one());
    for n in 0..k {
        let next = y * cur - T::from_count(n) * prev;
        prev = cur;
        cur = next;
    }
    let factorial = (1..=k).fold(T::one(), |acc, i| acc * T::from_count(i));
    cur / factorial.sqrt()
}

/// Change of basis from occupation states `e(α)`, `|α| ≤ N`, to the
/// orthonormal polynomial basis of `L₂(γ)` of total degree `≤ N`.
#[derive(Debug, Clone)]
pub struct SegalMap<T: Scalar> {
    level: usize,
    states: Arc<MultiIndexSet>,
    gaussian: PolyBasis<T>,
    /// Column `α` holds the expansion of `Π_j ĥ_{α_j}(y_j)`.
    matrix: DMatrix<T>,
}

impl<T: Scalar> SegalMap<T> {
    pub fn new(dim: usize, level: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let gamma = Measure1D::standard_gaussian();
        let gaussian = PolyBasis::new(&gamma, level)?;
        let rule = build_quadrature(&gamma, level + 1)?;
        // overlap[l][a] = ∫ p_l ĥ_a dγ
        let mut overlap = DMatrix::zeros(level + 1, level + 1);
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = gaussian.eval_all(y);
            for a in 0..=level {
                let h = hermite(a, y);
                for l in 0..=level {
                    overlap[(l, a)] += w * p[l] * h;
                }
            }
        }
        let states = Arc::new(MultiIndexSet::simplex(dim, level));
        let n = states.len();
        let matrix = DMatrix::from_fn(n, n, |l, a| {
            let (ls, als) = (states.get(l), states.get(a));
            ls.iter()
                .zip(als)
                .fold(T::one(), |acc, (&lj, &aj)| acc * overlap[(lj, aj)])
        });
        Ok(Self {
            level,
            states,
            gaussian,
            matrix,
        })
    }

    /// Map matching the Fock truncation of a discretization.
    pub fn for_discretization(disc: &Discretization<T>) -> Result<Self> {
        Self::new(disc.dimension(), disc.truncation().level)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    /// Index set of both the occupation states and the y-side degrees.
    pub fn states(&self) -> &Arc<MultiIndexSet> {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn gaussian_basis(&self) -> &PolyBasis<T> {
        &self.gaussian
    }

    /// `max |SᵀS - I|`.
    pub fn unitarity_residual(&self) -> T {
        let n = self.matrix.ncols();
        (self.matrix.transpose() * &self.matrix - DMatrix::identity(n, n)).amax()
    }

    fn check(&self, disc: &Discretization<T>) -> Result<()> {
        if **disc.fock_set() != *self.states {
            return Err(Error::TruncationMismatch(format!(
                "Segal map built for d = {}, N = {} but the discretization has d = {}, N = {}",
                self.dim(),
                self.level,
                disc.dimension(),
                disc.truncation().level
            )));
        }
        Ok(())
    }

    /// `(1 ⊗ S) F`: coefficients over `p_k(x) p_l(y)`.
    pub fn transform(&self, disc: &Discretization<T>, f: &GammaMuVector<T>) -> Result<TensorField<T>> {
        self.check(disc)?;
        let field = f.field();
        if *field.cols != *self.states {
            return Err(Error::TruncationMismatch(
                "vector truncation differs from the map".into(),
            ));
        }
        Ok(TensorField {
            rows: field.rows.clone(),
            cols: self.states.clone(),
            coeffs: &field.coeffs * self.matrix.transpose(),
        })
    }

    /// `(1 ⊗ S)ᵀ G`, the inverse on the truncation up to the unitarity residual.
    pub fn inverse(&self, disc: &Discretization<T>, g: &TensorField<T>) -> Result<GammaMuVector<T>> {
        self.check(disc)?;
        let field = TensorField {
            rows: g.rows.clone(),
            cols: disc.fock_set().clone(),
            coeffs: &g.coeffs * &self.matrix,
        };
        GammaMuVector::from_field(disc, field)
    }

    /// `(1 ⊗ S) M (1 ⊗ S)ᵀ` for a matrix over the basis of [`GammaMuVector`].
    pub fn conjugate(&self, disc: &Discretization<T>, op: &OperatorMatrix<T>) -> Result<OperatorMatrix<T>> {
        self.check(disc)?;
        let nx = disc.x_set().len();
        let ns = self.states.len();
        if op.nrows() != nx * ns || op.ncols() != nx * ns {
            return Err(Error::TruncationMismatch(format!(
                "operator is {}x{} but the tensor space has dimension {}",
                op.nrows(),
                op.ncols(),
                nx * ns
            )));
        }
        let u = DMatrix::<T>::identity(nx, nx).kronecker(&self.matrix);
        let entries = &u * &op.entries * u.transpose();
        let label = two_variable_label(disc);
        Ok(OperatorMatrix {
            entries,
            row_basis: label.clone(),
            col_basis: label,
            ..op.clone()
        })
    }

    fn y_derivative(&self, f: &TensorField<T>, axis: usize) -> TensorField<T> {
        f.apply_cols(axis, self.gaussian.differentiation(), &self.states).0
    }

    /// Multiplication by `y_m`; exact on inputs of total degree `< N`.
    fn y_multiply(&self, f: &TensorField<T>, axis: usize) -> TensorField<T> {
        f.apply_cols(axis, self.gaussian.multiplication(), &self.states).0
    }

    /// `-∂²_{y_j} + y_j ∂_{y_j}`.
    fn ornstein_uhlenbeck(&self, f: &TensorField<T>, axis: usize) -> TensorField<T> {
        let d = self.y_derivative(f, axis);
        let mut out = self.y_multiply(&d, axis);
        out.add_assign(&self.y_derivative(&d, axis).scaled(-T::one()));
        out
    }
}

pub(crate) fn two_variable_label<T: Scalar>(disc: &Discretization<T>) -> String {
    format!(
        "{} (x) L2(gamma) Hermite, total degree <= {}",
        basis_label(disc),
        disc.truncation().level
    )
}

fn two_variable_operator<T: Scalar>(
    disc: &Discretization<T>,
    entries: DMatrix<T>,
    symmetric: bool,
) -> OperatorMatrix<T> {
    OperatorMatrix::square(
        entries,
        two_variable_label(disc),
        symmetric,
        disc.reliable_flat(disc.fock_set().len()),
        reliability_note(disc),
    )
}

/// `H_{γ,R_μ} = S dΓ(R_μ) S⁻¹`.
pub fn assemble_h_gamma_r<T: Scalar>(disc: &Discretization<T>, segal: &SegalMap<T>) -> Result<OperatorMatrix<T>> {
    segal.conjugate(disc, &assemble_dgamma(disc))
}

/// `Σ_j V_j''(x_j) ⊗ (-∂²_{y_j} + y_j ∂_{y_j})`, assembled directly in the
/// two-variable basis.
pub fn assemble_h_gamma_r_direct<T: Scalar>(
    disc: &Discretization<T>,
    segal: &SegalMap<T>,
) -> Result<OperatorMatrix<T>> {
    segal.check(disc)?;
    let entries = disc.assemble_columns(disc.x_set(), segal.states(), |f| {
        let mut out = TensorField::zeros(disc.x_ext().clone(), segal.states().clone());
        for j in 0..disc.dimension() {
            let ou = segal.ornstein_uhlenbeck(f, j);
            out.add_assign(&disc.multiply_curvature(&ou, j, disc.x_ext()).0);
        }
        out
    });
    Ok(two_variable_operator(disc, entries, true))
}

/// The four-term expression
/// `Σ_{jm} ∂_j∂_m u ∂_j∂_m p + Σ_{jm} ∂_j∂_m p β_m ∂_j u
///  - Σ_{jm} ∂_j∂_m u y_m ∂_j p - Σ_m β_m y_m Σ_j ∂_j u ∂_j p`
/// applied to `u(x) p(y)`.
pub fn assemble_a_mu_explicit<T: Scalar>(disc: &Discretization<T>, segal: &SegalMap<T>) -> Result<OperatorMatrix<T>> {
    segal.check(disc)?;
    let d = disc.dimension();
    let entries = disc.assemble_columns(disc.x_set(), segal.states(), |f| {
        let mut out = TensorField::zeros(disc.x_ext().clone(), segal.states().clone());
        for j in 0..d {
            let dj = disc.differentiate(f, j);
            for m in 0..d {
                // x side: ∂_j∂_m u + β_m ∂_j u
                let hess = disc.differentiate(&dj, m).project(disc.x_ext(), segal.states()).0;
                let (mut x_part, _) = disc.multiply_log_derivative(&dj, m, disc.x_ext());
                x_part.add_assign(&hess);
                // y side: ∂_j∂_m p - y_m ∂_j p
                let dyj = segal.y_derivative(&x_part, j);
                let mut term = segal.y_derivative(&dyj, m);
                term.add_assign(&segal.y_multiply(&dyj, m).scaled(-T::one()));
                out.add_assign(&term);
            }
        }
        out
    });
    Ok(two_variable_operator(disc, entries, false))
}

/// `H_μ ⊗ H_γ` with `H_γ = Σ_j (-∂²_{y_j} + y_j ∂_{y_j})`.
pub fn assemble_h_mu_h_gamma<T: Scalar>(disc: &Discretization<T>, segal: &SegalMap<T>) -> Result<OperatorMatrix<T>> {
    segal.check(disc)?;
    let entries = disc.assemble_columns(disc.x_set(), segal.states(), |f| {
        let hx = apply_h_mu(disc, f);
        let mut out = TensorField::zeros(hx.rows.clone(), hx.cols.clone());
        for j in 0..disc.dimension() {
            out.add_assign(&segal.ornstein_uhlenbeck(&hx, j));
        }
        out
    });
    Ok(two_variable_operator(disc, entries, true))
}

/// `H_μ ⊗ 1` in the two-variable basis.
pub fn assemble_h_mu_two_variable<T: Scalar>(disc: &Discretization<T>) -> OperatorMatrix<T> {
    let h = assemble_h_mu_lifted(disc);
    two_variable_operator(disc, h.entries, true)
}

/// Least-squares fit of the multiple of the explicit four-term operator that
/// closes `𝚫_μ = H_μ ⊗ 1 + 1 ⊗ H_{γ,R_μ} + c 𝐀_μ` on the reliable block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFit<T> {
    /// Unconstrained minimizer; `None` when the explicit operator vanishes
    /// on the reliable block.
    pub best: Option<T>,
    pub residual_at_best: T,
    pub residual_at_one: T,
    pub residual_at_two: T,
    /// Whichever of 1 and 2 leaves the smaller residual.
    pub chosen: u8,
}

#[derive(Debug, Clone)]
pub struct BoldDelta<T: Scalar> {
    /// `S Δ_μ S⁻¹`.
    pub conjugated: OperatorMatrix<T>,
    pub h_mu: OperatorMatrix<T>,
    pub h_gamma_r: OperatorMatrix<T>,
    pub a_explicit: OperatorMatrix<T>,
    /// `H_μ ⊗ 1 + 1 ⊗ H_{γ,R_μ} + c 𝐀_μ` at `c = fit.chosen`.
    pub component_sum: OperatorMatrix<T>,
    pub fit: ConstantFit<T>,
    /// Reliable-block distance between the two assemblies at `fit.chosen`.
    pub residual: T,
}

pub fn assemble_bold_delta<T: Scalar>(disc: &Discretization<T>, segal: &SegalMap<T>) -> Result<BoldDelta<T>> {
    let conjugated = segal.conjugate(disc, &assemble_laplacian(disc))?;
    let h_mu = assemble_h_mu_two_variable(disc);
    let h_gamma_r = assemble_h_gamma_r(disc, segal)?;
    let a_explicit = assemble_a_mu_explicit(disc, segal)?;

    let target = conjugated.reliable_block() - h_mu.reliable_block() - h_gamma_r.reliable_block();
    let a_block = a_explicit.reliable_block();
    let a_norm2 = a_block.norm_squared();
    let residual_at = |c: T| (&target - &a_block * c).norm();
    let best = (a_norm2 > T::zero()).then(|| target.dot(&a_block) / a_norm2);
    let residual_at_one = residual_at(T::one());
    let residual_at_two = residual_at(T::lit(2.0));
    let chosen: u8 = if residual_at_two < residual_at_one { 2 } else { 1 };
    let c = T::from_count(chosen as usize);
    let sum = &h_mu.entries + &h_gamma_r.entries + &a_explicit.entries * c;
    let component_sum = two_variable_operator(disc, sum, true);
    let residual = conjugated.reliable_distance(&component_sum);
    Ok(BoldDelta {
        fit: ConstantFit {
            residual_at_best: best.map_or_else(|| target.norm(), residual_at),
            best,
            residual_at_one,
            residual_at_two,
            chosen,
        },
        conjugated,
        h_mu,
        h_gamma_r,
        a_explicit,
        component_sum,
        residual,
    })
}

/// Reliable-block norm of `𝚫_μ - H_μ⊗1 - 1⊗H_{γ,R_μ} - 2 H_μ⊗H_γ`; only
/// defined for `d = 1`.
pub fn one_dimensional_identity_residual<T: Scalar>(disc: &Discretization<T>, segal: &SegalMap<T>) -> Result<T> {
    if disc.dimension() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the identity with 2 H_mu (x) H_gamma is one-dimensional (d = {})",
            disc.dimension()
        )));
    }
    let bold = segal.conjugate(disc, &assemble_laplacian(disc))?;
    let product = assemble_h_mu_h_gamma(disc, segal)?;
    let rest = assemble_h_mu_two_variable(disc).entries
        + assemble_h_gamma_r(disc, segal)?.entries
        + product.entries * T::lit(2.0);
    Ok(bold.reliable_distance(&bold.with_entries(rest)))
}

/// Block of a two-variable operator on y-degree zero, over `x_set`.
pub fn y_degree_zero_block<T: Scalar>(disc: &Discretization<T>, op: &OperatorMatrix<T>) -> DMatrix<T> {
    let ns = disc.fock_set().len();
    let nx = disc.x_set().len();
    DMatrix::from_fn(nx, nx, |r, c| op.entries[(r * ns, c * ns)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::assemble_h_mu;
    use crate::measures::ProductMeasure;
    use crate::operator::sorted_eigenvalues;
    use crate::Truncation;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quartic() -> Measure1D<f64> {
        Measure1D::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]).unwrap()
    }

    fn setup(m: Measure1D<f64>, k: usize, n: usize) -> (Discretization<f64>, SegalMap<f64>) {
        let disc = Discretization::new(ProductMeasure::single(m), Truncation::new(k, n)).unwrap();
        let segal = SegalMap::for_discretization(&disc).unwrap();
        (disc, segal)
    }

    #[test]
    fn hermite_values() {
        for y in [-2.0f64, 0.3, 1.7] {
            assert_eq!(hermite(0, y), 1.0);
            assert!((hermite(2, y) - (y * y - 1.0) / 2f64.sqrt()).abs() < 1e-14);
            assert!((hermite(3, y) - (y * y * y - 3.0 * y) / 6f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn map_is_unitary_and_sends_vacuum_to_one() {
        let (disc, segal) = setup(Measure1D::standard_gaussian(), 4, 5);
        assert!(segal.unitarity_residual() < 1e-12);
        let vac = GammaMuVector::basis(&disc, &[0], &[0]).unwrap();
        let out = segal.transform(&disc, &vac).unwrap();
        assert!((out.coeffs[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((out.norm_squared() - 1.0).abs() < 1e-14);
        // e(2) ↦ ĥ₂ = (y² - 1)/√2, compared pointwise
        let e2 = GammaMuVector::basis(&disc, &[0], &[2]).unwrap();
        let out = segal.transform(&disc, &e2).unwrap();
        let basis = segal.gaussian_basis();
        for y in [-1.3, 0.0, 2.2] {
            let p = basis.eval_all(y);
            let value: f64 = (0..=5).map(|l| out.coeffs[(0, l)] * p[l]).sum();
            assert!((value - (y * y - 1.0) / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_preserves_norm() {
        let disc = Discretization::new(
            ProductMeasure::new(vec![Measure1D::standard_gaussian(), quartic()]).unwrap(),
            Truncation::new(3, 3),
        )
        .unwrap();
        let segal = SegalMap::for_discretization(&disc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = disc.x_set().len() * disc.fock_set().len();
        for _ in 0..100 {
            let flat = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let f = GammaMuVector::from_flat(&disc, &flat).unwrap();
            let g = segal.transform(&disc, &f).unwrap();
            assert!((g.norm_squared().sqrt() - f.norm()).abs() < 1e-8);
            let back = segal.inverse(&disc, &g).unwrap();
            assert!((back.to_flat() - flat).amax() < 1e-10);
        }
    }

    #[test]
    fn mismatched_truncation_is_refused() {
        let (disc, _) = setup(Measure1D::standard_gaussian(), 4, 3);
        let other = SegalMap::<f64>::new(1, 2).unwrap();
        let v = GammaMuVector::zeros(&disc);
        assert!(matches!(other.transform(&disc, &v), Err(Error::TruncationMismatch(_))));
    }

    #[test]
    fn gaussian_h_gamma_r_is_ornstein_uhlenbeck() {
        let (disc, segal) = setup(Measure1D::standard_gaussian(), 3, 4);
        let h = assemble_h_gamma_r(&disc, &segal).unwrap();
        for r in 0..disc.x_set().len() {
            for l in 0..=4 {
                let i = r * 5 + l;
                assert!((h.entries[(i, i)] - l as f64).abs() < 1e-10);
            }
        }
        assert!(h.entries.column(0).amax() < 1e-12);
    }

    #[test]
    fn conjugated_dgamma_matches_direct_assembly() {
        let (disc, segal) = setup(quartic(), 7, 3);
        let a = assemble_h_gamma_r(&disc, &segal).unwrap();
        let b = assemble_h_gamma_r_direct(&disc, &segal).unwrap();
        assert!(a.reliable_distance(&b) < 1e-10);
    }

    #[test]
    fn explicit_operator_vanishes_on_constants() {
        let (disc, segal) = setup(quartic(), 6, 3);
        let a = assemble_a_mu_explicit(&disc, &segal).unwrap();
        let ns = 4;
        for i in 0..a.ncols() {
            let (r, l) = (i / ns, i % ns);
            if r == 0 || l == 0 {
                assert!(a.entries.column(i).amax() < 1e-12, "column {i}");
            }
        }
    }

    #[test]
    fn gaussian_explicit_operator_is_product() {
        let (disc, segal) = setup(Measure1D::standard_gaussian(), 5, 4);
        let a = assemble_a_mu_explicit(&disc, &segal).unwrap();
        let p = assemble_h_mu_h_gamma(&disc, &segal).unwrap();
        assert!(a.reliable_distance(&p) < 1e-10);
    }

    #[test]
    fn gaussian_bold_delta_spectrum() {
        let (k, n) = (5, 4);
        let (disc, segal) = setup(Measure1D::standard_gaussian(), k, n);
        let bold = assemble_bold_delta(&disc, &segal).unwrap();
        let mut expected: Vec<f64> = (0..=k)
            .flat_map(|a| (0..=n).map(move |b| (a + b + 2 * a * b) as f64))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = bold.conjugated.reliable_eigenvalues();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8);
        }
        assert_eq!(bold.fit.chosen, 2);
        assert!((bold.fit.best.unwrap() - 2.0).abs() < 1e-10);
        assert!(bold.residual < 1e-8);
    }

    #[test]
    fn identity_and_extension_survive_transport() {
        for m in [Measure1D::standard_gaussian(), quartic()] {
            let (disc, segal) = setup(m, 8, 3);
            assert!(one_dimensional_identity_residual(&disc, &segal).unwrap() < 1e-8);
            let bold = segal.conjugate(&disc, &assemble_laplacian(&disc)).unwrap();
            let h = assemble_h_mu(&disc);
            assert!((y_degree_zero_block(&disc, &bold) - &h.entries).amax() < 1e-8);
            let a = sorted_eigenvalues(&assemble_laplacian(&disc).reliable_block());
            let b = bold.reliable_eigenvalues();
            assert!(crate::operator::spectral_distance(&a, &b) < 1e-8);
        }
    }
}
