//! Symmetric tensors, the truncated Fock space, and the operators `δ`,
//! `δ*`, `dΓ(R_μ)` and `Δ_μ = δ*δ + δδ*` on `L₂(μ) ⊗ Γ(ℝᵈ)`.
//!
//! Symmetric tensors use the orthonormal occupation-number basis `e(α)`,
//! in which `e(α) ⊗̂ e(α') = √((α+α')! / (α! α'!)) e(α+α')` and
//! `a†_j e(α) = √(α_j + 1) e(α + 1_j)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::basis::build_quadrature;
use crate::dirichlet::{apply_h_mu, basis_label};
use crate::error::{Error, Result};
use crate::index::MultiIndexSet;
use crate::operator::{sorted_eigenvalues, OperatorMatrix};
use crate::space::{Discretization, TensorField};
use crate::Scalar;

/// Element of the `n`-th symmetric power of `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T> {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, T>,
}

impl<T: Scalar> SymTensor<T> {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis(&vec![0; dim])
    }

    /// `e(α)`.
    pub fn basis(alpha: &[usize]) -> Self {
        let mut t = Self::zero(alpha.len(), alpha.iter().sum());
        t.coeffs.insert(alpha.to_vec(), T::one());
        t
    }

    /// The unit vector `e_j` of `ℝᵈ` as a degree-one tensor.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut alpha = vec![0; dim];
        alpha[j] = 1;
        Self::basis(&alpha)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn get(&self, alpha: &[usize]) -> T {
        self.coeffs.get(alpha).copied().unwrap_or_else(T::zero)
    }

    pub fn add_term(&mut self, alpha: &[usize], value: T) -> Result<()> {
        if alpha.len() != self.dim || alpha.iter().sum::<usize>() != self.degree {
            return Err(Error::InvalidArgument(format!(
                "multi-index {alpha:?} does not belong to degree {} in dimension {}",
                self.degree, self.dim
            )));
        }
        *self.coeffs.entry(alpha.to_vec()).or_insert_with(T::zero) += value;
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], T)> {
        self.coeffs.iter().map(|(a, &v)| (a.as_slice(), v))
    }

    pub fn inner(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, (a, &v)| acc + v * other.get(a))
    }

    pub fn norm_squared(&self) -> T {
        self.inner(self)
    }
}

fn factorial_ratio<T: Scalar>(sum: &[usize], a: &[usize]) -> T {
    // (α+α')! / (α! α'!) = Π_j C(α_j + α'_j, α_j)
    sum.iter().zip(a).fold(T::one(), |acc, (&s, &k)| {
        acc * T::from_count(crate::index::binomial(s, k))
    })
}

/// Symmetric product `a ⊗̂ b`, refusing results above level `cap`.
pub fn sym_product<T: Scalar>(a: &SymTensor<T>, b: &SymTensor<T>, cap: usize) -> Result<SymTensor<T>> {
    if a.dim != b.dim {
        return Err(Error::InvalidArgument(format!(
            "dimensions differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    let degree = a.degree + b.degree;
    if degree > cap {
        return Err(Error::LevelOverflow { degree, cap });
    }
    let mut out = SymTensor::zero(a.dim, degree);
    for (alpha, x) in a.terms() {
        for (beta, y) in b.terms() {
            let sum: Vec<usize> = alpha.iter().zip(beta).map(|(p, q)| p + q).collect();
            let scale = factorial_ratio::<T>(&sum, alpha).sqrt();
            *out.coeffs.entry(sum).or_insert_with(T::zero) += scale * x * y;
        }
    }
    Ok(out)
}

/// Element of `Γ(ℝᵈ)` truncated at level `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    levels: Vec<SymTensor<T>>,
}

impl<T: Scalar> FockVector<T> {
    pub fn zero(dim: usize, max_level: usize) -> Self {
        Self {
            levels: (0..=max_level).map(|n| SymTensor::zero(dim, n)).collect(),
        }
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &SymTensor<T> {
        &self.levels[n]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut SymTensor<T> {
        &mut self.levels[n]
    }

    pub fn norm_squared(&self) -> T {
        self.levels.iter().fold(T::zero(), |acc, l| acc + l.norm_squared())
    }

    /// Coefficients ordered like `MultiIndexSet::simplex(d, N)`.
    pub fn to_flat(&self, set: &MultiIndexSet) -> DVector<T> {
        DVector::from_fn(set.len(), |i, _| self.levels[set.total(i)].get(set.get(i)))
    }

    pub fn from_flat(set: &MultiIndexSet, flat: &DVector<T>) -> Self {
        let mut out = Self::zero(set.dim(), set.axis_bound(0));
        for i in 0..set.len() {
            if flat[i] != T::zero() {
                out.levels[set.total(i)]
                    .add_term(set.get(i), flat[i])
                    .expect("simplex members have matching degree");
            }
        }
        out
    }
}

/// Element of `Γ_μ(ℝᵈ) = L₂(μ) ⊗ Γ(ℝᵈ)` in the basis `p_k(x) e(α)` with
/// per-coordinate degree `≤ K` and `|α| ≤ N`.
#[derive(Debug, Clone)]
pub struct GammaMuVector<T: Scalar> {
    field: TensorField<T>,
}

impl<T: Scalar> GammaMuVector<T> {
    pub fn zeros(disc: &Discretization<T>) -> Self {
        Self {
            field: TensorField::zeros(disc.x_set().clone(), disc.fock_set().clone()),
        }
    }

    pub fn from_field(disc: &Discretization<T>, field: TensorField<T>) -> Result<Self> {
        if *field.rows != **disc.x_set() || *field.cols != **disc.fock_set() {
            return Err(Error::TruncationMismatch(format!(
                "field on {:?} x {:?} does not match the discretization",
                field.rows.shape(),
                field.cols.shape()
            )));
        }
        Ok(Self { field })
    }

    pub fn from_flat(disc: &Discretization<T>, flat: &DVector<T>) -> Result<Self> {
        let expected = disc.x_set().len() * disc.fock_set().len();
        if flat.len() != expected {
            return Err(Error::TruncationMismatch(format!(
                "vector has length {} but the discretization has {expected} basis elements",
                flat.len()
            )));
        }
        Ok(Self {
            field: TensorField::from_flat(disc.x_set().clone(), disc.fock_set().clone(), flat),
        })
    }

    /// `p_k(x) e(α)` for a multi-degree `k` and occupation `α`.
    pub fn basis(disc: &Discretization<T>, degrees: &[usize], alpha: &[usize]) -> Result<Self> {
        let r = disc
            .x_set()
            .position(degrees)
            .ok_or_else(|| Error::TruncationMismatch(format!("degree {degrees:?} outside the truncation")))?;
        let q = disc
            .fock_set()
            .position(alpha)
            .ok_or_else(|| Error::TruncationMismatch(format!("occupation {alpha:?} outside the truncation")))?;
        Ok(Self {
            field: TensorField::unit(disc.x_set().clone(), disc.fock_set().clone(), r, q),
        })
    }

    pub fn field(&self) -> &TensorField<T> {
        &self.field
    }

    pub fn coefficient(&self, degrees: &[usize], alpha: &[usize]) -> T {
        match (self.field.rows.position(degrees), self.field.cols.position(alpha)) {
            (Some(r), Some(q)) => self.field.coeffs[(r, q)],
            _ => T::zero(),
        }
    }

    pub fn to_flat(&self) -> DVector<T> {
        self.field.to_flat()
    }

    /// Inner product of `Γ_μ`; the basis is orthonormal.
    pub fn inner(&self, other: &Self) -> T {
        self.field.coeffs.dot(&other.field.coeffs)
    }

    pub fn norm(&self) -> T {
        self.field.norm_squared().sqrt()
    }

    pub fn level_norm_squared(&self, n: usize) -> T {
        let cols = &self.field.cols;
        (0..cols.len())
            .filter(|&q| cols.total(q) == n)
            .fold(T::zero(), |acc, q| acc + self.field.coeffs.column(q).norm_squared())
    }

    pub fn top_level_is_zero(&self) -> bool {
        let cols = &self.field.cols;
        let top = cols.axis_bound(0);
        (0..cols.len())
            .filter(|&q| cols.total(q) == top)
            .all(|q| self.field.coeffs.column(q).iter().all(|v| *v == T::zero()))
    }

    /// `F(x) ∈ Γ(ℝᵈ)`.
    pub fn evaluate(&self, disc: &Discretization<T>, x: &[T]) -> FockVector<T> {
        let values: Vec<Vec<T>> = disc.bases().iter().zip(x).map(|(b, &xj)| b.eval_all(xj)).collect();
        let rows = &self.field.rows;
        let fibre = DVector::from_fn(self.field.cols.len(), |q, _| {
            (0..rows.len()).fold(T::zero(), |acc, r| {
                let weight = rows
                    .get(r)
                    .iter()
                    .enumerate()
                    .fold(T::one(), |p, (j, &k)| p * values[j][k]);
                acc + weight * self.field.coeffs[(r, q)]
            })
        });
        FockVector::from_flat(&self.field.cols, &fibre)
    }

    /// `∫ ‖F(x)‖²_Γ dμ(x)` by tensor Gauss quadrature, independent of the
    /// orthonormality of the basis.
    pub fn quadrature_norm_squared(&self, disc: &Discretization<T>) -> Result<T> {
        self.quadrature_inner(disc, self)
    }

    /// `∫ ⟨F(x), G(x)⟩_Γ dμ(x)` by tensor Gauss quadrature.
    pub fn quadrature_inner(&self, disc: &Discretization<T>, other: &Self) -> Result<T> {
        let k = disc.truncation().degree;
        let rules = disc
            .bases()
            .iter()
            .map(|b| build_quadrature(b.measure(), k + 2))
            .collect::<Result<Vec<_>>>()?;
        let nodes = MultiIndexSet::grid(&rules.iter().map(|r| r.len() - 1).collect::<Vec<_>>());
        let mut total = T::zero();
        let mut x = vec![T::zero(); disc.dimension()];
        for idx in nodes.iter() {
            let mut w = T::one();
            for (j, &i) in idx.iter().enumerate() {
                x[j] = rules[j].nodes[i];
                w *= rules[j].weights[i];
            }
            let f = self.evaluate(disc, &x);
            let g = other.evaluate(disc, &x);
            let dot = (0..=f.max_level()).fold(T::zero(), |acc, n| acc + f.level(n).inner(g.level(n)));
            total += w * dot;
        }
        Ok(total)
    }
}

/// `δ = Σ_j ∂_j ⊗ a†_j` into `out_cols`.
pub(crate) fn apply_delta<T: Scalar>(
    disc: &Discretization<T>,
    f: &TensorField<T>,
    out_cols: &Arc<MultiIndexSet>,
) -> (TensorField<T>, bool) {
    let mut out = TensorField::zeros(f.rows.clone(), out_cols.clone());
    let mut lost = false;
    for j in 0..disc.dimension() {
        let g = disc.differentiate(f, j);
        let (h, l) = disc.create(&g, j, out_cols);
        lost |= l;
        out.add_assign(&h);
    }
    (out, lost)
}

/// `δ* = -Σ_j (∂_j + β_j) ⊗ a_j` into `out_rows ⊗ out_cols`.
pub(crate) fn apply_delta_star<T: Scalar>(
    disc: &Discretization<T>,
    f: &TensorField<T>,
    out_rows: &Arc<MultiIndexSet>,
    out_cols: &Arc<MultiIndexSet>,
) -> (TensorField<T>, bool) {
    let mut out = TensorField::zeros(out_rows.clone(), out_cols.clone());
    let mut lost = false;
    for j in 0..disc.dimension() {
        let (g, l1) = disc.codifferentiate(f, j, out_rows);
        let (h, l2) = disc.annihilate(&g, j, out_cols);
        lost |= l1 || l2;
        out.add_assign(&h);
    }
    (out, lost)
}

/// `dΓ(R_μ) = Σ_j V_j''(x_j) ⊗ N̂_j` into `out_rows`.
pub(crate) fn apply_dgamma<T: Scalar>(
    disc: &Discretization<T>,
    f: &TensorField<T>,
    out_rows: &Arc<MultiIndexSet>,
) -> (TensorField<T>, bool) {
    let mut out = TensorField::zeros(out_rows.clone(), f.cols.clone());
    let mut lost = false;
    for j in 0..disc.dimension() {
        let counted = disc.count(f, j);
        let (h, l) = disc.multiply_curvature(&counted, j, out_rows);
        lost |= l;
        out.add_assign(&h);
    }
    (out, lost)
}

/// `Δ_μ = δ*δ + δδ*` on a field over `x_set ⊗ fock_set`, projected back.
pub(crate) fn apply_laplacian<T: Scalar>(disc: &Discretization<T>, f: &TensorField<T>) -> TensorField<T> {
    let (up, _) = apply_delta(disc, f, disc.fock_up());
    let (down_up, _) = apply_delta_star(disc, &up, disc.x_ext(), disc.fock_set());
    let (down, _) = apply_delta_star(disc, f, disc.x_ext(), disc.fock_set());
    let (up_down, _) = apply_delta(disc, &down, disc.fock_up());
    let mut out = down_up.project(disc.x_set(), disc.fock_set()).0;
    out.add_assign(&up_down.project(disc.x_set(), disc.fock_set()).0);
    out
}

fn check_matches<T: Scalar>(disc: &Discretization<T>, f: &GammaMuVector<T>) -> Result<()> {
    if *f.field.rows != **disc.x_set() || *f.field.cols != **disc.fock_set() {
        return Err(Error::TruncationMismatch(
            "vector was built for a different truncation".into(),
        ));
    }
    Ok(())
}

/// Rows holding a nonzero coefficient whose degree on some axis exceeds
/// `limit(axis)`.
fn first_degree_violation<T: Scalar>(
    f: &TensorField<T>,
    limit: impl Fn(usize) -> Option<usize>,
) -> Option<(usize, usize)> {
    for r in 0..f.rows.len() {
        if f.coeffs.row(r).iter().all(|v| *v == T::zero()) {
            continue;
        }
        for (j, &k) in f.rows.get(r).iter().enumerate() {
            if limit(j).is_none_or(|cap| k > cap) {
                return Some((j, k));
            }
        }
    }
    None
}

/// `δF`. Refuses fields with a nonzero top level.
pub fn delta<T: Scalar>(disc: &Discretization<T>, f: &GammaMuVector<T>) -> Result<GammaMuVector<T>> {
    check_matches(disc, f)?;
    if !f.top_level_is_zero() {
        return Err(Error::TruncationLoss(format!(
            "level {} is nonzero and its image would leave the truncation",
            disc.truncation().level
        )));
    }
    let (up, _) = apply_delta(disc, &f.field, disc.fock_set());
    Ok(GammaMuVector { field: up })
}

/// `δ*F`. Refuses fields with degrees above `K - deg V_j'`.
pub fn delta_star<T: Scalar>(disc: &Discretization<T>, f: &GammaMuVector<T>) -> Result<GammaMuVector<T>> {
    check_matches(disc, f)?;
    if let Some((j, k)) = first_degree_violation(&f.field, |j| disc.reliable_adjoint_degree(j)) {
        return Err(Error::DegreeOverflow(format!(
            "coordinate {j}: degree {k} times β leaves the truncation (limit {:?})",
            disc.reliable_adjoint_degree(j)
        )));
    }
    let (down, lost) = apply_delta_star(disc, &f.field, disc.x_set(), disc.fock_set());
    debug_assert!(!lost);
    Ok(GammaMuVector { field: down })
}

/// `dΓ(R_μ)F`. Refuses fields with degrees above `K - deg V_j' + 1`.
pub fn dgamma_r<T: Scalar>(disc: &Discretization<T>, f: &GammaMuVector<T>) -> Result<GammaMuVector<T>> {
    check_matches(disc, f)?;
    if let Some((j, k)) = first_degree_violation(&f.field, |j| Some(disc.reliable_degree(j))) {
        return Err(Error::DegreeOverflow(format!(
            "coordinate {j}: degree {k} times V'' leaves the truncation (limit {})",
            disc.reliable_degree(j)
        )));
    }
    let (out, lost) = apply_dgamma(disc, &f.field, disc.x_set());
    debug_assert!(!lost);
    Ok(GammaMuVector { field: out })
}

pub(crate) fn gamma_label<T: Scalar>(disc: &Discretization<T>) -> String {
    format!(
        "{} (x) Fock occupations |alpha| <= {}",
        basis_label(disc),
        disc.truncation().level
    )
}

/// Flat indices whose occupation level is below `N`.
fn below_top_level<T: Scalar>(disc: &Discretization<T>) -> Vec<usize> {
    let fock = disc.fock_set();
    let n = disc.truncation().level;
    (0..disc.x_set().len() * fock.len())
        .filter(|i| fock.total(i % fock.len()) < n)
        .collect()
}

/// Flat indices whose degrees allow an exact `δ*`.
fn adjoint_reliable<T: Scalar>(disc: &Discretization<T>) -> Vec<usize> {
    let x = disc.x_set();
    let nf = disc.fock_set().len();
    (0..x.len())
        .filter(|&r| {
            x.get(r)
                .iter()
                .enumerate()
                .all(|(j, &k)| disc.reliable_adjoint_degree(j).is_some_and(|cap| k <= cap))
        })
        .flat_map(|r| (0..nf).map(move |q| r * nf + q))
        .collect()
}

/// Matrices of `δ` and `δ*` over the basis of [`GammaMuVector`]. Columns of
/// `δ` at level `N` lose their image to the truncation; columns of `δ*` are
/// exact up to degree `K - deg V_j'`.
pub fn assemble_delta_matrices<T: Scalar>(disc: &Discretization<T>) -> (OperatorMatrix<T>, OperatorMatrix<T>) {
    let label = gamma_label(disc);
    let all: Vec<usize> = (0..disc.x_set().len() * disc.fock_set().len()).collect();
    let up = disc.assemble_columns(disc.x_set(), disc.fock_set(), |f| {
        apply_delta(disc, f, disc.fock_up()).0
    });
    let down = disc.assemble_columns(disc.x_set(), disc.fock_set(), |f| {
        apply_delta_star(disc, f, disc.x_ext(), disc.fock_set()).0
    });
    let delta = OperatorMatrix {
        entries: up,
        row_basis: label.clone(),
        col_basis: label.clone(),
        symmetric: false,
        truncation_note: "columns at the top level map out of the truncation".into(),
        reliable_rows: all.clone(),
        reliable_cols: below_top_level(disc),
    };
    let delta_star = OperatorMatrix {
        entries: down,
        row_basis: label.clone(),
        col_basis: label,
        symmetric: false,
        truncation_note: "columns above degree K - deg V' map out of the truncation".into(),
        reliable_rows: all,
        reliable_cols: adjoint_reliable(disc),
    };
    (delta, delta_star)
}

/// Matrix of `Δ_μ = δ*δ + δδ*`.
pub fn assemble_laplacian<T: Scalar>(disc: &Discretization<T>) -> OperatorMatrix<T> {
    let entries = disc.assemble_columns(disc.x_set(), disc.fock_set(), |f| apply_laplacian(disc, f));
    OperatorMatrix::square(
        entries,
        gamma_label(disc),
        true,
        disc.reliable_flat(disc.fock_set().len()),
        crate::dirichlet::reliability_note(disc),
    )
}

/// Matrix of `dΓ(R_μ)`.
pub fn assemble_dgamma<T: Scalar>(disc: &Discretization<T>) -> OperatorMatrix<T> {
    let entries = disc.assemble_columns(disc.x_set(), disc.fock_set(), |f| apply_dgamma(disc, f, disc.x_ext()).0);
    OperatorMatrix::square(
        entries,
        gamma_label(disc),
        true,
        disc.reliable_flat(disc.fock_set().len()),
        crate::dirichlet::reliability_note(disc),
    )
}

/// Matrix of `H_μ ⊗ 1`.
pub fn assemble_h_mu_lifted<T: Scalar>(disc: &Discretization<T>) -> OperatorMatrix<T> {
    let entries = disc.assemble_columns(disc.x_set(), disc.fock_set(), |f| apply_h_mu(disc, f));
    OperatorMatrix::square(
        entries,
        gamma_label(disc),
        true,
        disc.reliable_flat(disc.fock_set().len()),
        crate::dirichlet::reliability_note(disc),
    )
}

/// `Δ_μ = H_μ ⊗ 1 + 1 ⊗ dΓ(R_μ) + A_μ` with `A_μ` obtained by subtraction.
#[derive(Debug, Clone)]
pub struct Decomposition<T: Scalar> {
    pub laplacian: OperatorMatrix<T>,
    pub h_mu: OperatorMatrix<T>,
    pub dgamma: OperatorMatrix<T>,
    pub a_mu: OperatorMatrix<T>,
    /// Symmetry defect of `A_μ` on the reliable block.
    pub symmetry_residual: T,
    /// Ascending eigenvalues of the reliable block of `A_μ`.
    pub a_spectrum: Vec<T>,
}

impl<T: Scalar> Decomposition<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.a_spectrum.first().copied().unwrap_or_else(T::zero)
    }
}

pub fn decompose_laplacian<T: Scalar>(disc: &Discretization<T>) -> Decomposition<T> {
    let laplacian = assemble_laplacian(disc);
    let h_mu = assemble_h_mu_lifted(disc);
    let dgamma = assemble_dgamma(disc);
    let a_entries = &laplacian.entries - &h_mu.entries - &dgamma.entries;
    let a_mu = laplacian.with_entries(a_entries);
    let block = a_mu.reliable_block();
    Decomposition {
        symmetry_residual: crate::operator::symmetry_defect(&block),
        a_spectrum: sorted_eigenvalues(&block),
        laplacian,
        h_mu,
        dgamma,
        a_mu,
    }
}

/// Largest normalized defect `|⟨δu, v⟩ - ⟨u, δ*v⟩| / (1 + ‖u‖‖v‖)` over
/// `pairs` random pairs supported on the reliable columns of `δ` and `δ*`.
/// Inner products are taken by quadrature, not through the matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityDefect {
    pub pairs: usize,
    pub max_defect: f64,
}

pub fn duality_defect<T: Scalar>(disc: &Discretization<T>, pairs: usize, seed: u64) -> Result<DualityDefect> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = disc.x_set().len() * disc.fock_set().len();
    let mut random_on = |support: &[usize]| {
        let mut v = DVector::zeros(n);
        for &i in support {
            v[i] = T::lit(rng.random_range(-1.0..1.0));
        }
        v
    };
    let (u_support, v_support) = (below_top_level(disc), adjoint_reliable(disc));
    let mut max_defect = 0.0f64;
    for _ in 0..pairs {
        let u = GammaMuVector::from_flat(disc, &random_on(&u_support))?;
        let v = GammaMuVector::from_flat(disc, &random_on(&v_support))?;
        let lhs = delta(disc, &u)?.quadrature_inner(disc, &v)?;
        let rhs = u.quadrature_inner(disc, &delta_star(disc, &v)?)?;
        let scale = T::one() + u.norm() * v.norm();
        max_defect = max_defect.max(((lhs - rhs).abs() / scale).as_f64());
    }
    Ok(DualityDefect { pairs, max_defect })
}
