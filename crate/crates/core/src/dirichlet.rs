//! The Dirichlet operator `H_μ = -Δ - ⟨β_μ, ∇⟩` and its form
//! `ℰ_μ(u, v) = ∫ ⟨∇u, ∇v⟩ dμ`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::build_quadrature;
use crate::error::{Error, Result};
use crate::index::MultiIndexSet;
use crate::operator::OperatorMatrix;
use crate::space::{Discretization, TensorField};
use crate::Scalar;

/// `H_μ` applied to a field whose rows lie in `x_set`; the image lies in
/// `x_ext` and is exact.
pub(crate) fn apply_h_mu<T: Scalar>(disc: &Discretization<T>, f: &TensorField<T>) -> TensorField<T> {
    let mut out = TensorField::zeros(disc.x_ext().clone(), f.cols.clone());
    for j in 0..disc.dimension() {
        let g = disc.differentiate(f, j);
        let (h, lost) = disc.codifferentiate(&g, j, disc.x_ext());
        debug_assert!(!lost);
        out.add_assign(&h);
    }
    out
}

/// Galerkin matrix of `H_μ` on tensor polynomials of per-coordinate degree
/// `≤ K`, ordered like [`Discretization::x_set`].
pub fn assemble_h_mu<T: Scalar>(disc: &Discretization<T>) -> OperatorMatrix<T> {
    let vacuum = Arc::new(MultiIndexSet::simplex(disc.dimension(), 0));
    let entries = disc.assemble_columns(disc.x_set(), &vacuum, |f| apply_h_mu(disc, f));
    OperatorMatrix::square(
        entries,
        basis_label(disc),
        true,
        disc.reliable_x_rows(),
        reliability_note(disc),
    )
}

pub(crate) fn basis_label<T: Scalar>(disc: &Discretization<T>) -> String {
    format!(
        "L2(mu) polynomials, d = {}, degree <= {} per coordinate",
        disc.dimension(),
        disc.truncation().degree
    )
}

pub(crate) fn reliability_note<T: Scalar>(disc: &Discretization<T>) -> String {
    let degrees: Vec<String> = (0..disc.dimension())
        .map(|j| disc.reliable_degree(j).to_string())
        .collect();
    format!(
        "rows with a coordinate degree above [{}] leave the span before projection",
        degrees.join(", ")
    )
}

/// Tensor Gauss rule for `∫ ⟨∇u, ∇v⟩ dμ` with basis values and derivatives
/// at the nodes. Derivatives come from the monomial coefficients, not from
/// the differentiation matrix used by the assemblies.
struct FormTables<T> {
    weights: Vec<Vec<T>>,
    values: Vec<Vec<Vec<T>>>,
    slopes: Vec<Vec<Vec<T>>>,
}

fn form_tables<T: Scalar>(disc: &Discretization<T>) -> Result<FormTables<T>> {
    let k = disc.truncation().degree;
    let mut weights = Vec::new();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for basis in disc.bases() {
        let rule = build_quadrature(basis.measure(), k + 2)?;
        let polys: Vec<_> = (0..=k).map(|i| basis.poly(i)).collect();
        let derivs: Vec<_> = polys.iter().map(|p| p.derivative()).collect();
        values.push(
            rule.nodes
                .iter()
                .map(|&x| polys.iter().map(|p| p.eval(x)).collect())
                .collect(),
        );
        slopes.push(
            rule.nodes
                .iter()
                .map(|&x| derivs.iter().map(|p| p.eval(x)).collect())
                .collect(),
        );
        weights.push(rule.weights);
    }
    Ok(FormTables {
        weights,
        values,
        slopes,
    })
}

/// Quadrature matrix `E[a, b] = ∫ ⟨∇p_a, ∇p_b⟩ dμ` over `x_set`. Product
/// structure reduces it to one-dimensional Gram and stiffness matrices.
pub fn dirichlet_form_matrix<T: Scalar>(disc: &Discretization<T>) -> Result<DMatrix<T>> {
    let tables = form_tables(disc)?;
    let k = disc.truncation().degree;
    let d = disc.dimension();
    let mut gram = Vec::with_capacity(d);
    let mut stiffness = Vec::with_capacity(d);
    for j in 0..d {
        let mut g = DMatrix::zeros(k + 1, k + 1);
        let mut s = DMatrix::zeros(k + 1, k + 1);
        for (q, &w) in tables.weights[j].iter().enumerate() {
            let p = &tables.values[j][q];
            let dp = &tables.slopes[j][q];
            for a in 0..=k {
                for b in 0..=k {
                    g[(a, b)] += w * p[a] * p[b];
                    s[(a, b)] += w * dp[a] * dp[b];
                }
            }
        }
        gram.push(g);
        stiffness.push(s);
    }
    let set = disc.x_set();
    let n = set.len();
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (set.get(r), set.get(c));
        (0..d).fold(T::zero(), |acc, j| {
            let term = (0..d).fold(T::one(), |prod, i| {
                let m = if i == j { &stiffness[i] } else { &gram[i] };
                prod * m[(a[i], b[i])]
            });
            acc + term
        })
    }))
}

/// `ℰ_μ(u, v)` for coefficient vectors over [`Discretization::x_set`].
pub fn dirichlet_form<T: Scalar>(disc: &Discretization<T>, u: &[T], v: &[T]) -> Result<T> {
    let n = disc.x_set().len();
    if u.len() != n || v.len() != n {
        return Err(Error::InvalidArgument(format!(
            "coefficient vectors must have length {n} (got {} and {})",
            u.len(),
            v.len()
        )));
    }
    let e = dirichlet_form_matrix(disc)?;
    let mut total = T::zero();
    for r in 0..n {
        if u[r] == T::zero() {
            continue;
        }
        for c in 0..n {
            total += u[r] * e[(r, c)] * v[c];
        }
    }
    Ok(total)
}
