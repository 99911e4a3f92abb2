//! The tensor discretization `span{p_k(x)} ⊗ span{e(α)}` shared by every
//! assembly, and coefficient fields on it.
//!
//! Operators are applied exactly: each one-dimensional factor maps into an
//! index set large enough to hold its image, and projection onto the working
//! truncation happens only at the end. Compressions assembled this way agree
//! with `⟨e_i, L e_k⟩` for every retained pair.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::PolyBasis;
use crate::error::{Error, Result};
use crate::index::MultiIndexSet;
use crate::measures::{check_ulc, ProductMeasure, UlcCertificate};
use crate::Scalar;

/// Polynomial degree cap `K` per coordinate and particle cap `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Truncation {
    pub degree: usize,
    pub level: usize,
}

impl Truncation {
    pub fn new(degree: usize, level: usize) -> Self {
        Self { degree, level }
    }
}

/// Grid resolution used when assembly certifies the ULC property.
const ULC_RESOLUTION: usize = 1001;

/// Coefficients of `Σ c[r, q] φ_r ⊗ ψ_q`, with `φ_r` indexed by `rows` (an
/// x-side polynomial grid) and `ψ_q` by `cols` (occupation numbers or
/// y-side Hermite degrees).
#[derive(Debug, Clone)]
pub struct TensorField<T: Scalar> {
    pub rows: Arc<MultiIndexSet>,
    pub cols: Arc<MultiIndexSet>,
    pub coeffs: DMatrix<T>,
}

impl<T: Scalar> TensorField<T> {
    pub fn zeros(rows: Arc<MultiIndexSet>, cols: Arc<MultiIndexSet>) -> Self {
        let coeffs = DMatrix::zeros(rows.len(), cols.len());
        Self { rows, cols, coeffs }
    }

    pub fn unit(rows: Arc<MultiIndexSet>, cols: Arc<MultiIndexSet>, r: usize, q: usize) -> Self {
        let mut f = Self::zeros(rows, cols);
        f.coeffs[(r, q)] = T::one();
        f
    }

    /// Flattened with the row index slowest: `r * cols.len() + q`.
    pub fn to_flat(&self) -> DVector<T> {
        let nc = self.cols.len();
        DVector::from_fn(self.rows.len() * nc, |i, _| self.coeffs[(i / nc, i % nc)])
    }

    pub fn from_flat(rows: Arc<MultiIndexSet>, cols: Arc<MultiIndexSet>, flat: &DVector<T>) -> Self {
        let nc = cols.len();
        assert_eq!(flat.len(), rows.len() * nc, "flat vector has the wrong length");
        let coeffs = DMatrix::from_fn(rows.len(), nc, |r, q| flat[r * nc + q]);
        Self { rows, cols, coeffs }
    }

    pub fn norm_squared(&self) -> T {
        self.coeffs.norm_squared()
    }

    /// Applies `op` along `axis` of the row multi-indices:
    /// `φ_s ↦ Σ_r op[r, s_axis] φ_{s with axis = r}`. Returns the image in
    /// `out_rows` and whether any nonzero contribution fell outside it.
    pub fn apply_rows(&self, axis: usize, op: &DMatrix<T>, out_rows: &Arc<MultiIndexSet>) -> (Self, bool) {
        let mut out = Self::zeros(out_rows.clone(), self.cols.clone());
        let mut lost = false;
        let mut scratch = Vec::with_capacity(self.rows.dim());
        for s in 0..self.rows.len() {
            let row = self.coeffs.row(s);
            if row.iter().all(|v| *v == T::zero()) {
                continue;
            }
            let idx = self.rows.get(s);
            let c = idx[axis];
            assert!(c < op.ncols(), "operator too small for degree {c} on axis {axis}");
            scratch.clear();
            scratch.extend_from_slice(idx);
            for r in 0..op.nrows() {
                let v = op[(r, c)];
                if v == T::zero() {
                    continue;
                }
                scratch[axis] = r;
                match out_rows.position(&scratch) {
                    Some(t) => {
                        for q in 0..self.cols.len() {
                            out.coeffs[(t, q)] += v * self.coeffs[(s, q)];
                        }
                    }
                    None => lost = true,
                }
            }
        }
        (out, lost)
    }

    /// Column counterpart of [`apply_rows`](Self::apply_rows).
    pub fn apply_cols(&self, axis: usize, op: &DMatrix<T>, out_cols: &Arc<MultiIndexSet>) -> (Self, bool) {
        let mut out = Self::zeros(self.rows.clone(), out_cols.clone());
        let mut lost = false;
        let mut scratch = Vec::with_capacity(self.cols.dim());
        for s in 0..self.cols.len() {
            let col = self.coeffs.column(s);
            if col.iter().all(|v| *v == T::zero()) {
                continue;
            }
            let idx = self.cols.get(s);
            let c = idx[axis];
            assert!(c < op.ncols(), "operator too small for degree {c} on axis {axis}");
            scratch.clear();
            scratch.extend_from_slice(idx);
            for r in 0..op.nrows() {
                let v = op[(r, c)];
                if v == T::zero() {
                    continue;
                }
                scratch[axis] = r;
                match out_cols.position(&scratch) {
                    Some(t) => {
                        for p in 0..self.rows.len() {
                            out.coeffs[(p, t)] += v * self.coeffs[(p, s)];
                        }
                    }
                    None => lost = true,
                }
            }
        }
        (out, lost)
    }

    /// Restriction to (or zero-extension onto) other index sets.
    pub fn project(&self, rows: &Arc<MultiIndexSet>, cols: &Arc<MultiIndexSet>) -> (Self, bool) {
        let mut out = Self::zeros(rows.clone(), cols.clone());
        let mut lost = false;
        for s in 0..self.rows.len() {
            let t = rows.position(self.rows.get(s));
            for q in 0..self.cols.len() {
                let v = self.coeffs[(s, q)];
                if v == T::zero() {
                    continue;
                }
                match (t, cols.position(self.cols.get(q))) {
                    (Some(t), Some(u)) => out.coeffs[(t, u)] = v,
                    _ => lost = true,
                }
            }
        }
        (out, lost)
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.rows == other.rows && self.cols == other.cols, "index sets differ");
        self.coeffs += &other.coeffs;
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.coeffs *= s;
        self
    }
}

/// One-dimensional operator matrices per coordinate, at a degree large
/// enough that every composition used by the assemblies is exact.
#[derive(Debug, Clone)]
pub struct Discretization<T: Scalar> {
    measure: ProductMeasure<T>,
    truncation: Truncation,
    ulc: UlcCertificate<T>,
    bases: Vec<PolyBasis<T>>,
    /// Degree raise of multiplication by `β_j`.
    raise: Vec<usize>,
    derivative: Vec<DMatrix<T>>,
    log_derivative: Vec<DMatrix<T>>,
    curvature: Vec<DMatrix<T>>,
    x_set: Arc<MultiIndexSet>,
    x_ext: Arc<MultiIndexSet>,
    fock_set: Arc<MultiIndexSet>,
    fock_up: Arc<MultiIndexSet>,
    creation: DMatrix<T>,
    annihilation: DMatrix<T>,
    number: DMatrix<T>,
}

impl<T: Scalar> Discretization<T> {
    pub fn new(measure: ProductMeasure<T>, truncation: Truncation) -> Result<Self> {
        let ulc = check_ulc(&measure, ULC_RESOLUTION)?;
        let k = truncation.degree;
        let n = truncation.level;
        let d = measure.dimension();
        if k < 1 {
            return Err(Error::DegreeOverflow("polynomial degree must be at least 1".into()));
        }
        let raise: Vec<usize> = measure.factors().iter().map(|f| f.log_derivative_degree()).collect();
        for (j, &s) in raise.iter().enumerate() {
            if s > k + 1 {
                return Err(Error::DegreeOverflow(format!(
                    "coordinate {j}: β·∇u raises degree by {} and leaves no reliable rows at degree {k}",
                    s - 1
                )));
            }
        }
        let mut bases = Vec::with_capacity(d);
        let mut derivative = Vec::with_capacity(d);
        let mut log_derivative = Vec::with_capacity(d);
        let mut curvature = Vec::with_capacity(d);
        for (f, &s) in measure.factors().iter().zip(&raise) {
            let basis = PolyBasis::new(f, k + s)?;
            derivative.push(basis.differentiation().clone());
            let beta = -f.potential_derivative();
            log_derivative.push(basis.multiplication_by(&beta)?);
            curvature.push(basis.multiplication_by(f.potential_second_derivative())?);
            bases.push(basis);
        }
        let x_set = Arc::new(MultiIndexSet::grid(&vec![k; d]));
        let ext_bounds: Vec<usize> = raise.iter().map(|s| k + s).collect();
        let x_ext = Arc::new(MultiIndexSet::grid(&ext_bounds));
        let fock_set = Arc::new(MultiIndexSet::simplex(d, n));
        let fock_up = Arc::new(MultiIndexSet::simplex(d, n + 1));
        let (creation, annihilation, number) = ladder_matrices(n + 2);
        Ok(Self {
            measure,
            truncation,
            ulc,
            bases,
            raise,
            derivative,
            log_derivative,
            curvature,
            x_set,
            x_ext,
            fock_set,
            fock_up,
            creation,
            annihilation,
            number,
        })
    }

    pub fn measure(&self) -> &ProductMeasure<T> {
        &self.measure
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn ulc(&self) -> &UlcCertificate<T> {
        &self.ulc
    }

    pub fn dimension(&self) -> usize {
        self.measure.dimension()
    }

    /// Per-coordinate bases, built to degree `K + deg V_j'`.
    pub fn bases(&self) -> &[PolyBasis<T>] {
        &self.bases
    }

    pub fn raise(&self, axis: usize) -> usize {
        self.raise[axis]
    }

    pub fn x_set(&self) -> &Arc<MultiIndexSet> {
        &self.x_set
    }

    pub fn x_ext(&self) -> &Arc<MultiIndexSet> {
        &self.x_ext
    }

    pub fn fock_set(&self) -> &Arc<MultiIndexSet> {
        &self.fock_set
    }

    pub fn fock_up(&self) -> &Arc<MultiIndexSet> {
        &self.fock_up
    }

    pub fn derivative_matrix(&self, axis: usize) -> &DMatrix<T> {
        &self.derivative[axis]
    }

    pub fn log_derivative_matrix(&self, axis: usize) -> &DMatrix<T> {
        &self.log_derivative[axis]
    }

    pub fn curvature_matrix(&self, axis: usize) -> &DMatrix<T> {
        &self.curvature[axis]
    }

    pub fn creation_matrix(&self) -> &DMatrix<T> {
        &self.creation
    }

    pub fn annihilation_matrix(&self) -> &DMatrix<T> {
        &self.annihilation
    }

    /// Largest per-coordinate degree on which `H_μ`, `Δ_μ`, `dΓ(R_μ)` and
    /// `A_μ` columns are exact: `K - deg V_j' + 1`.
    pub fn reliable_degree(&self, axis: usize) -> usize {
        self.truncation.degree + 1 - self.raise[axis]
    }

    /// Largest per-coordinate degree on which `δ*` is exact: `K - deg V_j'`.
    pub fn reliable_adjoint_degree(&self, axis: usize) -> Option<usize> {
        self.truncation.degree.checked_sub(self.raise[axis])
    }

    /// Row indices of `x_set` whose degrees are all within the reliable block.
    pub fn reliable_x_rows(&self) -> Vec<usize> {
        (0..self.x_set.len())
            .filter(|&r| {
                self.x_set
                    .get(r)
                    .iter()
                    .enumerate()
                    .all(|(j, &kj)| kj <= self.reliable_degree(j))
            })
            .collect()
    }

    /// Flat indices of the reliable block of the `x_set ⊗ fibre` space.
    pub fn reliable_flat(&self, fibre_len: usize) -> Vec<usize> {
        self.reliable_x_rows()
            .into_iter()
            .flat_map(|r| (0..fibre_len).map(move |q| r * fibre_len + q))
            .collect()
    }

    /// `∂/∂x_j` (degree lowering; the image stays in the input rows).
    pub fn differentiate(&self, f: &TensorField<T>, axis: usize) -> TensorField<T> {
        let (out, lost) = f.apply_rows(axis, &self.derivative[axis], &f.rows.clone());
        debug_assert!(!lost);
        out
    }

    /// Multiplication by `β_j(x_j)` into `out_rows`.
    pub fn multiply_log_derivative(
        &self,
        f: &TensorField<T>,
        axis: usize,
        out_rows: &Arc<MultiIndexSet>,
    ) -> (TensorField<T>, bool) {
        f.apply_rows(axis, &self.log_derivative[axis], out_rows)
    }

    /// Multiplication by `R_j(x_j) = V_j''(x_j)` into `out_rows`.
    pub fn multiply_curvature(
        &self,
        f: &TensorField<T>,
        axis: usize,
        out_rows: &Arc<MultiIndexSet>,
    ) -> (TensorField<T>, bool) {
        f.apply_rows(axis, &self.curvature[axis], out_rows)
    }

    /// `-(∂_j + β_j)`, the `L₂(μ)` adjoint of `∂_j`, into `out_rows`.
    pub fn codifferentiate(
        &self,
        f: &TensorField<T>,
        axis: usize,
        out_rows: &Arc<MultiIndexSet>,
    ) -> (TensorField<T>, bool) {
        let (d, lost_d) = f.apply_rows(axis, &self.derivative[axis], out_rows);
        let (mut b, lost_b) = self.multiply_log_derivative(f, axis, out_rows);
        b.add_assign(&d);
        (b.scaled(-T::one()), lost_d || lost_b)
    }

    /// Creation `a†_j` on the fibre into `out_cols`.
    pub fn create(&self, f: &TensorField<T>, axis: usize, out_cols: &Arc<MultiIndexSet>) -> (TensorField<T>, bool) {
        f.apply_cols(axis, &self.creation, out_cols)
    }

    /// Annihilation `a_j` on the fibre into `out_cols`.
    pub fn annihilate(&self, f: &TensorField<T>, axis: usize, out_cols: &Arc<MultiIndexSet>) -> (TensorField<T>, bool) {
        f.apply_cols(axis, &self.annihilation, out_cols)
    }

    /// Occupation number `N̂_j` on the fibre.
    pub fn count(&self, f: &TensorField<T>, axis: usize) -> TensorField<T> {
        f.apply_cols(axis, &self.number, &f.cols.clone()).0
    }

    /// Assembles the compression of a linear map given column by column on
    /// unit vectors of `rows ⊗ cols`, projecting each image back.
    pub fn assemble_columns<F>(&self, rows: &Arc<MultiIndexSet>, cols: &Arc<MultiIndexSet>, apply: F) -> DMatrix<T>
    where
        F: Fn(&TensorField<T>) -> TensorField<T> + Sync,
    {
        use rayon::prelude::*;
        let nc = cols.len();
        let dim = rows.len() * nc;
        let columns: Vec<DVector<T>> = (0..dim)
            .into_par_iter()
            .map(|i| {
                let unit = TensorField::unit(rows.clone(), cols.clone(), i / nc, i % nc);
                apply(&unit).project(rows, cols).0.to_flat()
            })
            .collect();
        DMatrix::from_columns(&columns)
    }
}

/// Creation, annihilation and number matrices on occupations `0..size`.
fn ladder_matrices<T: Scalar>(size: usize) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let mut up = DMatrix::zeros(size, size);
    let mut down = DMatrix::zeros(size, size);
    let mut number = DMatrix::zeros(size, size);
    for c in 0..size {
        if c + 1 < size {
            up[(c + 1, c)] = T::from_count(c + 1).sqrt();
        }
        if c > 0 {
            down[(c - 1, c)] = T::from_count(c).sqrt();
        }
        number[(c, c)] = T::from_count(c);
    }
    (up, down, number)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure1D;

    #[test]
    fn ladder_commutator() {
        let (up, down, number) = ladder_matrices::<f64>(6);
        // a a† - a† a = 1 away from the top occupation
        let comm = &down * &up - &up * &down;
        for c in 0..5 {
            assert!((comm[(c, c)] - 1.0).abs() < 1e-14);
        }
        let n = &up * &down;
        assert!((n - number).amax() < 1e-14);
    }

    #[test]
    fn reliable_degrees() {
        let q = Measure1D::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]).unwrap();
        let d = Discretization::new(ProductMeasure::single(q), Truncation::new(8, 2)).unwrap();
        assert_eq!(d.reliable_degree(0), 6);
        assert_eq!(d.reliable_adjoint_degree(0), Some(5));
        let g = Discretization::new(
            ProductMeasure::single(Measure1D::<f64>::standard_gaussian()),
            Truncation::new(5, 2),
        )
        .unwrap();
        assert_eq!(g.reliable_degree(0), 5);
        assert_eq!(g.reliable_x_rows().len(), 6);
    }

    #[test]
    fn too_small_degree_is_refused() {
        let sextic = Measure1D::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.1]).unwrap();
        assert!(matches!(
            Discretization::new(ProductMeasure::single(sextic), Truncation::new(3, 1)),
            Err(Error::DegreeOverflow(_))
        ));
    }

    #[test]
    fn assembly_requires_ulc() {
        let double_well = Measure1D::polynomial(vec![0.0, 0.0, -0.125, 0.0, 0.25]).unwrap();
        assert!(matches!(
            Discretization::new(ProductMeasure::single(double_well), Truncation::new(6, 2)),
            Err(Error::NotUlc { .. })
        ));
    }

    #[test]
    fn apply_rows_reports_loss() {
        let rows = Arc::new(MultiIndexSet::grid(&[2]));
        let cols = Arc::new(MultiIndexSet::simplex(1, 0));
        let f = TensorField::<f64>::unit(rows.clone(), cols, 2, 0);
        let (up, _, _) = ladder_matrices::<f64>(4);
        let (_, lost) = f.apply_rows(0, &up, &rows);
        assert!(lost);
        let bigger = Arc::new(MultiIndexSet::grid(&[3]));
        let (g, lost) = f.apply_rows(0, &up, &bigger);
        assert!(!lost);
        assert!((g.coeffs[(3, 0)] - 3f64.sqrt()).abs() < 1e-15);
    }
}
