//! Dense operator matrices with basis labels and reliable-block bookkeeping.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::Scalar;

/// Matrix of an operator in a declared tensor basis. Rows and columns
/// outside the reliable sets are kept but excluded from spectral claims.
#[derive(Debug, Clone)]
pub struct OperatorMatrix<T: Scalar> {
    pub entries: DMatrix<T>,
    pub row_basis: String,
    pub col_basis: String,
    pub symmetric: bool,
    pub truncation_note: String,
    pub reliable_rows: Vec<usize>,
    pub reliable_cols: Vec<usize>,
}

impl<T: Scalar> OperatorMatrix<T> {
    /// Square operator with one reliable index set for rows and columns.
    pub fn square(
        entries: DMatrix<T>,
        basis: impl Into<String>,
        symmetric: bool,
        reliable: Vec<usize>,
        note: impl Into<String>,
    ) -> Self {
        let basis = basis.into();
        Self {
            entries,
            row_basis: basis.clone(),
            col_basis: basis,
            symmetric,
            truncation_note: note.into(),
            reliable_cols: reliable.clone(),
            reliable_rows: reliable,
        }
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn reliable_block(&self) -> DMatrix<T> {
        submatrix(&self.entries, &self.reliable_rows, &self.reliable_cols)
    }

    /// `‖M - Mᵀ‖_F / max(1, ‖M‖_F)` over the full matrix.
    pub fn symmetry_defect(&self) -> T {
        symmetry_defect(&self.entries)
    }

    /// Same defect restricted to the reliable block.
    pub fn reliable_symmetry_defect(&self) -> T {
        symmetry_defect(&self.reliable_block())
    }

    /// Ascending eigenvalues of the symmetrized reliable block.
    pub fn reliable_eigenvalues(&self) -> Vec<T> {
        sorted_eigenvalues(&self.reliable_block())
    }

    pub fn min_reliable_eigenvalue(&self) -> T {
        self.reliable_eigenvalues().first().copied().unwrap_or_else(T::zero)
    }

    /// Frobenius norm of the reliable block of `self - other`.
    pub fn reliable_distance(&self, other: &Self) -> T {
        (self.reliable_block() - other.reliable_block()).norm()
    }

    pub fn with_entries(&self, entries: DMatrix<T>) -> Self {
        Self {
            entries,
            ..self.clone()
        }
    }
}

pub fn submatrix<T: Scalar>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn symmetry_defect<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.nrows() != m.ncols() {
        return T::max_value().unwrap_or_else(T::one);
    }
    (m - m.transpose()).norm() / T::one().max(m.norm())
}

/// Ascending eigenvalues of `(M + Mᵀ) / 2`.
pub fn sorted_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * T::lit(0.5);
    let mut values: Vec<T> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values
}

/// Largest element-wise difference between two ascending spectra of equal
/// length; infinite when the lengths differ.
pub fn spectral_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.len() != b.len() {
        return T::max_value().unwrap_or_else(T::one);
    }
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(sorted_eigenvalues(&m), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn reliable_block_extracts_principal_submatrix() {
        let m = DMatrix::from_fn(4, 4, |i, j| (10 * i + j) as f64);
        let op = OperatorMatrix::square(m, "test", false, vec![0, 2], "");
        let b = op.reliable_block();
        assert_eq!(b[(0, 1)], 2.0);
        assert_eq!(b[(1, 0)], 20.0);
        assert_eq!(b[(1, 1)], 22.0);
    }

    #[test]
    fn symmetry_defect_scales() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((symmetry_defect(&m) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(symmetry_defect(&DMatrix::<f64>::identity(3, 3)), 0.0);
    }
}
