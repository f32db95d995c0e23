use nalgebra::{DMatrix, DVector};

use crate::error::TensorError;
use crate::C64;

/// Column-major complex matrix.
pub type CMatrix = DMatrix<C64>;
/// Column-major real matrix.
pub type RMatrix = DMatrix<f64>;

/// Block-diagonal matrix `Diag[A_1, ..., A_n]`.
pub fn direct_sum(blocks: &[CMatrix]) -> Result<CMatrix, TensorError> {
    if blocks.is_empty() {
        return Err(TensorError::EmptyDirectSum);
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    Ok(out)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-major vectorization of a matrix.
pub fn vec_matrix(m: &CMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec_matrix(v: &[C64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v)
}
