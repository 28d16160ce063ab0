//! Spectral low-rank matrix baseline: truncated SVD of the joint matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Parameters stored by a rank-`m` factorization of an `states x states` matrix.
pub fn slrm_parameter_count(states: usize, rank: usize) -> usize {
    (2 * states + 1) * rank
}

/// Views a pair tensor as its `I x I` matrix (current state on rows).
pub fn pair_matrix<T: Scalar>(t: &DenseTensor<T>) -> Result<DMatrix<f64>> {
    if t.order() % 2 != 0 {
        return Err(Error::Dimension(format!("shape {:?} is not a pair shape", t.shape())));
    }
    let (rows, cols) = t.matrix_dims(t.order() / 2)?;
    if rows != cols {
        return Err(Error::Dimension(format!("pair tensor reshapes to {rows}x{cols}, not square")));
    }
    Ok(DMatrix::from_row_iterator(rows, cols, t.data().iter().map(|x| x.as_f64())))
}

/// Best rank-`rank` approximation in Frobenius norm, before any clipping.
pub fn truncated_svd(matrix: &DMatrix<f64>, rank: usize) -> Result<DMatrix<f64>> {
    let n = matrix.nrows().min(matrix.ncols());
    if rank == 0 || rank > n {
        return Err(Error::Domain(format!("rank {rank} outside 1..={n}")));
    }
    let svd = matrix.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Convergence("SVD did not produce singular vectors".into())),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(matrix.nrows(), matrix.ncols());
    for &k in &order[..rank] {
        out += u.column(k) * vt.row(k) * svd.singular_values[k];
    }
    Ok(out)
}

/// Rank-`rank` SVD reconstruction, negatives clipped, rescaled to mass 1,
/// returned in the target's tensor shape.
pub fn slrm_fit<T: Scalar>(target: &DenseTensor<T>, rank: usize) -> Result<DenseTensor<T>> {
    let matrix = pair_matrix(target)?;
    let approx = truncated_svd(&matrix, rank)?;
    let mut data: Vec<f64> = Vec::with_capacity(approx.len());
    for i in 0..approx.nrows() {
        for j in 0..approx.ncols() {
            data.push(approx[(i, j)].max(0.0));
        }
    }
    let mass: f64 = data.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Numerical { cycle: 0, message: "SLRM reconstruction has no positive mass".into() });
    }
    DenseTensor::new(target.shape().to_vec(), data.into_iter().map(|x| T::lit(x / mass)).collect())
}
