//! Unfoldings, Khatri-Rao products, MTTKRP and tensor norms.
//!
//! Ordering conventions (shared with the file formats):
//! * tensors are row-major, last index fastest;
//! * `mode_unfold(t, m)` has rows indexed by axis `m` and columns indexed
//!   row-major over the remaining axes in ascending order;
//! * `khatri_rao([A, B, ..])` has its row index row-major over the inputs,
//!   first input slowest, so `khatri_rao` of the factors of the remaining
//!   axes in ascending order lines up with the columns of `mode_unfold`.

use ndarray::{Array2, ArrayView2};

use super::DenseTensor;
use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

fn check_mode<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return dim_err(format!("mode {mode} out of range for order-{} tensor", t.order()));
    }
    Ok(())
}

/// `(prod of axes before mode, size of mode, prod of axes after mode)`.
fn split_at_mode(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

/// Mode-`mode` matricization; see the module docs for the column order.
pub fn mode_unfold<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<Array2<T>> {
    check_mode(t, mode)?;
    let (left, n, right) = split_at_mode(t.shape(), mode);
    let data = t.data();
    let mut out = Array2::zeros((n, left * right));
    for l in 0..left {
        for i in 0..n {
            let fiber = &data[(l * n + i) * right..(l * n + i + 1) * right];
            for (r, &x) in fiber.iter().enumerate() {
                out[[i, l * right + r]] = x;
            }
        }
    }
    Ok(out)
}

/// Inverse of [`mode_unfold`].
pub fn refold<T: Scalar>(m: &Array2<T>, mode: usize, shape: &[usize]) -> Result<DenseTensor<T>> {
    if mode >= shape.len() {
        return dim_err(format!("mode {mode} out of range for shape {shape:?}"));
    }
    let (left, n, right) = split_at_mode(shape, mode);
    if m.dim() != (n, left * right) {
        return dim_err(format!("matrix {:?} cannot refold into {shape:?} along mode {mode}", m.dim()));
    }
    let mut data = vec![T::zero(); left * n * right];
    for l in 0..left {
        for i in 0..n {
            for r in 0..right {
                data[(l * n + i) * right + r] = m[[i, l * right + r]];
            }
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Column-wise Kronecker product; column `f` is `A_1(:, f) (x) A_2(:, f) (x) ...`.
pub fn khatri_rao<T: Scalar>(matrices: &[Array2<T>]) -> Result<Array2<T>> {
    let views: Vec<_> = matrices.iter().map(|m| m.view()).collect();
    khatri_rao_views(&views)
}

pub fn khatri_rao_views<T: Scalar>(matrices: &[ArrayView2<'_, T>]) -> Result<Array2<T>> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Dimension("khatri_rao needs at least one matrix".into()))?;
    let cols = first.ncols();
    if let Some(bad) = matrices.iter().find(|m| m.ncols() != cols) {
        return dim_err(format!("khatri_rao column mismatch: {} vs {cols}", bad.ncols()));
    }
    let mut acc = first.to_owned();
    for next in &matrices[1..] {
        let mut grown = Array2::zeros((acc.nrows() * next.nrows(), cols));
        for (i, a_row) in acc.outer_iter().enumerate() {
            for (j, b_row) in next.outer_iter().enumerate() {
                let mut row = grown.row_mut(i * next.nrows() + j);
                for f in 0..cols {
                    row[f] = a_row[f] * b_row[f];
                }
            }
        }
        acc = grown;
    }
    Ok(acc)
}

/// Matricized tensor times Khatri-Rao product for `mode`.
///
/// `bank` holds one factor matrix per tensor axis *except* `mode`, in
/// ascending axis order. The result equals
/// `mode_unfold(t, mode) . khatri_rao(bank)` without forming either operand.
pub fn mttkrp<T: Scalar>(t: &DenseTensor<T>, bank: &[&Array2<T>], mode: usize) -> Result<Array2<T>> {
    check_mode(t, mode)?;
    if bank.len() + 1 != t.order() {
        return dim_err(format!(
            "mttkrp over mode {mode} of an order-{} tensor needs {} factors, got {}",
            t.order(),
            t.order() - 1,
            bank.len()
        ));
    }
    let rank = bank.first().map_or(1, |m| m.ncols());
    let axes = (0..t.order()).filter(|&a| a != mode);
    for (m, axis) in bank.iter().zip(axes) {
        if m.dim() != (t.shape()[axis], rank) {
            return dim_err(format!(
                "factor for axis {axis} has shape {:?}, expected ({}, {rank})",
                m.dim(),
                t.shape()[axis]
            ));
        }
    }
    let ones = Array2::ones((1, rank));
    let left_kr = if mode == 0 {
        ones.clone()
    } else {
        khatri_rao_views(&bank[..mode].iter().map(|m| m.view()).collect::<Vec<_>>())?
    };
    let right_kr = if mode + 1 == t.order() {
        ones
    } else {
        khatri_rao_views(&bank[mode..].iter().map(|m| m.view()).collect::<Vec<_>>())?
    };
    let (left, n, right) = split_at_mode(t.shape(), mode);
    let data = t.data();
    let right_rows: Vec<&[T]> = (0..right)
        .map(|r| right_kr.row(r).to_slice().expect("standard layout"))
        .collect();
    let mut out = Array2::zeros((n, rank));
    let mut partial = vec![T::zero(); rank];
    for l in 0..left {
        let lrow = left_kr.row(l);
        for i in 0..n {
            let fiber = &data[(l * n + i) * right..(l * n + i + 1) * right];
            partial.iter_mut().for_each(|p| *p = T::zero());
            let mut any = false;
            for (&x, kr) in fiber.iter().zip(&right_rows) {
                if x == T::zero() {
                    continue;
                }
                any = true;
                for (p, &k) in partial.iter_mut().zip(kr.iter()) {
                    *p += x * k;
                }
            }
            if any {
                let mut orow = out.row_mut(i);
                for f in 0..rank {
                    orow[f] += lrow[f] * partial[f];
                }
            }
        }
    }
    Ok(out)
}

/// Entrywise absolute sum.
pub fn l1_norm<T: Scalar>(t: &DenseTensor<T>) -> T {
    t.data().iter().map(|x| x.abs()).sum()
}

/// Entrywise absolute distance.
pub fn l1_distance<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<T> {
    a.same_shape(b)?;
    Ok(a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y).abs()).sum())
}

/// Frobenius distance `||a - b||_F`.
pub fn frob_error<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<T> {
    a.same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt())
}
