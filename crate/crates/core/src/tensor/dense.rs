use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Dense nonnegative tensor in row-major layout (last index fastest).
///
/// Tensors over state pairs use the shape `(I_1..I_D, I_1..I_D)`, so a pair
/// tensor reshaped to `I x I` has the current state on rows and the next
/// state on columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&n| n == 0) {
        return dim_err(format!("tensor shape must be non-empty and positive, got {shape:?}"));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Dimension(format!("tensor size overflows for {shape:?}")))
}

impl<T: Scalar> DenseTensor<T> {
    /// Builds a tensor, rejecting negative or non-finite entries.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if data.len() != len {
            return dim_err(format!(
                "data length {} does not match shape {shape:?} ({len} entries)",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::Domain(format!(
                "tensor entry {pos} is {} (entries must be finite and nonnegative)",
                data[pos]
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = checked_len(&shape)?;
        Ok(Self { shape, data: vec![T::zero(); len] })
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.iter_mut().for_each(|x| *x = value);
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return dim_err(format!("index of order {} for tensor of order {}", index.len(), self.order()));
        }
        let mut k = 0;
        for (axis, (&i, &n)) in index.iter().zip(&self.shape).enumerate() {
            if i >= n {
                return dim_err(format!("index {i} out of range on axis {axis} of size {n}"));
            }
            k = k * n + i;
        }
        Ok(k)
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(index)?])
    }

    /// Same data viewed with a different shape of equal size.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if len != self.data.len() {
            return dim_err(format!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Self { shape, data: self.data })
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return dim_err(format!("shape mismatch: {:?} vs {:?}", self.shape, other.shape));
        }
        Ok(())
    }

    /// Interprets the tensor as a `rows x (len / rows)` matrix split after `split_axes` axes.
    pub fn matrix_dims(&self, split_axes: usize) -> Result<(usize, usize)> {
        if split_axes == 0 || split_axes >= self.order() {
            return dim_err(format!("cannot split order-{} tensor after {split_axes} axes", self.order()));
        }
        let rows: usize = self.shape[..split_axes].iter().product();
        Ok((rows, self.data.len() / rows))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> DenseTensor<U> {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }
}
