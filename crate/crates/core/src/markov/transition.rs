use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{CpdModel, DenseTensor, StateSpace};

/// Default floor below which a marginal entry counts as unvisitable.
pub const DEFAULT_MARGINAL_FLOOR: f64 = 1e-12;

/// Row tolerance for validating a transition tensor.
fn row_tol<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Row-stochastic transition tensor `P(s, s') = p(s' | s)` over a state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel<T> {
    space: StateSpace,
    tensor: DenseTensor<T>,
}

impl<T: Scalar> TransitionModel<T> {
    /// Wraps a pair tensor, checking shape, entry range and row sums.
    pub fn new(space: StateSpace, tensor: DenseTensor<T>) -> Result<Self> {
        if tensor.shape() != space.pair_shape().as_slice() {
            return dim_err(format!(
                "transition tensor shape {:?} does not match space {:?}",
                tensor.shape(),
                space.dims()
            ));
        }
        let n = space.total();
        let tol = row_tol::<T>();
        for (s, row) in tensor.data().chunks(n).enumerate() {
            if row.iter().any(|&x| x > T::one() + tol) {
                return Err(Error::Domain(format!("row {s} has an entry above 1")));
            }
            let sum: T = row.iter().copied().sum();
            if !((sum - T::one()).abs() <= tol) {
                return Err(Error::Domain(format!("row {s} sums to {sum}, not 1")));
            }
        }
        Ok(Self { space, tensor })
    }

    /// Reads the state space from the tensor shape, which must be `(dims, dims)`.
    pub fn from_tensor(tensor: DenseTensor<T>) -> Result<Self> {
        let shape = tensor.shape();
        if shape.len() % 2 != 0 || shape[..shape.len() / 2] != shape[shape.len() / 2..] {
            return dim_err(format!("shape {shape:?} is not a pair shape (dims, dims)"));
        }
        let space = StateSpace::new(shape[..shape.len() / 2].to_vec())?;
        Self::new(space, tensor)
    }

    /// Uniform chain: every row is `1 / I`.
    pub fn uniform(space: StateSpace) -> Result<Self> {
        let p = T::one() / T::from_usize_lossy(space.total());
        let tensor = DenseTensor::filled(space.pair_shape(), p)?;
        Ok(Self { space, tensor })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn tensor(&self) -> &DenseTensor<T> {
        &self.tensor
    }

    pub fn into_tensor(self) -> DenseTensor<T> {
        self.tensor
    }

    pub fn num_states(&self) -> usize {
        self.space.total()
    }

    /// Row of flat state `s`.
    pub fn row(&self, s: usize) -> &[T] {
        let n = self.space.total();
        &self.tensor.data()[s * n..(s + 1) * n]
    }

    pub fn prob(&self, from: &[usize], to: &[usize]) -> Result<T> {
        let n = self.space.total();
        Ok(self.tensor.data()[self.space.flat_index(from)? * n + self.space.flat_index(to)?])
    }

    /// Largest `|sum_{s'} P(s, s') - 1|` over rows.
    pub fn max_row_deviation(&self) -> T {
        let n = self.space.total();
        self.tensor
            .data()
            .chunks(n)
            .map(|row| (row.iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Stationary tensor of a CPD joint: `R(s) = sum_f lambda(f) prod_d Q_d(s_d, f)`.
///
/// Only the in-factors appear because every out-factor column sums to one.
pub fn marginal_from_cpd<T: Scalar>(model: &CpdModel<T>) -> Result<DenseTensor<T>> {
    let kr = crate::tensor::khatri_rao(model.factors_in())?;
    let r = kr.dot(model.weights());
    DenseTensor::new(
        model.space().dims().to_vec(),
        r.into_iter().map(|x| x.max(T::zero())).collect(),
    )
}

/// Sums a pair tensor over its next-state axes.
pub fn marginal_from_dense<T: Scalar>(joint: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let shape = joint.shape();
    if shape.len() % 2 != 0 {
        return dim_err(format!("shape {shape:?} is not a pair shape"));
    }
    let dims = shape[..shape.len() / 2].to_vec();
    let (rows, cols) = joint.matrix_dims(shape.len() / 2)?;
    let data = joint.data().chunks(cols).map(|row| row.iter().copied().sum()).collect::<Vec<T>>();
    debug_assert_eq!(data.len(), rows);
    DenseTensor::new(dims, data)
}

/// Conditional `P(s, s') = Q(s, s') / R(s)`.
///
/// Rows with `R(s) <= floor`, or with no joint mass at all, are set to the
/// uniform `1 / I`. Every row is renormalized to sum to one.
pub fn transition_from_joint<T: Scalar>(
    joint: &DenseTensor<T>,
    marginal: &DenseTensor<T>,
    floor: T,
) -> Result<TransitionModel<T>> {
    if floor < T::zero() {
        return Err(Error::Domain(format!("marginal floor must be nonnegative, got {floor}")));
    }
    let space = StateSpace::new(marginal.shape().to_vec())?;
    if joint.shape() != space.pair_shape().as_slice() {
        return dim_err(format!(
            "joint shape {:?} does not match marginal shape {:?}",
            joint.shape(),
            marginal.shape()
        ));
    }
    let n = space.total();
    let uniform = T::one() / T::from_usize_lossy(n);
    let mut data = Vec::with_capacity(n * n);
    for (row, &r) in joint.data().chunks(n).zip(marginal.data()) {
        let start = data.len();
        if r > floor {
            data.extend(row.iter().map(|&q| q / r));
            let sum: T = data[start..].iter().copied().sum();
            if sum > T::zero() {
                data[start..].iter_mut().for_each(|x| *x /= sum);
                continue;
            }
            data.truncate(start);
        }
        data.extend(std::iter::repeat_n(uniform, n));
    }
    let tensor = DenseTensor::new(space.pair_shape(), data)?;
    TransitionModel::new(space, tensor)
}

/// Stationary distribution by power iteration from the uniform start.
///
/// Stops once `||pi P - pi||_1 <= tol`. Periodic or reducible chains usually
/// fail to meet the tolerance within `max_iter` and yield a convergence error.
pub fn stationary_distribution<T: Scalar>(
    m: &TransitionModel<T>,
    tol: T,
    max_iter: usize,
) -> Result<DenseTensor<T>> {
    let n = m.num_states();
    let mut pi = vec![T::one() / T::from_usize_lossy(n); n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..=max_iter {
        next.iter_mut().for_each(|x| *x = T::zero());
        for (s, &mass) in pi.iter().enumerate() {
            if mass == T::zero() {
                continue;
            }
            for (acc, &p) in next.iter_mut().zip(m.row(s)) {
                *acc += mass * p;
            }
        }
        residual = next.iter().zip(&pi).map(|(&a, &b)| (a - b).abs()).sum();
        if residual <= tol {
            let total: T = pi.iter().copied().sum();
            pi.iter_mut().for_each(|x| *x /= total);
            return DenseTensor::new(m.space().dims().to_vec(), pi);
        }
        let total: T = next.iter().copied().sum();
        next.iter_mut().for_each(|x| *x /= total);
        std::mem::swap(&mut pi, &mut next);
    }
    Err(Error::Convergence(format!(
        "power iteration residual {residual} above {tol} after {max_iter} iterations"
    )))
}

/// `||pi^T P - pi^T||_1`.
pub fn stationarity_residual<T: Scalar>(m: &TransitionModel<T>, pi: &DenseTensor<T>) -> Result<T> {
    let n = m.num_states();
    if pi.len() != n {
        return dim_err(format!("distribution has {} entries, chain has {n} states", pi.len()));
    }
    let mut next = vec![T::zero(); n];
    for (s, &mass) in pi.data().iter().enumerate() {
        for (acc, &p) in next.iter_mut().zip(m.row(s)) {
            *acc += mass * p;
        }
    }
    Ok(next.iter().zip(pi.data()).map(|(&a, &b)| (a - b).abs()).sum())
}
