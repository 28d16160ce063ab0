use ndarray::{Array1, Array2, ArrayViewMut1, Axis};

use super::{DenseTensor, StateSpace};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Largest simplex violation accepted (and repaired) by [`CpdModel::new`].
pub const CONSTRUCTION_TOL: f64 = 1e-8;
/// Simplex tolerance a finalized model must satisfy.
pub const FINALIZED_TOL: f64 = 1e-12;
/// Default cap on the number of entries [`CpdModel::to_dense`] may allocate.
pub const DEFAULT_ENTRY_BUDGET: usize = 100_000_000;

/// Rank-`F` decomposition `[[lambda, Q, Q']]` of a joint tensor over state pairs.
///
/// `weights` is the distribution of the hidden component; column `f` of
/// `factors_in[d]` (resp. `factors_out[d]`) is the distribution of the
/// current (resp. next) state's coordinate `d` given component `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdModel<T> {
    space: StateSpace,
    weights: Array1<T>,
    factors_in: Vec<Array2<T>>,
    factors_out: Vec<Array2<T>>,
}

impl<T: Scalar> CpdModel<T> {
    /// Validates shapes and the simplex constraints, then renormalizes.
    ///
    /// Deviations from the simplex up to [`CONSTRUCTION_TOL`] are repaired;
    /// anything larger is a domain error.
    pub fn new(
        space: StateSpace,
        weights: Array1<T>,
        factors_in: Vec<Array2<T>>,
        factors_out: Vec<Array2<T>>,
    ) -> Result<Self> {
        let rank = weights.len();
        if rank == 0 {
            return dim_err("rank must be at least 1");
        }
        if factors_in.len() != space.order() || factors_out.len() != space.order() {
            return dim_err(format!(
                "expected {} factor matrices per bank, got {} and {}",
                space.order(),
                factors_in.len(),
                factors_out.len()
            ));
        }
        for (d, (a, b)) in factors_in.iter().zip(&factors_out).enumerate() {
            let want = (space.dims()[d], rank);
            if a.dim() != want || b.dim() != want {
                return dim_err(format!(
                    "factor {d} has shapes {:?}/{:?}, expected {want:?}",
                    a.dim(),
                    b.dim()
                ));
            }
        }
        let mut model = Self { space, weights, factors_in, factors_out };
        let tol = T::lit(CONSTRUCTION_TOL);
        let violation = model.simplex_violation();
        if !(violation <= tol) {
            return Err(Error::Domain(format!(
                "model violates the simplex constraints by {violation}"
            )));
        }
        model.renormalize();
        Ok(model)
    }

    /// Builds a model without repairing it. Used for in-progress iterates.
    pub(crate) fn from_parts_unchecked(
        space: StateSpace,
        weights: Array1<T>,
        factors_in: Vec<Array2<T>>,
        factors_out: Vec<Array2<T>>,
    ) -> Self {
        Self { space, weights, factors_in, factors_out }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn factors_in(&self) -> &[Array2<T>] {
        &self.factors_in
    }

    pub fn factors_out(&self) -> &[Array2<T>] {
        &self.factors_out
    }

    /// All `2D` factor matrices in tensor mode order: in-factors then out-factors.
    pub fn factor_bank(&self) -> Vec<&Array2<T>> {
        self.factors_in.iter().chain(&self.factors_out).collect()
    }

    /// Stored entries: `(2 * sum_d I_d + 1) * F`.
    pub fn parameter_count(&self) -> usize {
        (2 * self.space.dim_sum() + 1) * self.rank()
    }

    /// Largest deviation from the constraints: negative entries or sums away from 1.
    pub fn simplex_violation(&self) -> T {
        let mut worst = simplex_violation_vec(self.weights.iter().copied());
        for m in self.factors_in.iter().chain(&self.factors_out) {
            for col in m.axis_iter(Axis(1)) {
                worst = worst.max(simplex_violation_vec(col.iter().copied()));
            }
        }
        worst
    }

    pub fn is_finalized(&self) -> bool {
        self.simplex_violation() <= T::lit(FINALIZED_TOL)
    }

    fn renormalize(&mut self) {
        normalize_in_place(self.weights.view_mut());
        for m in self.factors_in.iter_mut().chain(self.factors_out.iter_mut()) {
            for col in m.axis_iter_mut(Axis(1)) {
                normalize_in_place(col);
            }
        }
    }

    /// `sum_f lambda(f) prod_d Q_d(s_d, f) prod_d Q'_d(s'_d, f)`.
    pub fn eval_entry(&self, from: &[usize], to: &[usize]) -> Result<T> {
        if !self.space.contains(from) || !self.space.contains(to) {
            return dim_err(format!("states {from:?} -> {to:?} not in space {:?}", self.space.dims()));
        }
        let mut total = T::zero();
        for f in 0..self.rank() {
            let mut term = self.weights[f];
            for (d, &s) in from.iter().enumerate() {
                term *= self.factors_in[d][[s, f]];
            }
            for (d, &s) in to.iter().enumerate() {
                term *= self.factors_out[d][[s, f]];
            }
            total += term;
        }
        Ok(total)
    }

    pub fn to_dense(&self) -> Result<DenseTensor<T>> {
        self.to_dense_with_budget(DEFAULT_ENTRY_BUDGET)
    }

    /// Dense joint tensor of shape `(dims, dims)`.
    pub fn to_dense_with_budget(&self, budget: usize) -> Result<DenseTensor<T>> {
        let states = self.space.total();
        let entries = states
            .checked_mul(states)
            .ok_or(Error::Capacity { entries: usize::MAX, budget })?;
        if entries > budget {
            return Err(Error::Capacity { entries, budget });
        }
        let mut rows = super::khatri_rao(&self.factors_in)?;
        for mut row in rows.axis_iter_mut(Axis(0)) {
            row *= &self.weights;
        }
        let cols = super::khatri_rao(&self.factors_out)?;
        let joint = rows.dot(&cols.t());
        // Products of nonnegative factors cannot go negative.
        let data = joint.into_iter().map(|x| x.max(T::zero())).collect();
        DenseTensor::new(self.space.pair_shape(), data)
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<CpdModel<U>> {
        let conv1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.as_f64()));
        let conv2 = |a: &Array2<T>| a.mapv(|x| U::lit(x.as_f64()));
        CpdModel::new(
            self.space.clone(),
            conv1(&self.weights),
            self.factors_in.iter().map(conv2).collect(),
            self.factors_out.iter().map(conv2).collect(),
        )
    }
}

fn simplex_violation_vec<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut worst = T::zero();
    for x in values {
        if !x.is_finite() {
            return T::infinity();
        }
        worst = worst.max(-x);
        sum += x;
    }
    worst.max((sum - T::one()).abs())
}

fn normalize_in_place<T: Scalar>(mut values: ArrayViewMut1<'_, T>) {
    values.mapv_inplace(|x| x.max(T::zero()));
    let sum = values.sum();
    // Leave already-normalized vectors bit-identical so file round trips are exact.
    if sum > T::zero() && (sum - T::one()).abs() > T::epsilon() {
        values.mapv_inplace(|x| x / sum);
    }
}
