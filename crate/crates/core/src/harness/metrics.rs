use crate::error::{Error, Result};
use crate::markov::TransitionModel;
use crate::scalar::Scalar;
use crate::tensor::{l1_distance, l1_norm};

/// `||P_hat - P||_1 / ||P||_1`, entrywise over the full transition tensor.
pub fn normalized_l1_error<T: Scalar>(estimate: &TransitionModel<T>, truth: &TransitionModel<T>) -> Result<T> {
    if estimate.space() != truth.space() {
        return Err(Error::Dimension(format!(
            "estimate dims {:?} differ from truth dims {:?}",
            estimate.space().dims(),
            truth.space().dims()
        )));
    }
    let norm = l1_norm(truth.tensor());
    let diff = l1_distance(estimate.tensor(), truth.tensor())?;
    Ok(diff / norm)
}
