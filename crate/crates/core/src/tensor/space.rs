use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Finite product state space `S_1 x ... x S_D` with `S_d = {0, .., I_d - 1}`.
///
/// States are stored 0-based. Files and the CLI use 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct StateSpace {
    dims: Vec<usize>,
    total: usize,
}

impl StateSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return dim_err("state space needs at least one dimension");
        }
        if dims.iter().any(|&d| d == 0) {
            return dim_err(format!("every dimension must be positive, got {dims:?}"));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Dimension(format!("state count overflows for {dims:?}")))?;
        Ok(Self { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of dimensions `D`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of states `I = prod_d I_d`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Sum of the per-dimension sizes.
    pub fn dim_sum(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Shape `(I_1..I_D, I_1..I_D)` of a tensor over state pairs.
    pub fn pair_shape(&self) -> Vec<usize> {
        let mut shape = self.dims.clone();
        shape.extend_from_slice(&self.dims);
        shape
    }

    pub fn contains(&self, state: &[usize]) -> bool {
        state.len() == self.dims.len() && state.iter().zip(&self.dims).all(|(&s, &d)| s < d)
    }

    /// Row-major flat index, last dimension fastest.
    pub fn flat_index(&self, state: &[usize]) -> Result<usize> {
        if state.len() != self.dims.len() {
            return dim_err(format!(
                "state has {} coordinates, space has {} dimensions",
                state.len(),
                self.dims.len()
            ));
        }
        let mut k = 0;
        for (axis, (&s, &d)) in state.iter().zip(&self.dims).enumerate() {
            if s >= d {
                return dim_err(format!("coordinate {s} out of range for axis {axis} of size {d}"));
            }
            k = k * d + s;
        }
        Ok(k)
    }

    pub fn multi_index(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.total {
            return dim_err(format!("flat index {flat} out of range for {} states", self.total));
        }
        let mut out = vec![0; self.dims.len()];
        let mut rest = flat;
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        Ok(out)
    }
}

impl TryFrom<Vec<usize>> for StateSpace {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<StateSpace> for Vec<usize> {
    fn from(space: StateSpace) -> Self {
        space.dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_and_zero_dims() {
        assert!(StateSpace::new(vec![]).is_err());
        assert!(StateSpace::new(vec![3, 0]).is_err());
    }

    #[test]
    fn taxi_space_has_396_states() {
        let s = StateSpace::new(vec![66, 6]).unwrap();
        assert_eq!(s.total(), 396);
        assert_eq!(s.pair_shape(), vec![66, 6, 66, 6]);
    }

    #[test]
    fn last_index_fastest() {
        let s = StateSpace::new(vec![2, 3]).unwrap();
        assert_eq!(s.flat_index(&[0, 1]).unwrap(), 1);
        assert_eq!(s.flat_index(&[1, 0]).unwrap(), 3);
        assert!(s.flat_index(&[2, 0]).is_err());
        assert!(s.multi_index(6).is_err());
    }

    proptest! {
        #[test]
        fn flat_multi_round_trip(dims in prop::collection::vec(1usize..6, 1..5), seed in any::<u64>()) {
            let s = StateSpace::new(dims).unwrap();
            let k = (seed as usize) % s.total();
            let m = s.multi_index(k).unwrap();
            prop_assert!(s.contains(&m));
            prop_assert_eq!(s.flat_index(&m).unwrap(), k);
        }
    }
}
