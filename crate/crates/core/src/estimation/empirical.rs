use crate::error::{Error, Result};
use crate::markov::{Trajectory, TransitionModel};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, StateSpace};

/// Divisor applied to pair counts when forming the empirical joint tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointNormalization {
    /// Divide by the number of observed transitions (`N - 1`); total mass is 1.
    #[default]
    Transitions,
    /// Divide by the trajectory length `N`; total mass is `(N - 1) / N`.
    TrajectoryLength,
}

/// Multiset of observed `(s, s')` transitions over a state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    space: StateSpace,
    counts: Vec<u64>,
    total: u64,
    /// Length of the source trajectory, when the pairs came from one.
    trajectory_len: Option<usize>,
}

impl PairCounts {
    pub fn empty(space: StateSpace) -> Self {
        let n = space.total();
        Self { space, counts: vec![0; n * n], total: 0, trajectory_len: None }
    }

    /// Counts consecutive pairs of a trajectory. Needs `N >= 2`.
    pub fn from_trajectory(x: &Trajectory) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 states to observe a transition, got {}",
                x.len()
            )));
        }
        let mut counts = Self::empty(x.space().clone());
        for (s, t) in x.transitions() {
            counts.add_flat(s, t);
        }
        counts.trajectory_len = Some(x.len());
        Ok(counts)
    }

    /// Counts an independent multiset of flat-index pairs.
    pub fn from_pairs(space: StateSpace, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut counts = Self::empty(space);
        for (s, t) in pairs {
            if s >= counts.space.total() || t >= counts.space.total() {
                return Err(Error::Dimension(format!("pair ({s}, {t}) out of range")));
            }
            counts.add_flat(s, t);
        }
        Ok(counts)
    }

    fn add_flat(&mut self, s: usize, t: usize) {
        self.counts[s * self.space.total() + t] += 1;
        self.total += 1;
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, s: usize, t: usize) -> u64 {
        self.counts[s * self.space.total() + t]
    }

    pub fn raw(&self) -> &[u64] {
        &self.counts
    }

    /// Number of transitions leaving flat state `s`.
    pub fn visits(&self, s: usize) -> u64 {
        let n = self.space.total();
        self.counts[s * n..(s + 1) * n].iter().sum()
    }

    /// Empirical joint tensor of shape `(dims, dims)`.
    pub fn joint<T: Scalar>(&self, norm: JointNormalization) -> Result<DenseTensor<T>> {
        if self.total == 0 {
            return Err(Error::InsufficientData("no transitions observed".into()));
        }
        let divisor = match (norm, self.trajectory_len) {
            (JointNormalization::Transitions, _) => self.total as f64,
            (JointNormalization::TrajectoryLength, Some(n)) => n as f64,
            // A multiset of independent pairs has no extra trailing state.
            (JointNormalization::TrajectoryLength, None) => self.total as f64,
        };
        let divisor = T::lit(divisor);
        let data = self.counts.iter().map(|&c| T::lit(c as f64) / divisor).collect();
        DenseTensor::new(self.space.pair_shape(), data)
    }

    /// Row-normalized counts; rows of never-left states are uniform `1 / I`.
    pub fn transition<T: Scalar>(&self) -> Result<TransitionModel<T>> {
        let n = self.space.total();
        let uniform = T::one() / T::from_usize_lossy(n);
        let mut data = Vec::with_capacity(n * n);
        for row in self.counts.chunks(n) {
            let visits: u64 = row.iter().sum();
            if visits == 0 {
                data.extend(std::iter::repeat_n(uniform, n));
            } else {
                let v = T::lit(visits as f64);
                data.extend(row.iter().map(|&c| T::lit(c as f64) / v));
            }
        }
        TransitionModel::new(self.space.clone(), DenseTensor::new(self.space.pair_shape(), data)?)
    }
}

/// Empirical joint from a trajectory's consecutive pairs.
pub fn empirical_joint<T: Scalar>(x: &Trajectory, norm: JointNormalization) -> Result<DenseTensor<T>> {
    PairCounts::from_trajectory(x)?.joint(norm)
}

/// Empirical transition tensor with the uniform fallback for unvisited states.
pub fn empirical_transition<T: Scalar>(x: &Trajectory) -> Result<TransitionModel<T>> {
    PairCounts::from_trajectory(x)?.transition()
}
