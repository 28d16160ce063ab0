//! Multi-dimensional Markov chains: joint to stationary to transition
//! tensors, synthetic low-rank chains and trajectory simulation.

mod synth;
mod trajectory;
mod transition;

pub use synth::{dirichlet, dirichlet_columns, generate_synthetic_chain, random_cpd, SyntheticChainConfig};
pub use trajectory::{
    read_trajectory, read_trajectory_from, sample_trajectory, trajectory_to_string, write_trajectory, Init,
    Trajectory, TRAJECTORY_MAGIC,
};
pub use transition::{
    marginal_from_cpd, marginal_from_dense, stationarity_residual, stationary_distribution, transition_from_joint,
    TransitionModel, DEFAULT_MARGINAL_FLOOR,
};
