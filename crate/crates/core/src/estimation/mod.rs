//! Estimators of the joint and transition tensors from observed transitions.

mod admm;
mod empirical;
mod nnls;
mod pipeline;
mod simplex;
mod slrm;

pub use admm::{admm_cycle, admm_fit, admm_run, AdmmState, BetaScaling, CycleRecord, FitConfig, FitOutcome, RestartSummary};
pub use empirical::{empirical_joint, empirical_transition, JointNormalization, PairCounts};
pub use nnls::{kkt_residual, nnls_solve, nnls_solve_warm, NnlsConfig, NnlsSolution};
pub use pipeline::{estimate_from_trajectory, estimate_pipeline, Estimate, Method, PipelineConfig};
pub use simplex::simplex_project;
pub use slrm::{pair_matrix, slrm_fit, slrm_parameter_count, truncated_svd};
