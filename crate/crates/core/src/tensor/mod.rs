//! Dense tensors and the CPD algebra.

mod cpd;
mod dense;
pub mod io;
mod ops;
mod space;

pub use cpd::{CpdModel, CONSTRUCTION_TOL, DEFAULT_ENTRY_BUDGET, FINALIZED_TOL};
pub use dense::DenseTensor;
pub use ops::{frob_error, khatri_rao, khatri_rao_views, l1_distance, l1_norm, mode_unfold, mttkrp, refold};
pub use space::StateSpace;
