use serde::{Deserialize, Serialize};

use super::admm::{admm_fit, FitConfig, FitOutcome};
use super::empirical::{JointNormalization, PairCounts};
use super::slrm::{slrm_fit, slrm_parameter_count};
use crate::error::Result;
use crate::markov::{marginal_from_cpd, marginal_from_dense, transition_from_joint, Trajectory, TransitionModel, DEFAULT_MARGINAL_FLOOR};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, StateSpace};

/// Estimator for the transition tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum Method {
    /// Low-rank tensor: simplex-constrained CPD of the empirical joint.
    Lrt { rank: usize },
    /// Truncated SVD of the empirical joint matrix.
    Slrm { rank: usize },
    /// Row-normalized transition counts.
    Empirical,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Lrt { .. } => "lrt",
            Method::Slrm { .. } => "slrm",
            Method::Empirical => "empirical",
        }
    }

    /// Rank for the decomposition methods, 0 for the empirical estimator.
    pub fn hyperparam(&self) -> usize {
        match *self {
            Method::Lrt { rank } | Method::Slrm { rank } => rank,
            Method::Empirical => 0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Empirical => "empirical".to_string(),
            m => format!("{}-{}", m.name(), m.hyperparam()),
        }
    }

    /// Number of stored parameters on `space`.
    pub fn parameters(&self, space: &StateSpace) -> usize {
        match *self {
            Method::Lrt { rank } => (2 * space.dim_sum() + 1) * rank,
            Method::Slrm { rank } => slrm_parameter_count(space.total(), rank),
            Method::Empirical => space.total() * space.total(),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::Error;

    /// Parses `lrt-10`, `slrm-4`, `empirical`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || crate::error::Error::Config(format!("unknown method `{s}` (expected lrt-F, slrm-M or empirical)"));
        if s == "empirical" {
            return Ok(Method::Empirical);
        }
        let (name, rank) = s.split_once('-').ok_or_else(bad)?;
        let rank: usize = rank.parse().map_err(|_| bad())?;
        match name {
            "lrt" => Ok(Method::Lrt { rank }),
            "slrm" => Ok(Method::Slrm { rank }),
            _ => Err(bad()),
        }
    }
}

/// Shared settings for every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fit: FitConfig,
    pub normalization: JointNormalization,
    /// Marginal entries at or below this value get uniform rows.
    pub floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), normalization: JointNormalization::default(), floor: DEFAULT_MARGINAL_FLOOR }
    }
}

/// Output of [`estimate_pipeline`].
#[derive(Debug, Clone)]
pub struct Estimate<T> {
    pub method: Method,
    pub transition: TransitionModel<T>,
    /// Estimated joint tensor (the empirical one for the empirical method).
    pub joint: DenseTensor<T>,
    pub parameters: usize,
    pub fit: Option<FitOutcome<T>>,
}

/// Empirical joint, then (for LRT/SLRM) a low-rank fit, its marginal and the
/// conditional transition tensor.
pub fn estimate_pipeline<T: Scalar>(pairs: &PairCounts, method: Method, cfg: &PipelineConfig) -> Result<Estimate<T>> {
    let empirical: DenseTensor<T> = pairs.joint(cfg.normalization)?;
    let floor = T::lit(cfg.floor);
    let parameters = method.parameters(pairs.space());
    match method {
        Method::Empirical => Ok(Estimate {
            method,
            transition: pairs.transition()?,
            joint: empirical,
            parameters,
            fit: None,
        }),
        Method::Lrt { rank } => {
            let fit_cfg = FitConfig { rank, ..cfg.fit.clone() };
            let outcome = admm_fit(&empirical, &fit_cfg)?;
            let joint = outcome.model.to_dense()?;
            let marginal = marginal_from_cpd(&outcome.model)?;
            let transition = transition_from_joint(&joint, &marginal, floor)?;
            Ok(Estimate { method, transition, joint, parameters, fit: Some(outcome) })
        }
        Method::Slrm { rank } => {
            let joint = slrm_fit(&empirical, rank)?;
            let marginal = marginal_from_dense(&joint)?;
            let transition = transition_from_joint(&joint, &marginal, floor)?;
            Ok(Estimate { method, transition, joint, parameters, fit: None })
        }
    }
}

/// [`estimate_pipeline`] on the consecutive pairs of a trajectory.
pub fn estimate_from_trajectory<T: Scalar>(x: &Trajectory, method: Method, cfg: &PipelineConfig) -> Result<Estimate<T>> {
    estimate_pipeline(&PairCounts::from_trajectory(x)?, method, cfg)
}
