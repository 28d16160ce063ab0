use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{marginal_from_cpd, transition_from_joint, TransitionModel, DEFAULT_MARGINAL_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{CpdModel, StateSpace};

/// Settings for a random low-rank chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticChainConfig {
    pub rank: usize,
    /// Share one factor bank between current and next state (reversible chain).
    #[serde(default = "default_true")]
    pub symmetric: bool,
    /// Dirichlet concentration for every simplex draw.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    1.0
}

impl SyntheticChainConfig {
    pub fn new(rank: usize) -> Self {
        Self { rank, symmetric: true, alpha: 1.0 }
    }
}

/// Draws one point from `Dirichlet(alpha, .., alpha)` by normalizing gamma variates.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, len: usize, alpha: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Domain(format!("alpha {alpha}: {e}")))?;
    loop {
        let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(draws.into_iter().map(|x| x / sum).collect());
        }
    }
}

/// Matrix whose columns are independent Dirichlet draws.
pub fn dirichlet_columns<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    alpha: f64,
) -> Result<Array2<T>> {
    let mut m = Array2::zeros((rows, cols));
    for f in 0..cols {
        for (i, x) in dirichlet(rng, rows, alpha)?.into_iter().enumerate() {
            m[[i, f]] = T::lit(x);
        }
    }
    Ok(m)
}

/// Random stochastic CPD over `space`. Draw order: weights, in-factors
/// `Q_1..Q_D` column by column, then out-factors unless `symmetric`.
pub fn random_cpd<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    space: &StateSpace,
    cfg: &SyntheticChainConfig,
) -> Result<CpdModel<T>> {
    if cfg.rank == 0 {
        return Err(Error::Domain("rank must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {}", cfg.alpha)));
    }
    let weights: Array1<T> = dirichlet(rng, cfg.rank, cfg.alpha)?.into_iter().map(T::lit).collect();
    let draw_bank = |rng: &mut R| -> Result<Vec<Array2<T>>> {
        space.dims().iter().map(|&n| dirichlet_columns(rng, n, cfg.rank, cfg.alpha)).collect()
    };
    let factors_in = draw_bank(rng)?;
    let factors_out = if cfg.symmetric { factors_in.clone() } else { draw_bank(rng)? };
    CpdModel::new(space.clone(), weights, factors_in, factors_out)
}

/// Generates a rank-`F` joint tensor and the chain it induces.
///
/// In symmetric mode the joint tensor is symmetric, so the chain is reversible
/// and its stationary tensor is [`marginal_from_cpd`] of the returned model.
pub fn generate_synthetic_chain<T: Scalar>(
    space: &StateSpace,
    cfg: &SyntheticChainConfig,
    seed: u64,
) -> Result<(CpdModel<T>, TransitionModel<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_cpd(&mut rng, space, cfg)?;
    let joint = model.to_dense()?;
    let marginal = marginal_from_cpd(&model)?;
    let chain = transition_from_joint(&joint, &marginal, T::lit(DEFAULT_MARGINAL_FLOOR))?;
    Ok((model, chain))
}
