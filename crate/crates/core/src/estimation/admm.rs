//! Simplex-constrained CPD fit of a joint tensor by cyclic ADMM.
//!
//! The fit `1/2 ||T - [[lambda, Q, Q']]||_F^2` is split with auxiliary copies
//! `psi = lambda`, `S_d = Q_d`, `S'_d = Q'_d`. Nonnegativity stays on the
//! primal block, the sum-to-one constraints move to the auxiliary block, and
//! every constraint carries a dual variable. One cycle minimizes the
//! augmented Lagrangian over `lambda`, each `Q_d`, each `Q'_d`, then over
//! `psi`, each `S_d`, `S'_d`, and finishes with a dual ascent step of size
//! `beta` on every multiplier.
//!
//! Primal blocks are nonnegative ridge least-squares problems solved exactly
//! by [`nnls_solve`](super::nnls_solve) on the `F x F` Gram system. Auxiliary
//! blocks have the closed form `(I + 1 1^T)^{-1} c = c - (1^T c / (1 + n)) 1`.
//!
//! The penalty starts at `beta_scale * ||T||_F^2` (or a fixed `beta`). For
//! the first `balance_until` cycles it is doubled or halved whenever the
//! primal and dual residuals drift more than `balance_ratio` apart. After
//! that it only grows, by `beta_growth`, when the residuals stop improving
//! for `stall_window` cycles. The multipliers are unscaled, so a change of
//! `beta` needs no dual rescaling.
//!
//! Factor matrices are kept in tensor mode order: modes `0..D` are the
//! in-factors and `D..2D` the out-factors. MTTKRP contractions take the other
//! factors in ascending mode order.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nnls::{nnls_solve_warm, NnlsConfig};
use super::simplex::simplex_project;
use crate::error::{dim_err, Error, Result};
use crate::markov::dirichlet_columns;
use crate::scalar::Scalar;
use crate::seeds::derive_seed;
use crate::tensor::{frob_error, mttkrp, CpdModel, DenseTensor, StateSpace};

/// How the default penalty follows the target size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaScaling {
    /// `||target||_F`.
    Norm,
    /// `||target||_F^2`, the scale of the fit curvature.
    #[default]
    SquaredNorm,
}

/// Settings for [`admm_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub rank: usize,
    /// Fixed penalty. When absent, `beta_scale` times the norm given by
    /// `beta_scaling` is used.
    pub beta: Option<f64>,
    pub beta_scale: f64,
    pub beta_scaling: BetaScaling,
    pub max_cycles: usize,
    pub tol_primal: f64,
    pub tol_constraint: f64,
    pub tol_delta: f64,
    pub restarts: usize,
    /// Cycles without residual improvement that count as a stall.
    pub stall_window: usize,
    /// Factor applied to `beta` at each stall; 1 keeps it fixed.
    pub beta_growth: f64,
    /// Residual balancing: every `balance_every` cycles, multiply or divide
    /// `beta` by `balance_factor` when the primal residual exceeds the dual
    /// one by more than `balance_ratio` or the reverse. 0 disables.
    pub balance_ratio: f64,
    pub balance_factor: f64,
    pub balance_every: usize,
    /// Balancing stops after this many cycles, leaving `beta` fixed.
    pub balance_until: usize,
    pub nnls: NnlsConfig,
    pub seed: u64,
    /// Experimental: fit the symmetrized target and tie `Q' = Q` at exit.
    pub symmetric: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            beta: None,
            beta_scale: 1.0,
            beta_scaling: BetaScaling::default(),
            max_cycles: 5000,
            tol_primal: 1e-8,
            tol_constraint: 1e-8,
            tol_delta: 1e-8,
            restarts: 5,
            stall_window: 500,
            beta_growth: 2.0,
            balance_ratio: 10.0,
            balance_factor: 2.0,
            balance_every: 10,
            balance_until: 2500,
            nnls: NnlsConfig::default(),
            seed: 0,
            symmetric: false,
        }
    }
}

impl FitConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self { rank, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta_scale", self.beta_scale),
            ("balance_factor", self.balance_factor),
            ("tol_primal", self.tol_primal),
            ("tol_constraint", self.tol_constraint),
            ("tol_delta", self.tol_delta),
            ("nnls.kkt_tol", self.nnls.kkt_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::Config(format!("beta must be positive, got {b}")));
            }
        }
        if !(self.beta_growth >= 1.0) || !self.beta_growth.is_finite() {
            return Err(Error::Config(format!("beta_growth must be at least 1, got {}", self.beta_growth)));
        }
        if !(self.balance_ratio >= 0.0) || !(self.balance_factor >= 1.0) || self.balance_every == 0 {
            return Err(Error::Config("balance_ratio must be >= 0, balance_factor >= 1, balance_every >= 1".into()));
        }
        if self.stall_window == 0 {
            return Err(Error::Config("stall_window must be at least 1".into()));
        }
        if self.rank == 0 || self.restarts == 0 || self.max_cycles == 0 {
            return Err(Error::Config("rank, restarts and max_cycles must be at least 1".into()));
        }
        Ok(())
    }

    /// Penalty used for a given target.
    pub fn beta_for<T: Scalar>(&self, target: &DenseTensor<T>) -> T {
        match self.beta {
            Some(b) => T::lit(b),
            None => {
                let mut norm = target.frobenius_norm();
                if self.beta_scaling == BetaScaling::SquaredNorm {
                    norm = norm * norm;
                }
                let scaled = T::lit(self.beta_scale) * norm;
                if scaled > T::zero() {
                    scaled
                } else {
                    T::lit(self.beta_scale)
                }
            }
        }
    }
}

/// Diagnostics recorded after every cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord<T> {
    /// Fit objective `1/2 ||T - [[lambda, Q, Q']]||_F^2` at the primal iterate.
    pub objective: T,
    /// `max(||lambda - psi||, max_d ||Q_d - S_d||_F, max_d ||Q'_d - S'_d||_F)`.
    pub primal_residual: T,
    /// `max(|1^T psi - 1|, max_d ||S_d^T 1 - 1||_inf, max_d ||S'_d^T 1 - 1||_inf)`.
    pub constraint_residual: T,
    /// Largest Frobenius change of a primal or auxiliary block.
    pub delta: T,
    /// Worst KKT residual among this cycle's inner NNLS solves.
    pub nnls_kkt: T,
    /// `beta` times the largest change of an auxiliary block.
    pub dual_residual: T,
}

/// Full ADMM iterate: primal, auxiliary and dual variables plus history.
#[derive(Debug, Clone)]
pub struct AdmmState<T> {
    space: StateSpace,
    pub weights: Array1<T>,
    /// `[Q_1..Q_D, Q'_1..Q'_D]`.
    pub factors: Vec<Array2<T>>,
    pub psi: Array1<T>,
    pub aux: Vec<Array2<T>>,
    /// `u`, multiplier of `lambda = psi`.
    pub dual_weights: Array1<T>,
    /// `U_d`, `U'_d`, multipliers of `Q = S`.
    pub dual_factors: Vec<Array2<T>>,
    /// `v`, multiplier of `1^T psi = 1`.
    pub dual_weight_sum: T,
    /// `v_d`, `v'_d`, multipliers of the column sums of `S`.
    pub dual_factor_sums: Vec<Array1<T>>,
    pub beta: T,
    pub history: Vec<CycleRecord<T>>,
    grams: Vec<Array2<T>>,
}

impl<T: Scalar> AdmmState<T> {
    /// Starts from given primal values: auxiliaries copy them, duals are zero.
    pub fn from_primal(space: StateSpace, weights: Array1<T>, factors: Vec<Array2<T>>, beta: T) -> Result<Self> {
        let rank = weights.len();
        if factors.len() != 2 * space.order() {
            return dim_err(format!("expected {} factor matrices, got {}", 2 * space.order(), factors.len()));
        }
        for (m, a) in factors.iter().enumerate() {
            let want = (space.dims()[m % space.order()], rank);
            if a.dim() != want {
                return dim_err(format!("factor {m} has shape {:?}, expected {want:?}", a.dim()));
            }
        }
        if !(beta > T::zero()) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        let grams = factors.iter().map(|a| a.t().dot(a)).collect();
        Ok(Self {
            psi: weights.clone(),
            aux: factors.clone(),
            dual_weights: Array1::zeros(rank),
            dual_factors: factors.iter().map(|a| Array2::zeros(a.dim())).collect(),
            dual_weight_sum: T::zero(),
            dual_factor_sums: factors.iter().map(|_| Array1::zeros(rank)).collect(),
            space,
            weights,
            factors,
            beta,
            history: Vec::new(),
            grams,
        })
    }

    /// Dirichlet(1) initialization of every simplex block.
    pub fn random(space: StateSpace, rank: usize, beta: T, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = dirichlet_columns::<T, _>(&mut rng, rank, 1, 1.0)?.column(0).to_owned();
        let factors = (0..2 * space.order())
            .map(|m| dirichlet_columns(&mut rng, space.dims()[m % space.order()], rank, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Self::from_primal(space, weights, factors, beta)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn factors_in(&self) -> &[Array2<T>] {
        &self.factors[..self.space.order()]
    }

    pub fn factors_out(&self) -> &[Array2<T>] {
        &self.factors[self.space.order()..]
    }

    pub fn cycles(&self) -> usize {
        self.history.len()
    }

    pub fn last(&self) -> Option<&CycleRecord<T>> {
        self.history.last()
    }

    /// Primal and constraint residuals of the current iterate.
    pub fn residuals(&self) -> (T, T) {
        let mut primal = l2(&(&self.weights - &self.psi));
        for (a, s) in self.factors.iter().zip(&self.aux) {
            primal = primal.max(frob(&(a - s)));
        }
        let mut constraint = (self.psi.sum() - T::one()).abs();
        for s in &self.aux {
            for col in s.axis_iter(Axis(1)) {
                constraint = constraint.max((col.sum() - T::one()).abs());
            }
        }
        (primal, constraint)
    }

    /// Current primal iterate as an (unprojected) model.
    pub fn primal_model(&self) -> CpdModel<T> {
        CpdModel::from_parts_unchecked(
            self.space.clone(),
            self.weights.clone(),
            self.factors_in().to_vec(),
            self.factors_out().to_vec(),
        )
    }

    /// Projects `lambda` and every factor column onto the simplex.
    pub fn finalize(&self) -> Result<CpdModel<T>> {
        let weights = Array1::from(simplex_project(self.weights.as_slice().expect("contiguous")));
        let project = |a: &Array2<T>| {
            let mut out = a.clone();
            for mut col in out.axis_iter_mut(Axis(1)) {
                let p = simplex_project(&col.to_vec());
                col.assign(&Array1::from(p));
            }
            out
        };
        let d = self.space.order();
        CpdModel::new(
            self.space.clone(),
            weights,
            self.factors[..d].iter().map(project).collect(),
            self.factors[d..].iter().map(project).collect(),
        )
    }

    fn refresh_gram(&mut self, mode: usize) {
        self.grams[mode] = self.factors[mode].t().dot(&self.factors[mode]);
    }

    fn hadamard_grams(&self, skip: Option<usize>) -> Array2<T> {
        let rank = self.rank();
        let mut h = Array2::from_elem((rank, rank), T::one());
        for (m, g) in self.grams.iter().enumerate() {
            if Some(m) != skip {
                h *= g;
            }
        }
        h
    }

    fn other_factors(&self, mode: usize) -> Vec<&Array2<T>> {
        self.factors.iter().enumerate().filter(|(m, _)| *m != mode).map(|(_, a)| a).collect()
    }

    fn check_finite(&self, cycle: usize) -> Result<()> {
        let finite1 = |a: &Array1<T>| a.iter().all(|x| x.is_finite());
        let finite2 = |a: &[Array2<T>]| a.iter().all(|m| m.iter().all(|x| x.is_finite()));
        let ok = finite1(&self.weights)
            && finite1(&self.psi)
            && finite1(&self.dual_weights)
            && self.dual_weight_sum.is_finite()
            && finite2(&self.factors)
            && finite2(&self.aux)
            && finite2(&self.dual_factors)
            && self.dual_factor_sums.iter().all(finite1);
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical { cycle, message: "non-finite iterate".into() })
        }
    }
}

fn l2<T: Scalar>(v: &Array1<T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn frob<T: Scalar>(m: &Array2<T>) -> T {
    m.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Inputs to the `lambda` block: `min 1/2 x^T (H + beta I) x - r^T x, x >= 0`.
pub(crate) fn weights_subproblem<T: Scalar>(state: &AdmmState<T>, target: &DenseTensor<T>) -> Result<(Array2<T>, Array1<T>)> {
    let gram = state.hadamard_grams(None);
    let m0 = mttkrp(target, &state.other_factors(0), 0)?;
    let b = (&m0 * &state.factors[0]).sum_axis(Axis(0));
    let rhs = &b + &(&state.psi * state.beta) - &state.dual_weights;
    Ok((gram, rhs))
}

/// Updates the auxiliary vector `c` in place to `(I + 1 1^T)^{-1} c`.
fn sum_penalty_solve<T: Scalar>(mut c: ndarray::ArrayViewMut1<'_, T>) {
    let shift = c.sum() / T::from_usize_lossy(c.len() + 1);
    c.mapv_inplace(|x| x - shift);
}

fn check_target<T: Scalar>(state: &AdmmState<T>, target: &DenseTensor<T>) -> Result<()> {
    if target.shape() != state.space.pair_shape().as_slice() {
        return dim_err(format!(
            "target shape {:?} does not match state space pair shape {:?}",
            target.shape(),
            state.space.pair_shape()
        ));
    }
    Ok(())
}

/// One full ADMM sweep. Appends its diagnostics to `state.history`.
pub fn admm_cycle<T: Scalar>(state: &mut AdmmState<T>, target: &DenseTensor<T>, nnls: &NnlsConfig) -> Result<CycleRecord<T>> {
    check_target(state, target)?;
    let cycle = state.history.len();
    let beta = state.beta;
    let rank = state.rank();
    let modes = state.factors.len();
    let prev_weights = state.weights.clone();
    let prev_factors = state.factors.clone();
    let prev_psi = state.psi.clone();
    let prev_aux = state.aux.clone();
    let mut kkt = T::zero();

    // lambda block
    let (gram, rhs) = weights_subproblem(state, target)?;
    let rhs = rhs.insert_axis(Axis(0));
    let warm = state.weights.clone().insert_axis(Axis(0));
    let sol = nnls_solve_warm(&gram, &rhs, beta, Some(&warm), nnls).map_err(|e| sub_err(cycle, "lambda", e))?;
    kkt = kkt.max(sol.kkt_residual);
    state.weights = sol.x.row(0).to_owned();

    // factor blocks in mode order; the last contraction is kept for the objective
    let mut last_contraction = Array2::zeros((0, 0));
    let outer_weights = {
        let w = state.weights.view().insert_axis(Axis(1));
        w.dot(&w.t())
    };
    for mode in 0..modes {
        let gram = &state.hadamard_grams(Some(mode)) * &outer_weights;
        let contraction = mttkrp(target, &state.other_factors(mode), mode)?;
        let rhs = &(&contraction * &state.weights) + &(&state.aux[mode] * beta) - &state.dual_factors[mode];
        let sol = nnls_solve_warm(&gram, &rhs, beta, Some(&state.factors[mode]), nnls)
            .map_err(|e| sub_err(cycle, &format!("factor {mode}"), e))?;
        kkt = kkt.max(sol.kkt_residual);
        state.factors[mode] = sol.x;
        state.refresh_gram(mode);
        if mode + 1 == modes {
            last_contraction = contraction;
        }
    }

    // auxiliary blocks
    let one_minus = |v: T| T::one() - v / beta;
    let mut psi = &state.weights + &(&state.dual_weights / beta);
    psi.mapv_inplace(|x| x + one_minus(state.dual_weight_sum));
    sum_penalty_solve(psi.view_mut());
    state.psi = psi;
    for mode in 0..modes {
        let mut s = &state.factors[mode] + &(&state.dual_factors[mode] / beta);
        for (f, mut col) in s.axis_iter_mut(Axis(1)).enumerate() {
            let shift = one_minus(state.dual_factor_sums[mode][f]);
            col.mapv_inplace(|x| x + shift);
            sum_penalty_solve(col);
        }
        state.aux[mode] = s;
    }

    // dual ascent
    state.dual_weights = &state.dual_weights + &((&state.weights - &state.psi) * beta);
    state.dual_weight_sum += beta * (state.psi.sum() - T::one());
    for mode in 0..modes {
        let step = (&state.factors[mode] - &state.aux[mode]) * beta;
        state.dual_factors[mode] = &state.dual_factors[mode] + &step;
        let sums = state.aux[mode].sum_axis(Axis(0)) - T::one();
        state.dual_factor_sums[mode] = &state.dual_factor_sums[mode] + &(sums * beta);
    }
    state.check_finite(cycle)?;

    // objective from cached quantities: 1/2||T||^2 - lambda^T b + 1/2 lambda^T H lambda
    let last = modes - 1;
    let b = (&last_contraction * &state.factors[last]).sum_axis(Axis(0));
    let h = state.hadamard_grams(None);
    let quad = state.weights.dot(&h.dot(&state.weights));
    let target_sq: T = target.data().iter().map(|&x| x * x).sum();
    let objective = (T::lit(0.5) * target_sq - state.weights.dot(&b) + T::lit(0.5) * quad).max(T::zero());

    let mut aux_delta = l2(&(&state.psi - &prev_psi));
    let mut delta = l2(&(&state.weights - &prev_weights));
    for m in 0..modes {
        delta = delta.max(frob(&(&state.factors[m] - &prev_factors[m])));
        aux_delta = aux_delta.max(frob(&(&state.aux[m] - &prev_aux[m])));
    }
    let delta = delta.max(aux_delta);
    let dual_residual = beta * aux_delta;
    let (primal_residual, constraint_residual) = state.residuals();
    let record = CycleRecord { objective, primal_residual, constraint_residual, delta, nnls_kkt: kkt, dual_residual };
    if !objective.is_finite() {
        return Err(Error::Numerical { cycle, message: "non-finite objective".into() });
    }
    debug_assert_eq!(state.weights.len(), rank);
    state.history.push(record);
    Ok(record)
}

fn sub_err(cycle: usize, block: &str, e: Error) -> Error {
    match e {
        Error::Convergence(msg) | Error::SubProblem(msg) => {
            Error::SubProblem(format!("cycle {cycle}, {block} block: {msg}"))
        }
        other => other,
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    pub cycles: usize,
    pub converged: bool,
    /// First cycle (1-based) at which both residuals met their tolerances.
    pub residuals_met_at: Option<usize>,
    pub primal_residual: f64,
    pub constraint_residual: f64,
    pub delta: f64,
    pub max_nnls_kkt: f64,
    /// Penalty at exit; larger than the initial one after stalls.
    pub final_beta: f64,
    /// `1/2 ||target - finalized model||_F^2`.
    pub fit: f64,
    pub relative_error: f64,
}

/// Best restart of [`admm_fit`] with per-restart diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub model: CpdModel<T>,
    pub state: AdmmState<T>,
    pub best_restart: usize,
    /// Initial penalty; see [`RestartSummary::final_beta`] for the exit value.
    pub beta: T,
    pub restarts: Vec<RestartSummary>,
}

impl<T: Scalar> FitOutcome<T> {
    pub fn best(&self) -> &RestartSummary {
        &self.restarts[self.best_restart]
    }
}

/// Runs one restart to convergence or `max_cycles`.
pub fn admm_run<T: Scalar>(mut state: AdmmState<T>, target: &DenseTensor<T>, cfg: &FitConfig) -> Result<(AdmmState<T>, bool, Option<usize>)> {
    let tol_p = T::lit(cfg.tol_primal);
    let tol_c = T::lit(cfg.tol_constraint);
    let tol_d = T::lit(cfg.tol_delta);
    let mut met_at = None;
    let mut best_residual = T::infinity();
    let mut best_at = 0;
    let mut warned = false;
    for cycle in 0..cfg.max_cycles {
        let rec = admm_cycle(&mut state, target, &cfg.nnls)?;
        let residual = rec.primal_residual.max(rec.constraint_residual);
        let residuals_ok = rec.primal_residual <= tol_p && rec.constraint_residual <= tol_c;
        if residuals_ok && met_at.is_none() {
            met_at = Some(cycle + 1);
        }
        if residuals_ok && rec.delta <= tol_d {
            return Ok((state, true, met_at));
        }
        if cfg.balance_ratio > 0.0 && cycle < cfg.balance_until && (cycle + 1) % cfg.balance_every == 0 {
            let mu = T::lit(cfg.balance_ratio);
            let tau = T::lit(cfg.balance_factor);
            if residual > mu * rec.dual_residual {
                state.beta *= tau;
            } else if rec.dual_residual > mu * residual {
                state.beta /= tau;
            }
        }
        if residual < best_residual * T::lit(0.999) {
            best_residual = residual;
            best_at = cycle;
        } else if cycle - best_at >= cfg.stall_window && !residuals_ok {
            if !warned {
                log::warn!(
                    "ADMM residuals stalled at {residual:.3e} for {} cycles (beta = {:.3e})",
                    cfg.stall_window,
                    state.beta
                );
                warned = true;
            }
            if cfg.beta_growth > 1.0 {
                state.beta *= T::lit(cfg.beta_growth);
                log::debug!("beta raised to {:.3e} at cycle {}", state.beta, cycle + 1);
            }
            best_residual = residual;
            best_at = cycle;
        }
    }
    Ok((state, false, met_at))
}

/// Fits a rank-`cfg.rank` stochastic CPD to `target` and keeps the best of
/// `cfg.restarts` seeded runs, ranked by the fit of the finalized model.
pub fn admm_fit<T: Scalar>(target: &DenseTensor<T>, cfg: &FitConfig) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    let shape = target.shape();
    if shape.len() % 2 != 0 || shape[..shape.len() / 2] != shape[shape.len() / 2..] {
        return dim_err(format!("target shape {shape:?} is not a pair shape (dims, dims)"));
    }
    let space = StateSpace::new(shape[..shape.len() / 2].to_vec())?;
    let mass = target.sum().as_f64();
    if (mass - 1.0).abs() > 1e-6 {
        log::warn!("target tensor has total mass {mass}, expected 1");
    }
    let symmetrized;
    let fit_target = if cfg.symmetric {
        symmetrized = symmetrize(target, &space)?;
        &symmetrized
    } else {
        target
    };
    let beta = cfg.beta_for(fit_target);
    let target_norm = target.frobenius_norm().as_f64();
    let mut best: Option<(usize, AdmmState<T>, CpdModel<T>)> = None;
    let mut summaries: Vec<RestartSummary> = Vec::with_capacity(cfg.restarts);
    for restart in 0..cfg.restarts {
        let seed = derive_seed(cfg.seed, &[restart as u64]);
        let init = AdmmState::random(space.clone(), cfg.rank, beta, seed)?;
        let (state, converged, met_at) = admm_run(init, fit_target, cfg)?;
        let mut model = state.finalize()?;
        if cfg.symmetric {
            model = tie_banks(&model)?;
        }
        let err = frob_error(target, &model.to_dense()?)?.as_f64();
        let last = state.last().copied();
        let get = |f: fn(&CycleRecord<T>) -> T| last.as_ref().map_or(f64::NAN, |r| f(r).as_f64());
        let summary = RestartSummary {
            restart,
            seed,
            cycles: state.cycles(),
            converged,
            residuals_met_at: met_at,
            primal_residual: get(|r| r.primal_residual),
            constraint_residual: get(|r| r.constraint_residual),
            delta: get(|r| r.delta),
            max_nnls_kkt: state.history.iter().map(|r| r.nnls_kkt.as_f64()).fold(0.0, f64::max),
            final_beta: state.beta.as_f64(),
            fit: 0.5 * err * err,
            relative_error: if target_norm > 0.0 { err / target_norm } else { err },
        };
        let better = best.as_ref().is_none_or(|(i, _, _)| summary.fit < summaries[*i].fit);
        summaries.push(summary);
        if better {
            best = Some((restart, state, model));
        }
    }
    let (best_restart, state, model) = best.expect("at least one restart");
    Ok(FitOutcome { model, state, best_restart, beta, restarts: summaries })
}

fn symmetrize<T: Scalar>(target: &DenseTensor<T>, space: &StateSpace) -> Result<DenseTensor<T>> {
    let n = space.total();
    let data = target.data();
    let sym = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            T::lit(0.5) * (data[i * n + j] + data[j * n + i])
        })
        .collect();
    DenseTensor::new(target.shape().to_vec(), sym)
}

fn tie_banks<T: Scalar>(model: &CpdModel<T>) -> Result<CpdModel<T>> {
    let tied: Vec<Array2<T>> = model
        .factors_in()
        .iter()
        .zip(model.factors_out())
        .map(|(a, b)| (a + b) * T::lit(0.5))
        .collect();
    CpdModel::new(model.space().clone(), model.weights().clone(), tied.clone(), tied)
}
