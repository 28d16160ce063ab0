//! Sample-size sweeps: for every `(N, trial)` draw data, run every method,
//! score it against the ground-truth chain.
//!
//! Each `(N, trial)` job owns its seed, so jobs can run on several threads and
//! the assembled table is still the same. Rows are sorted by `(N, trial,
//! method position)` before writing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::normalized_l1_error;
use super::taxi::{ingest_taxi, TaxiIngestConfig};
use crate::error::{Error, Result};
use crate::estimation::{estimate_pipeline, Method, PairCounts, PipelineConfig};
use crate::markov::{generate_synthetic_chain, sample_trajectory, Init, SyntheticChainConfig, TransitionModel};
use crate::seeds::derive_seed;
use crate::tensor::StateSpace;

/// Where the ground truth and the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    /// Random low-rank chain; samples are trajectories of `N` transitions.
    Synthetic {
        dims: Vec<usize>,
        rank: usize,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "yes")]
        symmetric: bool,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        burn_in: usize,
    },
    /// Empirical chain of a taxi trip set; samples are `N` trips drawn with
    /// replacement from the kept trips.
    Taxi { ingest: TaxiIngestConfig },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: Source,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    /// Labels such as `lrt-10`, `slrm-4`, `empirical`.
    #[serde(with = "method_labels")]
    pub methods: Vec<Method>,
    /// Base seed for samples and fits.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
    #[serde(default = "one_thread")]
    pub threads: usize,
    /// Wall times make the CSV machine-dependent, so they are off by default.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn one_thread() -> usize {
    1
}

mod method_labels {
    use super::Method;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(methods: &[Method], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(methods.iter().map(|m| m.label()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Method>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(D::Error::custom)).collect()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sample_sizes.is_empty() {
            return bad("sample_sizes is empty");
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sample_sizes must be strictly increasing");
        }
        if self.sample_sizes[0] == 0 {
            return bad("sample sizes must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("no methods given");
        }
        if self.methods.iter().any(|m| matches!(m, Method::Lrt { rank: 0 } | Method::Slrm { rank: 0 })) {
            return bad("method ranks must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        match &self.source {
            Source::Synthetic { dims, rank, alpha, .. } => {
                StateSpace::new(dims.clone()).map_err(|e| Error::Config(e.to_string()))?;
                if *rank == 0 || !(*alpha > 0.0) {
                    return bad("generator rank must be >= 1 and alpha > 0");
                }
            }
            Source::Taxi { ingest } => ingest.validate()?,
        }
        self.pipeline.fit.validate()
    }
}

/// One scored `(method, N, trial)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub hyperparam: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    /// Empty when the estimator failed.
    pub error: Option<f64>,
    pub parameters: usize,
    /// Seconds; empty unless wall times are recorded.
    pub wall_time: Option<f64>,
    /// Seed of the sample for this `(N, trial)`.
    pub seed: u64,
    /// `ok` or the failure message.
    pub status: String,
}

/// Mean error over the successful trials of one `(method, N)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub hyperparam: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_error: Option<f64>,
    pub parameters: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResults {
    pub fn mean_error(&self, method: Method, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method.name() && r.hyperparam == method.hyperparam() && r.n == n)
            .and_then(|r| r.mean_error)
    }

    pub fn rows_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> Result<String> {
        to_csv(&self.summary)
    }
}

fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Ground truth plus whatever the sampler needs.
enum Truth {
    Chain(TransitionModel<f64>, usize),
    Trips(TransitionModel<f64>, StateSpace, Vec<(usize, usize)>),
}

impl Truth {
    fn build(source: &Source) -> Result<Self> {
        match source {
            Source::Synthetic { dims, rank, alpha, symmetric, seed, burn_in } => {
                let space = StateSpace::new(dims.clone())?;
                let cfg = SyntheticChainConfig { rank: *rank, alpha: *alpha, symmetric: *symmetric };
                let (_, chain) = generate_synthetic_chain::<f64>(&space, &cfg, *seed)?;
                Ok(Truth::Chain(chain, *burn_in))
            }
            Source::Taxi { ingest } => {
                let data = ingest_taxi(ingest)?;
                Ok(Truth::Trips(data.truth()?, data.space, data.pairs))
            }
        }
    }

    fn chain(&self) -> &TransitionModel<f64> {
        match self {
            Truth::Chain(p, _) | Truth::Trips(p, _, _) => p,
        }
    }

    /// `n` observed transitions.
    fn sample(&self, n: usize, seed: u64) -> Result<PairCounts> {
        match self {
            Truth::Chain(p, burn_in) => {
                let x = sample_trajectory(p, n + 1, &Init::Stationary, *burn_in, seed)?;
                PairCounts::from_trajectory(&x)
            }
            Truth::Trips(_, space, trips) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let draws = (0..n).map(|_| trips[rng.random_range(0..trips.len())]);
                PairCounts::from_pairs(space.clone(), draws)
            }
        }
    }
}

fn run_job(cfg: &ExperimentConfig, truth: &Truth, ni: usize, trial: usize) -> Vec<SweepRow> {
    let n = cfg.sample_sizes[ni];
    let seed = derive_seed(cfg.seed, &[ni as u64, trial as u64]);
    let space = truth.chain().space().clone();
    let row = |m: Method, error: Option<f64>, wall: Option<f64>, status: String| SweepRow {
        method: m.name().to_string(),
        hyperparam: m.hyperparam(),
        n,
        trial,
        error,
        parameters: m.parameters(&space),
        wall_time: wall.filter(|_| cfg.record_wall_time),
        seed,
        status,
    };
    let pairs = match truth.sample(n, seed) {
        Ok(p) => p,
        Err(e) => return cfg.methods.iter().map(|&m| row(m, None, None, format!("sampling failed: {e}"))).collect(),
    };
    cfg.methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let mut pipe = cfg.pipeline.clone();
            pipe.fit.seed = derive_seed(seed, &[mi as u64]);
            let start = Instant::now();
            let scored = estimate_pipeline::<f64>(&pairs, m, &pipe)
                .and_then(|est| normalized_l1_error(&est.transition, truth.chain()));
            let wall = Some(start.elapsed().as_secs_f64());
            match scored {
                Ok(e) => {
                    log::info!("{} N={n} trial={trial}: error {e:.4}", m.label());
                    row(m, Some(e), wall, "ok".into())
                }
                Err(e) => {
                    log::warn!("{} N={n} trial={trial} failed: {e}", m.label());
                    row(m, None, wall, e.to_string())
                }
            }
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &n in &cfg.sample_sizes {
        for m in &cfg.methods {
            let cell: Vec<&SweepRow> =
                rows.iter().filter(|r| r.n == n && r.method == m.name() && r.hyperparam == m.hyperparam()).collect();
            let ok: Vec<f64> = cell.iter().filter_map(|r| r.error).collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            out.push(SummaryRow {
                method: m.name().to_string(),
                hyperparam: m.hyperparam(),
                n,
                trials: ok.len(),
                failures: cell.len() - ok.len(),
                mean_error: mean,
                parameters: cell.first().map_or(0, |r| r.parameters),
            });
        }
    }
    out
}

/// Runs every `(N, trial, method)` cell. Estimator failures become rows with
/// an empty error and the message in `status`; only a broken ground truth
/// aborts the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResults> {
    cfg.validate()?;
    let truth = Truth::build(&cfg.source)?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.sample_sizes.len()).flat_map(|ni| (0..cfg.trials).map(move |t| (ni, t))).collect();
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = cfg.threads.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(ni, trial)) = jobs.get(k) else { break };
                let rows = run_job(cfg, &truth, ni, trial);
                done.lock().expect("no worker panicked").push((k, rows));
            });
        }
    });
    let mut done = done.into_inner().expect("no worker panicked");
    done.sort_by_key(|(k, _)| *k);
    let rows: Vec<SweepRow> = done.into_iter().flat_map(|(_, r)| r).collect();
    let summary = summarize(cfg, &rows);
    Ok(SweepResults { rows, summary })
}

/// Writes the per-row CSV and, if configured, the summary CSV.
pub fn write_results(results: &SweepResults, rows_path: &Path, summary_path: Option<&Path>) -> Result<()> {
    let write = |path: &Path, text: String| -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    };
    write(rows_path, results.rows_csv()?)?;
    if let Some(p) = summary_path {
        write(p, results.summary_csv()?)?;
    }
    Ok(())
}
