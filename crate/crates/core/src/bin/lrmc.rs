//! `lrmc`: build, sample, estimate and score low-rank Markov chains.
//!
//! Exit status: 0 on success, 2 for usage or config errors, 1 for runtime
//! failures.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lowrank_markov::estimation::{
    estimate_pipeline, FitConfig, JointNormalization, Method, PairCounts, PipelineConfig, RestartSummary,
};
use lowrank_markov::harness::{
    ingest_taxi, normalized_l1_error, run_sweep, write_results, ExperimentConfig, TaxiIngestConfig,
};
use lowrank_markov::markov::{
    generate_synthetic_chain, marginal_from_cpd, read_trajectory, sample_trajectory, transition_from_joint,
    write_trajectory, Init, SyntheticChainConfig, TransitionModel, DEFAULT_MARGINAL_FLOOR,
};
use lowrank_markov::tensor::io::{read_model, read_tensor, write_model, write_tensor};
use lowrank_markov::tensor::{CpdModel, StateSpace};
use lowrank_markov::Error;

#[derive(Parser)]
#[command(name = "lrmc", version, about = "Low-rank tensor Markov chain toolkit")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random low-rank chain and write its CPD.
    Synth(SynthArgs),
    /// Simulate a trajectory from a chain.
    Sample(SampleArgs),
    /// Estimate a transition tensor from a trajectory.
    Estimate(EstimateArgs),
    /// Turn a CPD of the joint into the transition tensor.
    Derive(DeriveArgs),
    /// Normalized l1 error between two chains.
    Eval(EvalArgs),
    /// Run a sample-size sweep from a TOML config.
    Sweep(SweepArgs),
    /// Convert taxi trip records into pair counts.
    IngestTaxi(TaxiArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated state dimensions, e.g. 5,5,5.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Draw separate next-state factors (non-reversible chain).
    #[arg(long)]
    asymmetric: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    transition_out: Option<PathBuf>,
    #[arg(long)]
    joint_out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// CPD model or transition tensor file.
    #[arg(long)]
    chain: PathBuf,
    /// Number of transitions; the trajectory has one more state.
    #[arg(long)]
    transitions: usize,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    /// Start state as 1-based comma-separated coordinates (default: stationary draw).
    #[arg(long, value_delimiter = ',')]
    init_state: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    trajectory: PathBuf,
    /// lrt-F, slrm-M or empirical.
    #[arg(long)]
    method: Method,
    /// TOML pipeline settings (`normalization`, `floor`, `[fit]`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Transition tensor output.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    joint_out: Option<PathBuf>,
    /// Fitted CPD (lrt only).
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// JSON record of the settings, seed and fit diagnostics.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    joint_out: Option<PathBuf>,
    #[arg(long)]
    marginal_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MARGINAL_FLOOR)]
    floor: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// CPD model or transition tensor file.
    #[arg(long)]
    estimate: PathBuf,
    /// CPD model or transition tensor file.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell means (overrides `summary`).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TaxiArgs {
    /// TOML ingest settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    bins_per_day: Option<usize>,
    /// Empirical joint tensor output.
    #[arg(long)]
    joint_out: PathBuf,
    /// Empirical transition tensor (ground truth) output.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// JSON with the row accounting.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

/// Reads either a CPD model (converted through its marginal) or a transition tensor.
fn load_chain(path: &Path) -> anyhow::Result<TransitionModel<f64>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = std::io::BufReader::new(file)
        .lines()
        .map_while(|l| l.ok())
        .map(|l| l.trim().to_string())
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or_default();
    let chain = if header.starts_with("LRMC-CPD") {
        chain_of_model(&read_model(path)?, DEFAULT_MARGINAL_FLOOR)?
    } else if header.starts_with("LRMC-TENSOR") {
        TransitionModel::from_tensor(read_tensor(path)?)?
    } else {
        bail!("{}: neither a model nor a tensor file", path.display());
    };
    Ok(chain)
}

fn chain_of_model(model: &CpdModel<f64>, floor: f64) -> lowrank_markov::Result<TransitionModel<f64>> {
    transition_from_joint(&model.to_dense()?, &marginal_from_cpd(model)?, floor)
}

#[derive(Serialize)]
struct Manifest<'a> {
    method: String,
    seed: u64,
    parameters: usize,
    normalization: JointNormalization,
    floor: f64,
    trajectory: String,
    transitions: u64,
    fit: Option<FitManifest<'a>>,
}

#[derive(Serialize)]
struct FitManifest<'a> {
    config: &'a FitConfig,
    beta: f64,
    best_restart: usize,
    cycles: usize,
    objective: f64,
    primal_residual: f64,
    constraint_residual: f64,
    restarts: &'a [RestartSummary],
}

fn synth(seed: u64, a: SynthArgs) -> anyhow::Result<()> {
    let space = StateSpace::new(a.dims)?;
    let cfg = SyntheticChainConfig { rank: a.rank, alpha: a.alpha, symmetric: !a.asymmetric };
    let (model, chain) = generate_synthetic_chain::<f64>(&space, &cfg, seed)?;
    write_model(&a.out, &model)?;
    if let Some(p) = a.transition_out {
        write_tensor(&p, chain.tensor())?;
    }
    if let Some(p) = a.joint_out {
        write_tensor(&p, &model.to_dense()?)?;
    }
    println!("states {} rank {} parameters {} seed {seed}", space.total(), a.rank, model.parameter_count());
    Ok(())
}

fn sample(seed: u64, a: SampleArgs) -> anyhow::Result<()> {
    let chain = load_chain(&a.chain)?;
    let init = match a.init_state {
        Some(s) => {
            if s.contains(&0) {
                return Err(Error::Config("--init-state coordinates are 1-based".into()).into());
            }
            Init::State(s.iter().map(|c| c - 1).collect())
        }
        None => Init::Stationary,
    };
    let x = sample_trajectory(&chain, a.transitions + 1, &init, a.burn_in, seed)?;
    write_trajectory(&a.out, &x)?;
    println!("states {} transitions {} seed {seed}", x.len(), a.transitions);
    Ok(())
}

fn estimate(seed: u64, a: EstimateArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str::<PipelineConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    cfg.fit.seed = seed;
    if let Method::Lrt { rank } = a.method {
        cfg.fit.rank = rank;
    }
    if let Some(r) = a.restarts {
        cfg.fit.restarts = r;
    }
    if let Some(c) = a.max_cycles {
        cfg.fit.max_cycles = c;
    }
    if a.beta.is_some() {
        cfg.fit.beta = a.beta;
    }
    cfg.fit.validate()?;
    let x = read_trajectory(&a.trajectory)?;
    let pairs = PairCounts::from_trajectory(&x)?;
    let est = estimate_pipeline::<f64>(&pairs, a.method, &cfg)?;
    write_tensor(&a.out, est.transition.tensor())?;
    if let Some(p) = &a.joint_out {
        write_tensor(p, &est.joint)?;
    }
    if let Some(p) = &a.model_out {
        match &est.fit {
            Some(f) => write_model(p, &f.model)?,
            None => return Err(Error::Config("--model-out needs an lrt method".into()).into()),
        }
    }
    let fit = est.fit.as_ref().map(|f| {
        let best = &f.restarts[f.best_restart];
        FitManifest {
            config: &cfg.fit,
            beta: f.beta,
            best_restart: f.best_restart,
            cycles: best.cycles,
            objective: best.fit,
            primal_residual: best.primal_residual,
            constraint_residual: best.constraint_residual,
            restarts: &f.restarts,
        }
    });
    if let Some(p) = &a.manifest {
        let m = Manifest {
            method: a.method.label(),
            seed,
            parameters: est.parameters,
            normalization: cfg.normalization,
            floor: cfg.floor,
            trajectory: a.trajectory.display().to_string(),
            transitions: pairs.total(),
            fit,
        };
        std::fs::write(p, serde_json::to_string_pretty(&m)? + "\n")?;
    }
    println!("method {} parameters {} transitions {}", a.method.label(), est.parameters, pairs.total());
    Ok(())
}

fn derive(a: DeriveArgs) -> anyhow::Result<()> {
    let model = read_model::<f64>(&a.model)?;
    let joint = model.to_dense()?;
    let marginal = marginal_from_cpd(&model)?;
    let chain = transition_from_joint(&joint, &marginal, a.floor)?;
    write_tensor(&a.out, chain.tensor())?;
    if let Some(p) = a.joint_out {
        write_tensor(&p, &joint)?;
    }
    if let Some(p) = a.marginal_out {
        write_tensor(&p, &marginal)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let e = normalized_l1_error(&load_chain(&a.estimate)?, &load_chain(&a.truth)?)?;
    println!("error {e}");
    Ok(())
}

fn sweep(seed: Option<u64>, a: SweepArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    let out = a.out.or(cfg.output.clone()).ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))?;
    let summary = a.summary.or(cfg.summary.clone());
    let results = run_sweep(&cfg)?;
    write_results(&results, &out, summary.as_deref())?;
    print!("{}", results.summary_csv()?);
    Ok(())
}

fn ingest(a: TaxiArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str::<TaxiIngestConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => TaxiIngestConfig::default(),
    };
    if !a.inputs.is_empty() {
        cfg.inputs = a.inputs;
    }
    if let Some(b) = a.bins_per_day {
        cfg.bins_per_day = b;
    }
    cfg.validate()?;
    let data = ingest_taxi(&cfg)?;
    write_tensor(&a.joint_out, &data.joint::<f64>()?)?;
    if let Some(p) = a.truth_out {
        write_tensor(&p, data.truth::<f64>()?.tensor())?;
    }
    if let Some(p) = a.report_out {
        std::fs::write(p, serde_json::to_string_pretty(&data.report)? + "\n")?;
    }
    let r = data.report;
    println!(
        "states {} total {} kept {} dropped {} malformed {}{}",
        data.space.total(),
        r.total,
        r.kept,
        r.dropped,
        r.malformed,
        if r.malformed_exceeded { " (malformed share above threshold)" } else { "" }
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    let result = match cli.cmd {
        Cmd::Synth(a) => synth(seed, a),
        Cmd::Sample(a) => sample(seed, a),
        Cmd::Estimate(a) => estimate(seed, a),
        Cmd::Derive(a) => derive(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Sweep(a) => sweep(cli.seed, a),
        Cmd::IngestTaxi(a) => ingest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrmc: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::Config(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
