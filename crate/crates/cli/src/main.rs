use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uplimit_cli::config::RunConfig;
use uplimit_cli::stages;

/// Credit limit adjustment pipeline: synthetic portfolios, a two-stage
/// balance predictor, tabular reinforcement learning with provisions-aware
/// rewards, and policy comparison against reference strategies.
///
/// All stages read and write fixed file names inside `--out` and append to
/// its manifest.json, so one directory is one reproducible run.
#[derive(Parser)]
#[command(name = "uplimit", version)]
struct Cli {
    /// key = value config file layered over built-in defaults
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; every random stream is derived from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory holding all pipeline artifacts
    #[arg(long, global = true, default_value = "artifacts", value_name = "DIR")]
    out: PathBuf,

    /// Cap on worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic portfolio plus ground truth, a supervised
    /// training table, and defaulted-account observations
    SimulateData(SimulateArgs),
    /// Fit the two-stage balance predictor and the historical-decision
    /// propensity model, reporting holdout metrics
    FitPredictor(FitArgs),
    /// Train the tabular agent on the fitted predictor's environment
    Train(TrainArgs),
    /// Sweep learning and exploration rates, ranking cells by final reward
    GridSearch(GridArgs),
    /// Evaluate the trained policy against the reference strategies
    Compare(CompareArgs),
    /// Export the greedy decision per customer and the backing Q-table
    ExtractPolicy(ExtractArgs),
    /// Export learning curves of the stored training runs
    ExportCurves(CurvesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Portfolio size
    #[arg(long)]
    n_customers: Option<usize>,
    /// Defaulted-account observations to draw
    #[arg(long)]
    n_defaulters: Option<usize>,
    /// Archetype mix: default | imbalance
    #[arg(long)]
    preset: Option<String>,
    /// Std dev (USD) of the balance response noise
    #[arg(long)]
    noise: Option<f64>,
    /// Share of historical increase decisions in the training table
    #[arg(long)]
    historical_increase_rate: Option<f64>,
    /// Loss given default
    #[arg(long)]
    lgd: Option<f64>,
    /// Relative limit increase
    #[arg(long)]
    beta: Option<f64>,
    /// Credit conversion factor (must be numeric here)
    #[arg(long)]
    ccf: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// USD boundary between the low and high balance bands
    #[arg(long)]
    cutoff: Option<f64>,
    /// SMOTE-NC neighbourhood size, or `none` to skip oversampling
    #[arg(long)]
    smote_k: Option<String>,
    /// Minimum rows per balance band, or `none`
    #[arg(long)]
    min_rows_per_class: Option<String>,
    /// Decision tree depth cap
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum rows per tree leaf
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Trees per forest; 1 disables bootstrap resampling
    #[arg(long)]
    n_trees: Option<usize>,
    /// Held-out share used only for the reported metrics
    #[arg(long)]
    holdout_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Learner: q | double_q
    #[arg(long)]
    algo: Option<String>,
    /// Learning rate
    #[arg(long)]
    alpha: Option<f64>,
    /// Discount factor
    #[arg(long)]
    gamma: Option<f64>,
    /// Exploration probability
    #[arg(long)]
    epsilon: Option<f64>,
    /// Training episodes
    #[arg(long)]
    episodes: Option<usize>,
    /// Independent training runs stored in agent.json
    #[arg(long)]
    runs: Option<usize>,
    /// Lower end of the annual interest range the state grid covers
    #[arg(long)]
    interest_min: Option<f64>,
    /// Upper end of the annual interest range the state grid covers
    #[arg(long)]
    interest_max: Option<f64>,
    /// Loss given default
    #[arg(long)]
    lgd: Option<f64>,
    /// Relative limit increase
    #[arg(long)]
    beta: Option<f64>,
    /// Credit conversion factor, or `estimate` to fit from defaulters.csv
    #[arg(long)]
    ccf: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Learner: q | double_q
    #[arg(long)]
    algo: Option<String>,
    /// Discount factor
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated learning rates
    #[arg(long)]
    grid_alphas: Option<String>,
    /// Comma-separated exploration rates
    #[arg(long)]
    grid_epsilons: Option<String>,
    /// Training episodes per cell
    #[arg(long)]
    grid_episodes: Option<usize>,
    /// Runs per cell
    #[arg(long)]
    grid_runs: Option<usize>,
    /// Lower end of the annual interest range the state grid covers
    #[arg(long)]
    interest_min: Option<f64>,
    /// Upper end of the annual interest range the state grid covers
    #[arg(long)]
    interest_max: Option<f64>,
    /// Loss given default
    #[arg(long)]
    lgd: Option<f64>,
    /// Relative limit increase
    #[arg(long)]
    beta: Option<f64>,
    /// Credit conversion factor, or `estimate` to fit from defaulters.csv
    #[arg(long)]
    ccf: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Episodes per strategy
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Increase probability of the random baseline
    #[arg(long)]
    random_p: Option<f64>,
    /// Current-policy cut on the propensity score
    #[arg(long)]
    propensity_threshold: Option<f64>,
    /// Comma-separated bureau-score percentile baselines
    #[arg(long)]
    bureau_quantiles: Option<String>,
    /// Q-table the greedy policy reads: q1 | q2 | mean
    #[arg(long)]
    table: Option<String>,
    /// Loss given default
    #[arg(long)]
    lgd: Option<f64>,
    /// Relative limit increase
    #[arg(long)]
    beta: Option<f64>,
    /// Credit conversion factor, or `estimate` to fit from defaulters.csv
    #[arg(long)]
    ccf: Option<String>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Q-table the greedy policy reads: q1 | q2 | mean
    #[arg(long)]
    table: Option<String>,
    /// Loss given default
    #[arg(long)]
    lgd: Option<f64>,
    /// Relative limit increase
    #[arg(long)]
    beta: Option<f64>,
    /// Credit conversion factor, or `estimate` to fit from defaulters.csv
    #[arg(long)]
    ccf: Option<String>,
}

#[derive(Args)]
struct CurvesArgs {
    /// Stored training run to export
    #[arg(long)]
    run: Option<usize>,
}

fn apply_flags(cfg: &mut RunConfig, cmd: &Command) {
    match cmd {
        Command::SimulateData(a) => {
            cfg.set_flag("n_customers", &a.n_customers);
            cfg.set_flag("n_defaulters", &a.n_defaulters);
            cfg.set_flag("preset", &a.preset);
            cfg.set_flag("noise", &a.noise);
            cfg.set_flag("historical_increase_rate", &a.historical_increase_rate);
            cfg.set_flag("lgd", &a.lgd);
            cfg.set_flag("beta", &a.beta);
            cfg.set_flag("ccf", &a.ccf);
        }
        Command::FitPredictor(a) => {
            cfg.set_flag("cutoff", &a.cutoff);
            cfg.set_flag("smote_k", &a.smote_k);
            cfg.set_flag("min_rows_per_class", &a.min_rows_per_class);
            cfg.set_flag("max_depth", &a.max_depth);
            cfg.set_flag("min_samples_leaf", &a.min_samples_leaf);
            cfg.set_flag("n_trees", &a.n_trees);
            cfg.set_flag("holdout_fraction", &a.holdout_fraction);
        }
        Command::Train(a) => {
            cfg.set_flag("algo", &a.algo);
            cfg.set_flag("alpha", &a.alpha);
            cfg.set_flag("gamma", &a.gamma);
            cfg.set_flag("epsilon", &a.epsilon);
            cfg.set_flag("episodes", &a.episodes);
            cfg.set_flag("runs", &a.runs);
            cfg.set_flag("interest_min", &a.interest_min);
            cfg.set_flag("interest_max", &a.interest_max);
            cfg.set_flag("lgd", &a.lgd);
            cfg.set_flag("beta", &a.beta);
            cfg.set_flag("ccf", &a.ccf);
        }
        Command::GridSearch(a) => {
            cfg.set_flag("algo", &a.algo);
            cfg.set_flag("gamma", &a.gamma);
            cfg.set_flag("grid_alphas", &a.grid_alphas);
            cfg.set_flag("grid_epsilons", &a.grid_epsilons);
            cfg.set_flag("grid_episodes", &a.grid_episodes);
            cfg.set_flag("grid_runs", &a.grid_runs);
            cfg.set_flag("interest_min", &a.interest_min);
            cfg.set_flag("interest_max", &a.interest_max);
            cfg.set_flag("lgd", &a.lgd);
            cfg.set_flag("beta", &a.beta);
            cfg.set_flag("ccf", &a.ccf);
        }
        Command::Compare(a) => {
            cfg.set_flag("eval_episodes", &a.eval_episodes);
            cfg.set_flag("random_p", &a.random_p);
            cfg.set_flag("propensity_threshold", &a.propensity_threshold);
            cfg.set_flag("bureau_quantiles", &a.bureau_quantiles);
            cfg.set_flag("table", &a.table);
            cfg.set_flag("lgd", &a.lgd);
            cfg.set_flag("beta", &a.beta);
            cfg.set_flag("ccf", &a.ccf);
        }
        Command::ExtractPolicy(a) => {
            cfg.set_flag("table", &a.table);
            cfg.set_flag("lgd", &a.lgd);
            cfg.set_flag("beta", &a.beta);
            cfg.set_flag("ccf", &a.ccf);
        }
        Command::ExportCurves(a) => {
            cfg.set_flag("run", &a.run);
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path)?;
    }
    cfg.set_flag("seed", &cli.seed);
    apply_flags(&mut cfg, &cli.command);
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;

    let stage = || match &cli.command {
        Command::SimulateData(_) => stages::simulate_data(&cli.out, &cfg, cli.jobs),
        Command::FitPredictor(_) => stages::fit_predictor(&cli.out, &cfg, cli.jobs),
        Command::Train(_) => stages::train_agent(&cli.out, &cfg, cli.jobs),
        Command::GridSearch(_) => stages::grid_search(&cli.out, &cfg, cli.jobs),
        Command::Compare(_) => stages::compare_policies(&cli.out, &cfg, cli.jobs),
        Command::ExtractPolicy(_) => stages::extract_policy(&cli.out, &cfg, cli.jobs),
        Command::ExportCurves(_) => stages::export_curves(&cli.out, &cfg, cli.jobs),
    };
    match cli.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker thread pool")?
            .install(stage),
        None => stage(),
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
