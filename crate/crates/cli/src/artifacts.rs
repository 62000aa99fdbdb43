//! Artifact names and JSON envelopes shared by the pipeline stages.
//!
//! Every stage reads and writes fixed file names inside one output
//! directory, so a directory is a complete, self-describing run. Stages
//! never modify an upstream artifact; re-running a stage overwrites only
//! its own outputs (and appends to the manifest).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uplimit_core::agents::{
    rows_to_table, table_to_rows, AgentConfig, Algo, DoubleQTables, QTableRow, TrainResult,
    TrainedTables,
};
use uplimit_core::env::DiscretizationGrid;
use uplimit_core::predictor::PredictorMetrics;

pub const PORTFOLIO_CSV: &str = "portfolio.csv";
pub const TRAINING_CSV: &str = "training.csv";
pub const TRUTH_CSV: &str = "truth.csv";
pub const DEFAULTERS_CSV: &str = "defaulters.csv";
pub const MODEL_JSON: &str = "model.json";
pub const PROPENSITY_JSON: &str = "propensity.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const AGENT_JSON: &str = "agent.json";
pub const GRID_JSON: &str = "grid.json";
pub const GRID_CSV: &str = "grid.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_CURVE_CSV: &str = "comparison_curve.csv";
pub const DECISIONS_CSV: &str = "decisions.csv";
pub const QTABLE_CSV: &str = "qtable.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const MULTI_SEED_CURVES_CSV: &str = "multi_seed_curves.csv";

/// Resolves an upstream artifact, naming the stage that produces it when it
/// is missing so the error tells the user what to run.
pub fn require(out: &Path, name: &str, producer: &str) -> Result<PathBuf> {
    let path = out.join(name);
    if !path.exists() {
        bail!(
            "missing artifact `{name}` in {}: run `uplimit {producer}` first",
            out.display()
        );
    }
    Ok(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).context("serializing artifact")?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Trained agent
// ---------------------------------------------------------------------------

pub const AGENT_FORMAT: &str = "uplimit-agent";
pub const AGENT_VERSION: u32 = 1;

/// One training run inside the agent artifact. `q2` is present exactly for
/// double-Q agents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentRun {
    pub run: u64,
    pub episode_returns: Vec<f64>,
    pub q1: Vec<QTableRow>,
    pub q2: Option<Vec<QTableRow>>,
}

/// The trained agent with everything needed to replay or evaluate it:
/// hyperparameters, the discretization range, the portfolio it was trained
/// on, and the value tables of each run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentArtifact {
    pub format: String,
    pub version: u32,
    pub algo: String,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: usize,
    pub seed: u64,
    pub interest_min: f64,
    pub interest_max: f64,
    pub portfolio_fingerprint: u64,
    pub runs: Vec<AgentRun>,
}

impl AgentArtifact {
    pub fn from_runs(
        cfg: &AgentConfig,
        (interest_min, interest_max): (f64, f64),
        portfolio_fingerprint: u64,
        results: &[TrainResult],
    ) -> Self {
        let runs = results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (q1, q2) = match &r.tables {
                    TrainedTables::Single(t) => (table_to_rows(t), None),
                    TrainedTables::Double(pair) => {
                        (table_to_rows(pair.q1()), Some(table_to_rows(pair.q2())))
                    }
                };
                AgentRun {
                    run: i as u64,
                    episode_returns: r.episode_returns.clone(),
                    q1,
                    q2,
                }
            })
            .collect();
        AgentArtifact {
            format: AGENT_FORMAT.to_string(),
            version: AGENT_VERSION,
            algo: cfg.algo.name().to_string(),
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            epsilon: cfg.epsilon,
            episodes: cfg.episodes,
            seed: cfg.seed,
            interest_min,
            interest_max,
            portfolio_fingerprint,
            runs,
        }
    }

    pub fn algo(&self) -> Result<Algo> {
        Ok(Algo::parse(&self.algo)?)
    }

    pub fn grid(&self) -> Result<DiscretizationGrid> {
        Ok(DiscretizationGrid::with_interest_range(
            self.interest_min,
            self.interest_max,
        )?)
    }

    /// Reconstructs the value tables of run `run`.
    pub fn tables(&self, run: usize) -> Result<TrainedTables> {
        let Some(r) = self.runs.get(run) else {
            bail!(
                "agent.json stores runs 0..{}, requested run {run}",
                self.runs.len()
            );
        };
        Ok(match (self.algo()?, &r.q2) {
            (Algo::Q, None) => TrainedTables::Single(rows_to_table(&r.q1)),
            (Algo::DoubleQ, Some(q2)) => TrainedTables::Double(DoubleQTables::from_parts(
                rows_to_table(&r.q1),
                rows_to_table(q2),
            )),
            (Algo::Q, Some(_)) => bail!("agent.json declares algo `q` but stores two tables"),
            (Algo::DoubleQ, None) => {
                bail!("agent.json declares algo `double_q` but stores one table")
            }
        })
    }
}

pub fn save_agent(path: &Path, artifact: &AgentArtifact) -> Result<()> {
    write_json(path, artifact)
}

pub fn load_agent(path: &Path) -> Result<AgentArtifact> {
    let artifact: AgentArtifact = read_json(path)?;
    if artifact.format != AGENT_FORMAT {
        bail!(
            "{}: expected format `{AGENT_FORMAT}`, found `{}`",
            path.display(),
            artifact.format
        );
    }
    if artifact.version != AGENT_VERSION {
        bail!(
            "{}: unsupported agent version {} (this build reads {AGENT_VERSION})",
            path.display(),
            artifact.version
        );
    }
    if artifact.runs.is_empty() {
        bail!("{}: agent artifact stores no runs", path.display());
    }
    Ok(artifact)
}

// ---------------------------------------------------------------------------
// Grid search report
// ---------------------------------------------------------------------------

pub const GRID_FORMAT: &str = "uplimit-grid-search";
pub const GRID_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEnvelope {
    pub format: String,
    pub version: u32,
    pub algo: String,
    pub gamma: f64,
    pub episodes: usize,
    pub runs: usize,
    pub seed: u64,
    pub portfolio_fingerprint: u64,
    pub report: uplimit_core::agents::GridSearchReport,
}

pub fn save_grid(path: &Path, envelope: &GridEnvelope) -> Result<()> {
    write_json(path, envelope)
}

pub fn load_grid(path: &Path) -> Result<GridEnvelope> {
    let envelope: GridEnvelope = read_json(path)?;
    if envelope.format != GRID_FORMAT {
        bail!(
            "{}: expected format `{GRID_FORMAT}`, found `{}`",
            path.display(),
            envelope.format
        );
    }
    if envelope.version != GRID_VERSION {
        bail!(
            "{}: unsupported grid report version {}",
            path.display(),
            envelope.version
        );
    }
    Ok(envelope)
}

// ---------------------------------------------------------------------------
// Predictor metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub n_rows: usize,
    pub n_train: usize,
    pub n_holdout: usize,
    /// Metrics of a model fitted on the training split, scored on the
    /// holdout. The shipped model is refitted on all rows afterwards.
    pub holdout: PredictorMetrics,
}

pub fn save_metrics(path: &Path, metrics: &MetricsArtifact) -> Result<()> {
    write_json(path, metrics)
}
