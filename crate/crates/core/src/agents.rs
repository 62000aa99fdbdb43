//! Tabular Q-learning and double Q-learning over discretized portfolio
//! states.
//!
//! Double Q keeps two sparse tables. Each step flips a fair coin to pick
//! which table to update; the chosen table supplies the argmax at the next
//! state and the other one values it, which removes the single-estimator
//! maximization bias. Behaviour is epsilon-greedy on the sum of the tables,
//! and every tie resolves to maintain, the conservative action.
//!
//! Seeding is layered so results are reproducible run by run: a run seed is
//! derived from the config seed and the run index, and per-episode
//! permutations, exploration, and the coin each get their own stream of it.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    discretize, episode_reset, Action, BalancePredictor, DiscretizationGrid, DiscretizedState,
};
use crate::error::{Error, Result};
use crate::portfolio::{CustomerRecord, Portfolio};
use crate::seeds;

/// A sparse action-value table. States never visited are implicitly zero.
pub type Table = HashMap<DiscretizedState, [f64; 2]>;

/// Episode window of the trailing moving average used for learning curves.
pub const SMOOTHING_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algo {
    Q,
    DoubleQ,
}

impl Algo {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Algo::Q),
            "double_q" => Ok(Algo::DoubleQ),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm `{other}` (expected `q` or `double_q`)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Q => "q",
            Algo::DoubleQ => "double_q",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub algo: Algo,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: usize,
    pub seed: u64,
    pub grid: DiscretizationGrid,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algo: Algo::DoubleQ,
            alpha: 0.01,
            gamma: 1.0,
            epsilon: 0.1,
            episodes: 500,
            seed: 0,
            grid: DiscretizationGrid::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be positive".to_string()));
        }
        self.grid.validate()
    }
}

fn argmax(q: &Table, s: &DiscretizedState) -> usize {
    let v = q.get(s).copied().unwrap_or_default();
    usize::from(v[1] > v[0])
}

/// Epsilon-greedy action choice: with probability `epsilon` a uniform
/// random action, otherwise the argmax with ties resolving to maintain.
pub fn epsilon_greedy(values: [f64; 2], epsilon: f64, rng: &mut impl Rng) -> Action {
    if rng.gen_bool(epsilon) {
        Action::from_index(rng.gen_range(0..2)).expect("two actions")
    } else if values[1] > values[0] {
        Action::Increase
    } else {
        Action::Maintain
    }
}

/// One Q-learning backup:
/// `q(s, a) += alpha * (r + gamma * max_a' q(s', a') - q(s, a))`.
/// A terminal transition bootstraps zero.
pub fn q_update(
    table: &mut Table,
    s: DiscretizedState,
    a: Action,
    r: f64,
    next: Option<&DiscretizedState>,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = next.map_or(0.0, |n| {
        let v = table.get(n).copied().unwrap_or_default();
        v[argmax(table, n)]
    });
    let slot = &mut table.entry(s).or_insert([0.0; 2])[a.index()];
    *slot += alpha * (r + gamma * bootstrap - *slot);
}

/// One double-Q backup on `upd`, bootstrapping through `boot`:
/// `upd(s, a) += alpha * (r + gamma * boot(s', argmax upd(s', .)) - upd(s, a))`.
/// A terminal transition bootstraps zero.
#[allow(clippy::too_many_arguments)]
pub fn double_q_update(
    upd: &mut Table,
    boot: &Table,
    s: DiscretizedState,
    a: Action,
    r: f64,
    next: Option<&DiscretizedState>,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = next.map_or(0.0, |n| {
        let best = argmax(upd, n);
        boot.get(n).copied().unwrap_or_default()[best]
    });
    let slot = &mut upd.entry(s).or_insert([0.0; 2])[a.index()];
    *slot += alpha * (r + gamma * bootstrap - *slot);
}

/// The pair of action-value tables of a double-Q agent.
#[derive(Debug, Clone, Default)]
pub struct DoubleQTables {
    q1: Table,
    q2: Table,
}

impl DoubleQTables {
    pub fn from_parts(q1: Table, q2: Table) -> Self {
        DoubleQTables { q1, q2 }
    }

    pub fn q1(&self) -> &Table {
        &self.q1
    }

    pub fn q2(&self) -> &Table {
        &self.q2
    }

    /// Sum of both tables at a state, the quantity behaviour is greedy on.
    pub fn summed(&self, s: &DiscretizedState) -> [f64; 2] {
        let a = self.q1.get(s).copied().unwrap_or_default();
        let b = self.q2.get(s).copied().unwrap_or_default();
        [a[0] + b[0], a[1] + b[1]]
    }

    /// Union of the states either table has touched, in key order.
    pub fn sorted_states(&self) -> Vec<DiscretizedState> {
        let mut states: Vec<DiscretizedState> =
            self.q1.keys().chain(self.q2.keys()).copied().collect();
        states.sort_unstable();
        states.dedup();
        states
    }
}

/// Which table a policy or an export reads from a trained double-Q agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QTableSource {
    #[default]
    Q1,
    Q2,
    /// Element-wise mean of both tables.
    Mean,
}

impl QTableSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(QTableSource::Q1),
            "q2" => Ok(QTableSource::Q2),
            "mean" => Ok(QTableSource::Mean),
            other => Err(Error::InvalidConfig(format!(
                "unknown q-table source `{other}` (expected `q1`, `q2`, or `mean`)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QTableSource::Q1 => "q1",
            QTableSource::Q2 => "q2",
            QTableSource::Mean => "mean",
        }
    }
}

/// Value tables of a trained agent, single or paired by algorithm.
#[derive(Debug, Clone)]
pub enum TrainedTables {
    Single(Table),
    Double(DoubleQTables),
}

impl TrainedTables {
    /// Values the behaviour policy is greedy on: the lone table, or the sum
    /// of the pair.
    pub fn behaviour_values(&self, s: &DiscretizedState) -> [f64; 2] {
        match self {
            TrainedTables::Single(t) => t.get(s).copied().unwrap_or_default(),
            TrainedTables::Double(pair) => pair.summed(s),
        }
    }

    /// The table policies and exports read. A single-table agent has only
    /// one choice; a pair resolves per `source`.
    pub fn policy_table(&self, source: QTableSource) -> Table {
        match self {
            TrainedTables::Single(t) => t.clone(),
            TrainedTables::Double(pair) => match source {
                QTableSource::Q1 => pair.q1.clone(),
                QTableSource::Q2 => pair.q2.clone(),
                QTableSource::Mean => {
                    let mut merged = Table::new();
                    for s in pair.sorted_states() {
                        let a = pair.q1.get(&s).copied().unwrap_or_default();
                        let b = pair.q2.get(&s).copied().unwrap_or_default();
                        merged.insert(s, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
                    }
                    merged
                }
            },
        }
    }

    pub fn sorted_states(&self) -> Vec<DiscretizedState> {
        match self {
            TrainedTables::Single(t) => {
                let mut states: Vec<DiscretizedState> = t.keys().copied().collect();
                states.sort_unstable();
                states
            }
            TrainedTables::Double(pair) => pair.sorted_states(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.sorted_states().len()
    }
}

/// Everything one training run produces.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub tables: TrainedTables,
    /// Cumulative reward collected in each training episode, exploration
    /// included.
    pub episode_returns: Vec<f64>,
}

/// Trains one agent. `run` indexes statistically independent repetitions of
/// the same configuration; run 0 is the canonical single run.
pub fn train(
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    cfg: &AgentConfig,
    run: u64,
) -> Result<TrainResult> {
    cfg.validate()?;
    let run_seed = seeds::derive(cfg.seed, seeds::STREAM_RUN, run);
    let mut explore =
        ChaCha8Rng::seed_from_u64(seeds::derive(run_seed, seeds::STREAM_EXPLORATION, 0));
    let mut selector =
        ChaCha8Rng::seed_from_u64(seeds::derive(run_seed, seeds::STREAM_SELECTOR, 0));
    let mut tables = match cfg.algo {
        Algo::Q => TrainedTables::Single(Table::new()),
        Algo::DoubleQ => TrainedTables::Double(DoubleQTables::default()),
    };
    let mut episode_returns = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let mut ep = episode_reset(
            portfolio,
            seeds::derive(run_seed, seeds::STREAM_EPISODE, episode as u64),
        )?;
        let mut state = discretize(
            &ep.current_state().expect("fresh episode is not terminal"),
            &cfg.grid,
            ep.ledger(),
        );
        let mut total = 0.0;
        loop {
            let action = epsilon_greedy(tables.behaviour_values(&state), cfg.epsilon, &mut explore);
            let out = ep.step(action, predictor)?;
            total += out.reward;
            let next = out.next_state.map(|s| discretize(&s, &cfg.grid, ep.ledger()));

            match &mut tables {
                TrainedTables::Single(table) => {
                    q_update(table, state, action, out.reward, next.as_ref(), cfg.alpha, cfg.gamma);
                }
                TrainedTables::Double(pair) => {
                    let DoubleQTables { q1, q2 } = pair;
                    let (upd, boot) = if selector.gen_bool(0.5) {
                        (q1, &*q2)
                    } else {
                        (q2, &*q1)
                    };
                    double_q_update(
                        upd,
                        boot,
                        state,
                        action,
                        out.reward,
                        next.as_ref(),
                        cfg.alpha,
                        cfg.gamma,
                    );
                }
            }

            match next {
                Some(n) => state = n,
                None => break,
            }
        }
        episode_returns.push(total);
    }
    Ok(TrainResult {
        tables,
        episode_returns,
    })
}

/// Trailing moving average: `out[i]` is the mean of the last `window` values
/// ending at `i`, of however many exist early on.
pub fn smooth(raw: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "smoothing window must be positive");
    let mut out = Vec::with_capacity(raw.len());
    let mut sum = 0.0;
    for i in 0..raw.len() {
        sum += raw[i];
        if i >= window {
            sum -= raw[i - window];
        }
        let len = (i + 1).min(window);
        out.push(sum / len as f64);
    }
    out
}

/// Per-episode mean and sample standard deviation across aligned curves.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRunCurves {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Collapses equally long curves into a mean curve and a sample-standard-
/// deviation curve.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<MultiRunCurves> {
    if curves.len() < 2 {
        return Err(Error::InvalidConfig(
            "aggregation needs at least two runs".to_string(),
        ));
    }
    let len = curves[0].len();
    for c in curves {
        if c.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: c.len(),
            });
        }
    }
    let n = curves.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for i in 0..len {
        let m = curves.iter().map(|c| c[i]).sum::<f64>() / n;
        let var = curves.iter().map(|c| (c[i] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(MultiRunCurves { mean, std })
}

/// Trains `runs` independent agents (run indices 0..runs) and aggregates
/// their learning curves episode by episode.
pub fn multi_seed(
    portfolio: &Portfolio,
    predictor: &(dyn BalancePredictor + Sync),
    cfg: &AgentConfig,
    runs: usize,
) -> Result<MultiRunCurves> {
    if runs < 2 {
        return Err(Error::InvalidConfig(
            "multi-seed runs must be at least 2".to_string(),
        ));
    }
    let curves: Result<Vec<Vec<f64>>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| Ok(train(portfolio, predictor, cfg, run)?.episode_returns))
        .collect();
    aggregate_curves(&curves?)
}

/// A frozen decision rule extracted from a trained table. States absent
/// from the table fall back to maintain.
#[derive(Debug, Clone, Default)]
pub struct GreedyPolicy {
    map: HashMap<DiscretizedState, Action>,
}

impl GreedyPolicy {
    pub fn from_table(table: &Table) -> Self {
        let map = table
            .iter()
            .map(|(s, v)| {
                let action = if v[1] > v[0] {
                    Action::Increase
                } else {
                    Action::Maintain
                };
                (*s, action)
            })
            .collect();
        GreedyPolicy { map }
    }

    pub fn from_tables(tables: &TrainedTables, source: QTableSource) -> Self {
        GreedyPolicy::from_table(&tables.policy_table(source))
    }

    pub fn action(&self, s: &DiscretizedState) -> Action {
        self.map.get(s).copied().unwrap_or(Action::Maintain)
    }

    /// Whether the policy has an explicit entry for `s`. Unknown states fall
    /// back to maintaining.
    pub fn contains(&self, s: &DiscretizedState) -> bool {
        self.map.contains_key(s)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// One decision of an evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub customer_id: String,
    pub state: DiscretizedState,
    pub action: Action,
}

/// A full evaluation episode under a fixed decision rule.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Total reward of the episode.
    pub total: f64,
    /// Cumulative reward after each step.
    pub curve: Vec<f64>,
    pub decisions: Vec<Decision>,
}

impl Evaluation {
    pub fn increase_fraction(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        let ups = self
            .decisions
            .iter()
            .filter(|d| d.action == Action::Increase)
            .count();
        ups as f64 / self.decisions.len() as f64
    }
}

/// Plays one episode with `decide` choosing every action, no learning and
/// no exploration. The permutation comes from `seed` exactly as in training.
pub fn run_policy(
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    seed: u64,
    mut decide: impl FnMut(&CustomerRecord, &DiscretizedState) -> Action,
) -> Result<Evaluation> {
    let mut ep = episode_reset(portfolio, seed)?;
    let mut total = 0.0;
    let mut curve = Vec::with_capacity(portfolio.len());
    let mut decisions = Vec::with_capacity(portfolio.len());
    while !ep.is_terminal() {
        let rec = ep.current_customer().expect("not terminal");
        let state = discretize(&ep.current_state().expect("not terminal"), grid, ep.ledger());
        let action = decide(rec, &state);
        let out = ep.step(action, predictor)?;
        total += out.reward;
        curve.push(total);
        decisions.push(Decision {
            customer_id: rec.customer_id.clone(),
            state,
            action,
        });
    }
    Ok(Evaluation {
        total,
        curve,
        decisions,
    })
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    pub algo: Algo,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub episodes: usize,
    /// Independent training runs per cell.
    pub runs: usize,
    pub gamma: f64,
    pub seed: u64,
    pub grid: DiscretizationGrid,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            algo: Algo::DoubleQ,
            alphas: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            epsilons: vec![0.05, 0.1, 0.15],
            episodes: 500,
            runs: 1,
            gamma: 1.0,
            seed: 0,
            grid: DiscretizationGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u64,
    /// Mean reward of the final smoothing window of training episodes.
    pub final_avg_reward: f64,
    /// The run's full learning curve.
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCellResult {
    pub alpha: f64,
    pub epsilon: f64,
    /// `final_avg_reward` averaged over the cell's runs, the ranking key.
    pub final_avg_reward: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub cells: Vec<GridCellResult>,
    /// Index into `cells` of the best final average; the earliest cell wins
    /// ties.
    pub best: usize,
}

impl GridSearchReport {
    pub fn best_cell(&self) -> &GridCellResult {
        &self.cells[self.best]
    }
}

/// Mean of the final `window` entries (or all of them when the curve is
/// shorter).
pub fn final_window_average(returns: &[f64], window: usize) -> f64 {
    let tail = &returns[returns.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Trains every (alpha, epsilon) cell `runs` times and ranks cells by the
/// mean reward of the final ten training episodes. All cells share the
/// master seed, so a one-cell grid reproduces `train` exactly. Work is
/// parallelized per run.
pub fn grid_search(
    portfolio: &Portfolio,
    predictor: &(dyn BalancePredictor + Sync),
    cfg: &GridSearchConfig,
) -> Result<GridSearchReport> {
    if cfg.alphas.is_empty() || cfg.epsilons.is_empty() {
        return Err(Error::InvalidConfig(
            "grid search needs at least one alpha and one epsilon".to_string(),
        ));
    }
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs must be positive".to_string()));
    }
    let mut jobs = Vec::new();
    for (ci, &alpha) in cfg.alphas.iter().enumerate() {
        for (cj, &epsilon) in cfg.epsilons.iter().enumerate() {
            for run in 0..cfg.runs as u64 {
                jobs.push((ci, cj, alpha, epsilon, run));
            }
        }
    }
    let summaries: Result<Vec<(usize, usize, RunSummary)>> = jobs
        .par_iter()
        .map(|&(ci, cj, alpha, epsilon, run)| {
            let acfg = AgentConfig {
                algo: cfg.algo,
                alpha,
                epsilon,
                gamma: cfg.gamma,
                episodes: cfg.episodes,
                seed: cfg.seed,
                grid: cfg.grid.clone(),
            };
            let trained = train(portfolio, predictor, &acfg, run)?;
            Ok((
                ci,
                cj,
                RunSummary {
                    run,
                    final_avg_reward: final_window_average(
                        &trained.episode_returns,
                        SMOOTHING_WINDOW,
                    ),
                    returns: trained.episode_returns,
                },
            ))
        })
        .collect();
    let summaries = summaries?;

    let mut cells = Vec::new();
    for (ci, &alpha) in cfg.alphas.iter().enumerate() {
        for (cj, &epsilon) in cfg.epsilons.iter().enumerate() {
            let runs: Vec<RunSummary> = summaries
                .iter()
                .filter(|(a, b, _)| *a == ci && *b == cj)
                .map(|(_, _, s)| s.clone())
                .collect();
            let final_avg_reward =
                runs.iter().map(|r| r.final_avg_reward).sum::<f64>() / runs.len() as f64;
            cells.push(GridCellResult {
                alpha,
                epsilon,
                final_avg_reward,
                runs,
            });
        }
    }
    let best = cells
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.final_avg_reward
                .partial_cmp(&b.final_avg_reward)
                .expect("finite rewards")
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("non-empty grid");
    Ok(GridSearchReport { cells, best })
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

pub const DECISIONS_HEADER: [&str; 9] = [
    "customer_id",
    "ur_bin",
    "pr_bin",
    "cr_bin",
    "mp_bin",
    "limit_bin",
    "int_bin",
    "provision_bin",
    "action",
];

pub fn write_decisions_csv(path: impl AsRef<std::path::Path>, decisions: &[Decision]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(DECISIONS_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for d in decisions {
        writer
            .write_record([
                d.customer_id.as_str(),
                &d.state.ur_bin.to_string(),
                &d.state.pr_bin.to_string(),
                &d.state.cr_bin.to_string(),
                &d.state.mp_bin.to_string(),
                &d.state.limit_bin.to_string(),
                &d.state.int_bin.to_string(),
                &d.state.provision_bin.to_string(),
                d.action.name(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub const CURVES_HEADER: [&str; 3] = ["episode", "raw_reward", "smoothed_reward"];

/// Writes per-episode training rewards with their trailing moving average,
/// 1-based episode numbering.
pub fn write_curves_csv(path: impl AsRef<std::path::Path>, returns: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let smoothed = smooth(returns, SMOOTHING_WINDOW);
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(CURVES_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for (i, (r, s)) in returns.iter().zip(&smoothed).enumerate() {
        writer
            .write_record([(i + 1).to_string(), r.to_string(), s.to_string()])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub const QTABLE_HEADER: [&str; 9] = [
    "ur_bin",
    "pr_bin",
    "cr_bin",
    "mp_bin",
    "limit_bin",
    "int_bin",
    "provision_bin",
    "action",
    "q_value",
];

/// Writes one row per (state, action), states in key order.
pub fn write_qtable_csv(path: impl AsRef<std::path::Path>, table: &Table) -> Result<()> {
    let path = path.as_ref();
    let mut states: Vec<&DiscretizedState> = table.keys().collect();
    states.sort_unstable();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(QTABLE_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for s in states {
        let v = table[s];
        for action in [Action::Maintain, Action::Increase] {
            writer
                .write_record([
                    s.ur_bin.to_string(),
                    s.pr_bin.to_string(),
                    s.cr_bin.to_string(),
                    s.mp_bin.to_string(),
                    s.limit_bin.to_string(),
                    s.int_bin.to_string(),
                    s.provision_bin.to_string(),
                    action.name().to_string(),
                    v[action.index()].to_string(),
                ])
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A (state, values) pair in a serialization-friendly shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableRow {
    pub state: DiscretizedState,
    pub q_maintain: f64,
    pub q_increase: f64,
}

pub fn table_to_rows(table: &Table) -> Vec<QTableRow> {
    let mut states: Vec<&DiscretizedState> = table.keys().collect();
    states.sort_unstable();
    states
        .into_iter()
        .map(|s| QTableRow {
            state: *s,
            q_maintain: table[s][0],
            q_increase: table[s][1],
        })
        .collect()
}

pub fn rows_to_table(rows: &[QTableRow]) -> Table {
    rows.iter()
        .map(|r| (r.state, [r.q_maintain, r.q_increase]))
        .collect()
}
