//! The pipeline stages behind each subcommand.
//!
//! Stages communicate only through files in the output directory. Each one
//! resolves its inputs with [`artifacts::require`] so a missing upstream
//! artifact names the command that produces it, writes its own outputs, and
//! appends a manifest entry recording the resolved configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use uplimit_core::agents::{
    self, final_window_average, train, AgentConfig, GreedyPolicy, GridSearchConfig, TrainResult,
    SMOOTHING_WINDOW,
};
use uplimit_core::baselines::{
    compare, load_propensity, save_propensity, write_comparison_csv, PolicySpec, PropensityModel,
};
use uplimit_core::env::{discretize, episode_reset, DiscretizationGrid};
use uplimit_core::portfolio::{load_portfolio_csv, write_portfolio_csv, Portfolio};
use uplimit_core::predictor::tree::TreeConfig;
use uplimit_core::predictor::{
    evaluate, fit_two_stage, holdout_split, load_model, load_training_csv, save_model,
    write_training_csv, FitConfig, TrainingRow, TwoStageModel,
};
use uplimit_core::provisioning::{load_defaulters_csv, portfolio_ccf, write_defaulters_csv};
use uplimit_core::seeds;
use uplimit_core::synth::{self, load_truth_csv, write_truth_csv, SynthConfig};

use crate::artifacts::{
    self, load_agent, save_agent, save_grid, save_metrics, AgentArtifact, GridEnvelope,
    MetricsArtifact, AGENT_JSON, COMPARISON_CSV, COMPARISON_CURVE_CSV, CURVES_CSV, DECISIONS_CSV,
    DEFAULTERS_CSV, GRID_CSV, GRID_JSON, METRICS_JSON, MODEL_JSON, MULTI_SEED_CURVES_CSV,
    PORTFOLIO_CSV, PROPENSITY_JSON, QTABLE_CSV, TRAINING_CSV, TRUTH_CSV,
};
use crate::config::{CcfSetting, RunConfig};
use crate::manifest;

fn record(
    out: &Path,
    stage: &str,
    cfg: &RunConfig,
    jobs: Option<usize>,
    inputs: &[&str],
    written: &[&str],
) -> Result<()> {
    manifest::append(
        out,
        manifest::entry(stage, cfg.resolved(), cfg.seed()?, jobs, inputs, written),
    )
}

// ---------------------------------------------------------------------------
// simulate-data
// ---------------------------------------------------------------------------

pub fn simulate_data(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let CcfSetting::Fixed(ccf) = cfg.ccf()? else {
        bail!(
            "simulate-data needs a numeric `ccf` to generate data; \
             `ccf = estimate` only makes sense for stages that read defaulters.csv"
        );
    };
    let scfg = SynthConfig {
        n_customers: cfg.usize("n_customers")?,
        n_defaulters: cfg.usize("n_defaulters")?,
        seed: cfg.seed()?,
        noise: cfg.f64("noise")?,
        historical_increase_rate: cfg.f64("historical_increase_rate")?,
        preset: cfg.preset()?,
        params: cfg.params_with_ccf(ccf)?,
    };
    let data = synth::generate(&scfg)?;

    write_portfolio_csv(&data.portfolio, out.join(PORTFOLIO_CSV))?;
    write_truth_csv(out.join(TRUTH_CSV), &data.truth)?;
    write_training_csv(&out.join(TRAINING_CSV), &data.training)?;
    write_defaulters_csv(out.join(DEFAULTERS_CSV), &data.defaulters)?;

    let written = [PORTFOLIO_CSV, TRUTH_CSV, TRAINING_CSV, DEFAULTERS_CSV];
    record(out, "simulate-data", cfg, jobs, &[], &written)?;
    println!(
        "simulate-data: {} customers ({} preset), {} defaulter observations -> {}",
        data.portfolio.len(),
        scfg.preset.name(),
        data.defaulters.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-predictor
// ---------------------------------------------------------------------------

fn tree_config(cfg: &RunConfig) -> Result<TreeConfig> {
    Ok(TreeConfig {
        max_depth: cfg.usize("max_depth")?,
        min_samples_leaf: cfg.usize("min_samples_leaf")?,
        n_trees: cfg.usize("n_trees")?,
        seed: cfg.seed()?,
    })
}

pub fn fit_predictor(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let rows = load_training_csv(&artifacts::require(out, TRAINING_CSV, "simulate-data")?)?;
    let trees = tree_config(cfg)?;
    let fit_cfg = FitConfig {
        cutoff: cfg.f64("cutoff")?,
        classifier: trees.clone(),
        regressor: trees.clone(),
        smote_k: cfg.optional_usize("smote_k")?,
        min_rows_per_class: cfg.optional_usize("min_rows_per_class")?,
        seed: cfg.seed()?,
    };

    // Holdout metrics first: fit on the training split, score the holdout.
    // The artifact that ships is then refitted on every row, so the metrics
    // are honest and the deployed model wastes no data.
    let (train_idx, hold_idx) =
        holdout_split(rows.len(), cfg.f64("holdout_fraction")?, cfg.seed()?)?;
    let train_rows: Vec<TrainingRow> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let hold_rows: Vec<TrainingRow> = hold_idx.iter().map(|&i| rows[i].clone()).collect();
    let holdout_model = fit_two_stage(&train_rows, &fit_cfg)?;
    let metrics = MetricsArtifact {
        n_rows: rows.len(),
        n_train: train_rows.len(),
        n_holdout: hold_rows.len(),
        holdout: evaluate(&holdout_model, &hold_rows)?,
    };

    let model = fit_two_stage(&rows, &fit_cfg)?;
    let propensity = PropensityModel::fit(&rows, &trees)?;

    save_model(&out.join(MODEL_JSON), &model)?;
    save_propensity(out.join(PROPENSITY_JSON), &propensity)?;
    save_metrics(&out.join(METRICS_JSON), &metrics)?;

    let written = [MODEL_JSON, PROPENSITY_JSON, METRICS_JSON];
    record(out, "fit-predictor", cfg, jobs, &[TRAINING_CSV], &written)?;
    println!(
        "fit-predictor: {} rows ({} train / {} holdout); holdout weighted F1 {:.3}, RMSE {:.2}, WAPE {:.3} -> {}",
        metrics.n_rows,
        metrics.n_train,
        metrics.n_holdout,
        metrics.holdout.weighted_f1,
        metrics.holdout.rmse,
        metrics.holdout.wape,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared upstream loading
// ---------------------------------------------------------------------------

/// The ccf as a number, plus whether defaulters.csv was consulted (for the
/// manifest's input list).
fn resolve_ccf(out: &Path, cfg: &RunConfig) -> Result<(f64, bool)> {
    match cfg.ccf()? {
        CcfSetting::Fixed(v) => Ok((v, false)),
        CcfSetting::Estimate => {
            let obs =
                load_defaulters_csv(artifacts::require(out, DEFAULTERS_CSV, "simulate-data")?)?;
            let ccf = portfolio_ccf(&obs)?;
            println!("ccf: estimated {ccf:.4} from {} defaulter observations", obs.len());
            Ok((ccf, true))
        }
    }
}

fn load_portfolio(out: &Path, cfg: &RunConfig, ccf: f64) -> Result<Portfolio> {
    let path = artifacts::require(out, PORTFOLIO_CSV, "simulate-data")?;
    Ok(load_portfolio_csv(
        &path,
        cfg.params_with_ccf(ccf)?,
        true,
    )?)
}

fn grid_from(cfg: &RunConfig) -> Result<DiscretizationGrid> {
    Ok(DiscretizationGrid::with_interest_range(
        cfg.f64("interest_min")?,
        cfg.f64("interest_max")?,
    )?)
}

fn predictor_from(out: &Path) -> Result<TwoStageModel> {
    load_model(&artifacts::require(out, MODEL_JSON, "fit-predictor")?)
        .context("loading the fitted balance predictor")
}

/// Refuses to pair an agent with a portfolio other than the one it was
/// trained on.
fn check_fingerprint(agent: &AgentArtifact, portfolio: &Portfolio) -> Result<()> {
    if agent.portfolio_fingerprint != portfolio.fingerprint() {
        bail!(
            "agent.json was trained on a different portfolio (or different lgd/beta/ccf); \
             re-run `uplimit train` against the current portfolio.csv"
        );
    }
    Ok(())
}

fn inputs_with_defaulters<'a>(base: &[&'a str], used_defaulters: bool) -> Vec<&'a str> {
    let mut inputs = base.to_vec();
    if used_defaulters {
        inputs.push(DEFAULTERS_CSV);
    }
    inputs
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn train_agent(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let (ccf, used_defaulters) = resolve_ccf(out, cfg)?;
    let portfolio = load_portfolio(out, cfg, ccf)?;
    let model = predictor_from(out)?;
    let acfg = AgentConfig {
        algo: cfg.algo()?,
        alpha: cfg.f64("alpha")?,
        gamma: cfg.f64("gamma")?,
        epsilon: cfg.f64("epsilon")?,
        episodes: cfg.usize("episodes")?,
        seed: cfg.seed()?,
        grid: grid_from(cfg)?,
    };
    let runs = cfg.usize("runs")?;
    if runs == 0 {
        bail!("config key `runs` must be at least 1");
    }

    let results: Result<Vec<TrainResult>, uplimit_core::Error> = (0..runs as u64)
        .into_par_iter()
        .map(|run| train(&portfolio, &model, &acfg, run))
        .collect();
    let results = results?;

    let artifact = AgentArtifact::from_runs(
        &acfg,
        (cfg.f64("interest_min")?, cfg.f64("interest_max")?),
        portfolio.fingerprint(),
        &results,
    );
    save_agent(&out.join(AGENT_JSON), &artifact)?;

    let inputs = inputs_with_defaulters(&[PORTFOLIO_CSV, MODEL_JSON], used_defaulters);
    record(out, "train", cfg, jobs, &inputs, &[AGENT_JSON])?;
    let canonical = &results[0];
    println!(
        "train: {} x {} episodes, final {}-episode average {:.2} (run 0, {} states) -> {}",
        runs,
        acfg.episodes,
        SMOOTHING_WINDOW,
        final_window_average(&canonical.episode_returns, SMOOTHING_WINDOW),
        canonical.tables.n_states(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// grid-search
// ---------------------------------------------------------------------------

pub fn grid_search(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let (ccf, used_defaulters) = resolve_ccf(out, cfg)?;
    let portfolio = load_portfolio(out, cfg, ccf)?;
    let model = predictor_from(out)?;
    let gcfg = GridSearchConfig {
        algo: cfg.algo()?,
        alphas: cfg.list_f64("grid_alphas")?,
        epsilons: cfg.list_f64("grid_epsilons")?,
        episodes: cfg.usize("grid_episodes")?,
        runs: cfg.usize("grid_runs")?,
        gamma: cfg.f64("gamma")?,
        seed: cfg.seed()?,
        grid: grid_from(cfg)?,
    };
    let report = agents::grid_search(&portfolio, &model, &gcfg)?;

    let envelope = GridEnvelope {
        format: artifacts::GRID_FORMAT.to_string(),
        version: artifacts::GRID_VERSION,
        algo: gcfg.algo.name().to_string(),
        gamma: gcfg.gamma,
        episodes: gcfg.episodes,
        runs: gcfg.runs,
        seed: gcfg.seed,
        portfolio_fingerprint: portfolio.fingerprint(),
        report: report.clone(),
    };
    save_grid(&out.join(GRID_JSON), &envelope)?;
    write_grid_csv(&out.join(GRID_CSV), &envelope)?;

    let inputs = inputs_with_defaulters(&[PORTFOLIO_CSV, MODEL_JSON], used_defaulters);
    record(out, "grid-search", cfg, jobs, &inputs, &[GRID_JSON, GRID_CSV])?;
    let best = report.best_cell();
    println!(
        "grid-search: {} cells x {} runs; best alpha {} epsilon {} with final average {:.2} -> {}",
        report.cells.len(),
        gcfg.runs,
        best.alpha,
        best.epsilon,
        best.final_avg_reward,
        out.display()
    );
    Ok(())
}

pub const GRID_CSV_HEADER: [&str; 4] = ["rank", "alpha", "epsilon", "final_avg_reward"];

/// Cells ranked best first; ties keep declaration order.
fn write_grid_csv(path: &Path, envelope: &GridEnvelope) -> Result<()> {
    let mut order: Vec<usize> = (0..envelope.report.cells.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&envelope.report.cells[a], &envelope.report.cells[b]);
        cb.final_avg_reward
            .partial_cmp(&ca.final_avg_reward)
            .expect("finite rewards")
            .then(a.cmp(&b))
    });
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(GRID_CSV_HEADER)?;
    for (rank, &i) in order.iter().enumerate() {
        let cell = &envelope.report.cells[i];
        writer.write_record([
            (rank + 1).to_string(),
            cell.alpha.to_string(),
            cell.epsilon.to_string(),
            cell.final_avg_reward.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn compare_policies(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let (ccf, used_defaulters) = resolve_ccf(out, cfg)?;
    let portfolio = load_portfolio(out, cfg, ccf)?;
    let model = predictor_from(out)?;
    let propensity = load_propensity(artifacts::require(out, PROPENSITY_JSON, "fit-predictor")?)?;
    let agent = load_agent(&artifacts::require(out, AGENT_JSON, "train")?)?;
    check_fingerprint(&agent, &portfolio)?;

    let grid = agent.grid()?;
    let policy = GreedyPolicy::from_tables(&agent.tables(0)?, cfg.table()?);
    let agent_name = format!("{}_agent", agent.algo);

    // The generator's ground truth is synthetic-only; when the portfolio
    // came from elsewhere the oracle row is simply absent.
    let truth = match out.join(TRUTH_CSV).exists() {
        true => Some(load_truth_csv(out.join(TRUTH_CSV))?),
        false => None,
    };

    let mut specs = vec![
        PolicySpec::Random { p: cfg.f64("random_p")? },
        PolicySpec::AllIncrease,
        PolicySpec::MaintainAll,
        PolicySpec::NoArrears,
        PolicySpec::CurrentPolicy { threshold: cfg.f64("propensity_threshold")? },
    ];
    for q in cfg.list_f64("bureau_quantiles")? {
        specs.push(PolicySpec::BureauPercentile { q });
    }

    let episodes = cfg.usize("eval_episodes")?;
    let seed = cfg.seed()?;
    let comparison = compare(
        &portfolio,
        &model,
        &grid,
        truth.as_ref(),
        Some((&agent_name, &policy)),
        &specs,
        Some(&propensity),
        episodes,
        seed,
    )?;
    write_comparison_csv(out.join(COMPARISON_CSV), &comparison)?;

    // Cumulative reward of the agent's greedy decisions over evaluation
    // episode 0, for plotting against the baselines' flat totals.
    let curve = agents::run_policy(
        &portfolio,
        &model,
        &grid,
        seeds::derive(seed, seeds::STREAM_POLICY_EPISODE, 0),
        |_, state| policy.action(state),
    )?;
    write_comparison_curve_csv(&out.join(COMPARISON_CURVE_CSV), &curve.curve)?;

    let mut inputs =
        inputs_with_defaulters(&[PORTFOLIO_CSV, MODEL_JSON, PROPENSITY_JSON, AGENT_JSON], used_defaulters);
    if truth.is_some() {
        inputs.push(TRUTH_CSV);
    }
    record(out, "compare", cfg, jobs, &inputs, &[COMPARISON_CSV, COMPARISON_CURVE_CSV])?;

    println!(
        "compare: {} strategies x {} episodes -> {}",
        comparison.rows.len(),
        episodes,
        out.display()
    );
    println!("{:<22} {:>12} {:>10} {:>10}", "strategy", "mean", "std", "increase");
    for row in &comparison.rows {
        println!(
            "{:<22} {:>12.2} {:>10.2} {:>10.3}",
            row.strategy, row.mean_reward, row.std_reward, row.increase_fraction
        );
    }
    Ok(())
}

pub const COMPARISON_CURVE_HEADER: [&str; 2] = ["step", "cumulative_reward"];

fn write_comparison_curve_csv(path: &Path, curve: &[f64]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(COMPARISON_CURVE_HEADER)?;
    for (i, total) in curve.iter().enumerate() {
        writer.write_record([(i + 1).to_string(), total.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// extract-policy
// ---------------------------------------------------------------------------

pub fn extract_policy(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let (ccf, used_defaulters) = resolve_ccf(out, cfg)?;
    let portfolio = load_portfolio(out, cfg, ccf)?;
    let agent = load_agent(&artifacts::require(out, AGENT_JSON, "train")?)?;
    check_fingerprint(&agent, &portfolio)?;

    let source = cfg.table()?;
    let tables = agent.tables(0)?;
    let table = tables.policy_table(source);
    let policy = GreedyPolicy::from_table(&table);

    // Replay the last training episode of run 0 greedily: same permutation,
    // same ledger dynamics, no predictor needed because rewards are not
    // recomputed.
    let run_seed = seeds::derive(agent.seed, seeds::STREAM_RUN, 0);
    let ep_seed = seeds::derive(
        run_seed,
        seeds::STREAM_EPISODE,
        agent.episodes.saturating_sub(1) as u64,
    );
    let grid = agent.grid()?;
    let mut ep = episode_reset(&portfolio, ep_seed)?;
    let mut decisions = Vec::with_capacity(portfolio.len());
    while let Some(state) = ep.current_state() {
        let rec = ep.current_customer().expect("not terminal");
        let d = discretize(&state, &grid, ep.ledger());
        let action = policy.action(&d);
        decisions.push(agents::Decision {
            customer_id: rec.customer_id.clone(),
            state: d,
            action,
        });
        ep.apply(action)?;
    }

    agents::write_decisions_csv(out.join(DECISIONS_CSV), &decisions)?;
    agents::write_qtable_csv(out.join(QTABLE_CSV), &table)?;

    let inputs = inputs_with_defaulters(&[PORTFOLIO_CSV, AGENT_JSON], used_defaulters);
    record(out, "extract-policy", cfg, jobs, &inputs, &[DECISIONS_CSV, QTABLE_CSV])?;
    let increases = decisions
        .iter()
        .filter(|d| d.action == uplimit_core::env::Action::Increase)
        .count();
    println!(
        "extract-policy: {} decisions ({} increases) from the {} table, {} states -> {}",
        decisions.len(),
        increases,
        source.name(),
        policy.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// export-curves
// ---------------------------------------------------------------------------

pub fn export_curves(out: &Path, cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let agent = load_agent(&artifacts::require(out, AGENT_JSON, "train")?)?;
    let run = cfg.usize("run")?;
    let Some(selected) = agent.runs.get(run) else {
        bail!("agent.json stores runs 0..{}, requested run {run}", agent.runs.len());
    };
    agents::write_curves_csv(out.join(CURVES_CSV), &selected.episode_returns)?;

    let mut written = vec![CURVES_CSV];
    if agent.runs.len() >= 2 {
        let curves: Vec<Vec<f64>> =
            agent.runs.iter().map(|r| r.episode_returns.clone()).collect();
        let aggregated = agents::aggregate_curves(&curves)?;
        write_multi_seed_csv(&out.join(MULTI_SEED_CURVES_CSV), &aggregated)?;
        written.push(MULTI_SEED_CURVES_CSV);
    } else {
        // A leftover aggregate from an earlier multi-run agent would
        // misrepresent the single run now stored.
        let stale = out.join(MULTI_SEED_CURVES_CSV);
        if stale.exists() {
            std::fs::remove_file(&stale)
                .with_context(|| format!("removing {}", stale.display()))?;
        }
    }

    record(out, "export-curves", cfg, jobs, &[AGENT_JSON], &written)?;
    println!(
        "export-curves: run {run} of {} ({} episodes){} -> {}",
        agent.runs.len(),
        selected.episode_returns.len(),
        if written.len() == 2 { ", plus cross-run mean and std" } else { "" },
        out.display()
    );
    Ok(())
}

pub const MULTI_SEED_HEADER: [&str; 3] = ["episode", "mean_reward", "std_reward"];

fn write_multi_seed_csv(path: &Path, curves: &agents::MultiRunCurves) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(MULTI_SEED_HEADER)?;
    for (i, (m, s)) in curves.mean.iter().zip(&curves.std).enumerate() {
        writer.write_record([(i + 1).to_string(), m.to_string(), s.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
