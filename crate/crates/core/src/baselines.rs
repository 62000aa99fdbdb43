//! Reference strategies the trained agent must beat, and the comparison
//! harness that lines everyone up on the same episodes.
//!
//! Every strategy is evaluated by replaying full episodes through the same
//! environment as training: identical permutation seeds, identical predictor,
//! identical provisioning parameters. Deterministic strategies therefore
//! produce the same total on every permutation (rewards are per-customer);
//! only stochastic ones show episode-to-episode spread.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{run_policy, GreedyPolicy};
use crate::env::{Action, BalancePredictor, DiscretizationGrid};
use crate::error::{Error, Result};
use crate::portfolio::{CustomerRecord, Portfolio};
use crate::predictor::{base_features, TrainingRow};
use crate::predictor::tree::{TreeClassifier, TreeConfig};
use crate::seeds;
use crate::synth::{increase_reward, GroundTruth};

/// A reference strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicySpec {
    /// Increase each customer independently with probability `p`.
    Random { p: f64 },
    AllIncrease,
    MaintainAll,
    /// Increase exactly the customers with no missed payments.
    NoArrears,
    /// Replay the bank's historical rule: increase when the fitted
    /// propensity for an increase reaches `threshold`.
    CurrentPolicy { threshold: f64 },
    /// Increase the customers whose bureau score strictly exceeds the
    /// portfolio's nearest-rank `q`-percentile.
    BureauPercentile { q: f64 },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::Random { p } if !(0.0..=1.0).contains(&p) => Err(Error::InvalidConfig(
                format!("random increase probability must lie in [0, 1], got {p}"),
            )),
            PolicySpec::CurrentPolicy { threshold } if !(0.0..=1.0).contains(&threshold) => {
                Err(Error::InvalidConfig(format!(
                    "propensity threshold must lie in [0, 1], got {threshold}"
                )))
            }
            PolicySpec::BureauPercentile { q } if !(q > 0.0 && q < 1.0) => {
                Err(Error::InvalidConfig(format!(
                    "bureau percentile must lie in (0, 1), got {q}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Stable strategy label used in comparison tables.
    pub fn name(&self) -> String {
        match *self {
            PolicySpec::Random { p } => format!("random_{p}"),
            PolicySpec::AllIncrease => "all_increase".to_string(),
            PolicySpec::MaintainAll => "maintain_all".to_string(),
            PolicySpec::NoArrears => "no_arrears".to_string(),
            PolicySpec::CurrentPolicy { threshold } => format!("current_policy_{threshold}"),
            PolicySpec::BureauPercentile { q } => format!("bureau_q{q}"),
        }
    }
}

/// The standard comparison set.
pub fn default_baseline_set() -> Vec<PolicySpec> {
    vec![
        PolicySpec::Random { p: 0.5 },
        PolicySpec::AllIncrease,
        PolicySpec::MaintainAll,
        PolicySpec::NoArrears,
        PolicySpec::CurrentPolicy { threshold: 0.5 },
        PolicySpec::BureauPercentile { q: 0.85 },
        PolicySpec::BureauPercentile { q: 0.95 },
    ]
}

/// Nearest-rank percentile: the smallest score with rank `ceil(q * n)` when
/// the scores are sorted ascending.
pub fn nearest_rank_percentile(scores: &[f64], q: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// The historical increase rule recovered from training data: a classifier
/// over the financial feature block predicting the recorded decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityModel {
    classifier: TreeClassifier,
}

impl PropensityModel {
    /// Fits on the pre-decision feature block; the label is each row's
    /// recorded action.
    pub fn fit(rows: &[TrainingRow], cfg: &TreeConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let x: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.features[..crate::predictor::N_BASE_FEATURES].to_vec())
            .collect();
        let y: Vec<usize> = rows.iter().map(|r| r.features[16] as usize).collect();
        Ok(PropensityModel {
            classifier: TreeClassifier::fit(&x, &y, 2, cfg)?,
        })
    }

    pub fn prob_increase(&self, rec: &CustomerRecord) -> f64 {
        self.classifier.predict_proba(&base_features(rec))[1]
    }
}

const PROPENSITY_FORMAT: &str = "uplimit-propensity-model";
const PROPENSITY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PropensityEnvelope {
    format: String,
    version: u32,
    model: PropensityModel,
}

pub fn save_propensity(path: impl AsRef<Path>, model: &PropensityModel) -> Result<()> {
    let path = path.as_ref();
    let envelope = PropensityEnvelope {
        format: PROPENSITY_FORMAT.to_string(),
        version: PROPENSITY_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_propensity(path: impl AsRef<Path>) -> Result<PropensityModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let envelope: PropensityEnvelope =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if envelope.format != PROPENSITY_FORMAT {
        return Err(Error::ModelFormat(format!(
            "expected format `{PROPENSITY_FORMAT}`, found `{}`",
            envelope.format
        )));
    }
    if envelope.version != PROPENSITY_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported propensity model version {}",
            envelope.version
        )));
    }
    Ok(envelope.model)
}

/// A spec resolved against a concrete portfolio: percentile thresholds are
/// frozen and the propensity model is wired in.
struct CompiledPolicy<'a> {
    spec: PolicySpec,
    propensity: Option<&'a PropensityModel>,
    bureau_threshold: f64,
}

impl<'a> CompiledPolicy<'a> {
    fn new(
        spec: &PolicySpec,
        portfolio: &Portfolio,
        propensity: Option<&'a PropensityModel>,
    ) -> Result<Self> {
        spec.validate()?;
        let bureau_threshold = match *spec {
            PolicySpec::BureauPercentile { q } => {
                let scores: Vec<f64> =
                    portfolio.customers.iter().map(|c| c.bureau_score).collect();
                nearest_rank_percentile(&scores, q)?
            }
            _ => 0.0,
        };
        if matches!(spec, PolicySpec::CurrentPolicy { .. }) && propensity.is_none() {
            return Err(Error::InvalidConfig(
                "the current-policy baseline needs a fitted propensity model".to_string(),
            ));
        }
        Ok(CompiledPolicy {
            spec: *spec,
            propensity,
            bureau_threshold,
        })
    }

    fn decide(&self, rec: &CustomerRecord, rng: &mut ChaCha8Rng) -> Action {
        use rand::Rng;
        let increase = match self.spec {
            PolicySpec::Random { p } => rng.gen_bool(p),
            PolicySpec::AllIncrease => true,
            PolicySpec::MaintainAll => false,
            PolicySpec::NoArrears => rec.mp_r == 0,
            PolicySpec::CurrentPolicy { threshold } => {
                self.propensity.expect("checked at compile").prob_increase(rec) >= threshold
            }
            PolicySpec::BureauPercentile { .. } => rec.bureau_score > self.bureau_threshold,
        };
        if increase {
            Action::Increase
        } else {
            Action::Maintain
        }
    }
}

/// Provenance stamp of an evaluation, used to refuse apples-to-oranges
/// comparisons. The predictor itself cannot be fingerprinted; runs must pair
/// the same predictor artifact with the same portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalContext {
    pub portfolio_fingerprint: u64,
    pub episodes: usize,
    pub seed: u64,
}

/// Result of evaluating one strategy over permuted episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub strategy: String,
    pub context: EvalContext,
    pub episode_totals: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the episode totals; zero for a single
    /// episode.
    pub std: f64,
    /// Mean fraction of increase decisions per episode.
    pub increase_fraction: f64,
}

fn summarize(
    strategy: String,
    context: EvalContext,
    episode_totals: Vec<f64>,
    increase_fractions: &[f64],
) -> PolicyEvaluation {
    let n = episode_totals.len() as f64;
    let mean = episode_totals.iter().sum::<f64>() / n;
    let std = if episode_totals.len() > 1 {
        (episode_totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let increase_fraction = increase_fractions.iter().sum::<f64>() / n;
    PolicyEvaluation {
        strategy,
        context,
        episode_totals,
        mean,
        std,
        increase_fraction,
    }
}

fn evaluate_decide(
    strategy: String,
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    episodes: usize,
    seed: u64,
    mut decide: impl FnMut(&CustomerRecord, &crate::env::DiscretizedState, &mut ChaCha8Rng) -> Action,
) -> Result<PolicyEvaluation> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be positive".to_string()));
    }
    let mut totals = Vec::with_capacity(episodes);
    let mut fractions = Vec::with_capacity(episodes);
    for ep in 0..episodes as u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::STREAM_BASELINE, ep));
        let eval = run_policy(
            portfolio,
            predictor,
            grid,
            seeds::derive(seed, seeds::STREAM_POLICY_EPISODE, ep),
            |rec, state| decide(rec, state, &mut rng),
        )?;
        totals.push(eval.total);
        fractions.push(eval.increase_fraction());
    }
    let context = EvalContext {
        portfolio_fingerprint: portfolio.fingerprint(),
        episodes,
        seed,
    };
    Ok(summarize(strategy, context, totals, &fractions))
}

/// Evaluates one reference strategy over `episodes` permuted episodes.
pub fn evaluate_policy(
    spec: &PolicySpec,
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    propensity: Option<&PropensityModel>,
    episodes: usize,
    seed: u64,
) -> Result<PolicyEvaluation> {
    let compiled = CompiledPolicy::new(spec, portfolio, propensity)?;
    evaluate_decide(
        spec.name(),
        portfolio,
        predictor,
        grid,
        episodes,
        seed,
        |rec, _, rng| compiled.decide(rec, rng),
    )
}

/// Evaluates a frozen greedy policy on the same footing as the baselines.
pub fn evaluate_agent(
    name: &str,
    policy: &GreedyPolicy,
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    episodes: usize,
    seed: u64,
) -> Result<PolicyEvaluation> {
    evaluate_decide(
        name.to_string(),
        portfolio,
        predictor,
        grid,
        episodes,
        seed,
        |_, state, _| policy.action(state),
    )
}

/// Evaluates the exact oracle: increase precisely the customers whose
/// ground-truth reward is positive.
pub fn evaluate_oracle(
    truth: &GroundTruth,
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    episodes: usize,
    seed: u64,
) -> Result<PolicyEvaluation> {
    truth.validate_covers(portfolio)?;
    let params = portfolio.params;
    evaluate_decide(
        "oracle".to_string(),
        portfolio,
        predictor,
        grid,
        episodes,
        seed,
        |rec, _, _| {
            if increase_reward(rec, truth, &params) > 0.0 {
                Action::Increase
            } else {
                Action::Maintain
            }
        },
    )
}

pub const COMPARISON_HEADER: [&str; 4] =
    ["strategy", "mean_reward", "std_reward", "increase_fraction"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub increase_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub context: EvalContext,
    pub rows: Vec<ComparisonRow>,
}

/// Collapses evaluations into comparison rows, refusing inputs that were not
/// produced under one shared context.
pub fn assemble_comparison(evaluations: &[PolicyEvaluation]) -> Result<Comparison> {
    let first = evaluations.first().ok_or(Error::EmptyInput)?;
    for e in evaluations {
        if e.context != first.context {
            return Err(Error::MismatchedContext(format!(
                "evaluation `{}` ran under a different portfolio, episode count, or seed than `{}`",
                e.strategy, first.strategy
            )));
        }
    }
    let rows = evaluations
        .iter()
        .map(|e| ComparisonRow {
            strategy: e.strategy.clone(),
            mean_reward: e.mean,
            std_reward: e.std,
            increase_fraction: e.increase_fraction,
        })
        .collect();
    Ok(Comparison {
        context: first.context,
        rows,
    })
}

/// Runs the full comparison: the oracle when ground truth is available, the
/// agent when one is supplied, then every requested baseline. A maintain-all
/// row is always included.
#[allow(clippy::too_many_arguments)]
pub fn compare(
    portfolio: &Portfolio,
    predictor: &dyn BalancePredictor,
    grid: &DiscretizationGrid,
    truth: Option<&GroundTruth>,
    agent: Option<(&str, &GreedyPolicy)>,
    specs: &[PolicySpec],
    propensity: Option<&PropensityModel>,
    episodes: usize,
    seed: u64,
) -> Result<Comparison> {
    let mut evaluations = Vec::new();
    if let Some(truth) = truth {
        evaluations.push(evaluate_oracle(truth, portfolio, predictor, grid, episodes, seed)?);
    }
    if let Some((name, policy)) = agent {
        evaluations.push(evaluate_agent(name, policy, portfolio, predictor, grid, episodes, seed)?);
    }
    for spec in specs {
        evaluations.push(evaluate_policy(
            spec, portfolio, predictor, grid, propensity, episodes, seed,
        )?);
    }
    if !specs.contains(&PolicySpec::MaintainAll) {
        evaluations.push(evaluate_policy(
            &PolicySpec::MaintainAll,
            portfolio,
            predictor,
            grid,
            propensity,
            episodes,
            seed,
        )?);
    }
    assemble_comparison(&evaluations)
}

pub fn write_comparison_csv(path: impl AsRef<Path>, comparison: &Comparison) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(COMPARISON_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for row in &comparison.rows {
        writer
            .write_record([
                row.strategy.as_str(),
                &row.mean_reward.to_string(),
                &row.std_reward.to_string(),
                &row.increase_fraction.to_string(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, oracle_value, SynthConfig};

    fn data(n: usize, seed: u64) -> crate::synth::SyntheticData {
        generate(&SynthConfig {
            n_customers: n,
            n_defaulters: 0,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn grid() -> DiscretizationGrid {
        DiscretizationGrid::default()
    }

    #[test]
    fn nearest_rank_percentile_matches_the_frozen_example() {
        let mut scores: Vec<f64> = (1..=100).map(f64::from).collect();
        scores.reverse();
        assert_eq!(nearest_rank_percentile(&scores, 0.85).unwrap(), 85.0);
        assert_eq!(nearest_rank_percentile(&scores, 0.95).unwrap(), 95.0);
        let above = scores.iter().filter(|&&s| s > 85.0).count();
        assert_eq!(above, 15);
        // Tiny and near-one quantiles clamp to the extremes.
        assert_eq!(nearest_rank_percentile(&scores, 0.001).unwrap(), 1.0);
        assert_eq!(nearest_rank_percentile(&scores, 0.999).unwrap(), 100.0);
        assert!(nearest_rank_percentile(&[], 0.5).is_err());
    }

    #[test]
    fn maintain_all_scores_exactly_zero() {
        let d = data(80, 1);
        let eval = evaluate_policy(
            &PolicySpec::MaintainAll,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            20,
            7,
        )
        .unwrap();
        assert_eq!(eval.mean, 0.0);
        assert_eq!(eval.std, 0.0);
        assert_eq!(eval.increase_fraction, 0.0);
        assert!(eval.episode_totals.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn all_increase_recovers_the_ground_truth_sum() {
        let d = data(120, 2);
        let by_hand: f64 = d
            .portfolio
            .customers
            .iter()
            .map(|rec| increase_reward(rec, &d.truth, &d.portfolio.params))
            .sum();
        let eval = evaluate_policy(
            &PolicySpec::AllIncrease,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            10,
            3,
        )
        .unwrap();
        assert!((eval.mean - by_hand).abs() < 1e-9);
        // Every episode sums the same per-customer rewards, just in permuted
        // order, so the spread is summation roundoff at most.
        assert!(eval.std < 1e-9, "std = {}", eval.std);
        assert_eq!(eval.increase_fraction, 1.0);
    }

    #[test]
    fn no_arrears_gates_on_missed_payments() {
        let d = data(150, 3);
        let has_arrears = d.portfolio.customers.iter().any(|c| c.mp_r > 0);
        assert!(has_arrears, "fixture needs at least one delinquent customer");
        let clean =
            d.portfolio.customers.iter().filter(|c| c.mp_r == 0).count() as f64
                / d.portfolio.len() as f64;
        let eval = evaluate_policy(
            &PolicySpec::NoArrears,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            5,
            11,
        )
        .unwrap();
        assert!((eval.increase_fraction - clean).abs() < 1e-12);
    }

    #[test]
    fn random_half_lands_near_half_of_all_increase() {
        let d = data(100, 4);
        let all = evaluate_policy(
            &PolicySpec::AllIncrease,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            5,
            13,
        )
        .unwrap();
        let random = evaluate_policy(
            &PolicySpec::Random { p: 0.5 },
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            100,
            13,
        )
        .unwrap();
        assert!(random.std > 0.0);
        assert!((0.4..0.6).contains(&random.increase_fraction), "{}", random.increase_fraction);
        let se = random.std / (random.episode_totals.len() as f64).sqrt();
        assert!(
            (random.mean - all.mean / 2.0).abs() < 4.0 * se,
            "random {} vs half {}",
            random.mean,
            all.mean / 2.0
        );
    }

    #[test]
    fn bureau_percentile_sets_nest() {
        let d = data(200, 5);
        let decisions = |q: f64| -> Vec<String> {
            let compiled = CompiledPolicy::new(
                &PolicySpec::BureauPercentile { q },
                &d.portfolio,
                None,
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            d.portfolio
                .customers
                .iter()
                .filter(|rec| compiled.decide(rec, &mut rng) == Action::Increase)
                .map(|rec| rec.customer_id.clone())
                .collect()
        };
        let wide = decisions(0.85);
        let narrow = decisions(0.95);
        assert!(!wide.is_empty());
        assert!(narrow.len() < wide.len());
        assert!(narrow.iter().all(|id| wide.contains(id)));
    }

    #[test]
    fn current_policy_needs_a_propensity_model() {
        let d = data(60, 6);
        let err = evaluate_policy(
            &PolicySpec::CurrentPolicy { threshold: 0.5 },
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            5,
            1,
        );
        assert!(matches!(err, Err(Error::InvalidConfig(_))));

        let model = PropensityModel::fit(&d.training, &TreeConfig::default()).unwrap();
        // Threshold zero makes the rule an unconditional increase.
        let all_in = evaluate_policy(
            &PolicySpec::CurrentPolicy { threshold: 0.0 },
            &d.portfolio,
            &d.truth,
            &grid(),
            Some(&model),
            5,
            1,
        )
        .unwrap();
        assert_eq!(all_in.increase_fraction, 1.0);
        let strict = evaluate_policy(
            &PolicySpec::CurrentPolicy { threshold: 0.5 },
            &d.portfolio,
            &d.truth,
            &grid(),
            Some(&model),
            5,
            1,
        )
        .unwrap();
        assert!(strict.increase_fraction < 1.0);
    }

    #[test]
    fn propensity_model_round_trips() {
        let d = data(60, 8);
        let model = PropensityModel::fit(&d.training, &TreeConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("propensity.json");
        save_propensity(&path, &model).unwrap();
        let loaded = load_propensity(&path).unwrap();
        for rec in &d.portfolio.customers {
            assert_eq!(model.prob_increase(rec), loaded.prob_increase(rec));
        }
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"model\":{}}").unwrap();
        assert!(load_propensity(&path).is_err());
    }

    #[test]
    fn comparison_includes_oracle_and_maintain_all() {
        let d = data(150, 9);
        let comparison = compare(
            &d.portfolio,
            &d.truth,
            &grid(),
            Some(&d.truth),
            None,
            &[PolicySpec::AllIncrease, PolicySpec::NoArrears],
            None,
            10,
            21,
        )
        .unwrap();
        let names: Vec<&str> = comparison.rows.iter().map(|r| r.strategy.as_str()).collect();
        assert_eq!(names, ["oracle", "all_increase", "no_arrears", "maintain_all"]);
        let oracle = comparison.rows[0].mean_reward;
        assert!((oracle - oracle_value(&d.portfolio, &d.truth)).abs() < 1e-9);
        for row in &comparison.rows {
            assert!(oracle >= row.mean_reward, "{} beat the oracle", row.strategy);
        }
    }

    #[test]
    fn mismatched_contexts_are_rejected() {
        let d = data(40, 10);
        let a = evaluate_policy(
            &PolicySpec::MaintainAll,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            5,
            1,
        )
        .unwrap();
        let b = evaluate_policy(
            &PolicySpec::AllIncrease,
            &d.portfolio,
            &d.truth,
            &grid(),
            None,
            5,
            2,
        )
        .unwrap();
        assert!(matches!(
            assemble_comparison(&[a, b]),
            Err(Error::MismatchedContext(_))
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(PolicySpec::Random { p: 1.5 }.validate().is_err());
        assert!(PolicySpec::CurrentPolicy { threshold: -0.1 }.validate().is_err());
        assert!(PolicySpec::BureauPercentile { q: 0.0 }.validate().is_err());
        assert!(PolicySpec::BureauPercentile { q: 1.0 }.validate().is_err());
        assert!(PolicySpec::Random { p: 0.5 }.validate().is_ok());
    }

    #[test]
    fn comparison_csv_has_the_pinned_columns() {
        let d = data(50, 12);
        let comparison = compare(
            &d.portfolio,
            &d.truth,
            &grid(),
            Some(&d.truth),
            None,
            &[PolicySpec::MaintainAll],
            None,
            5,
            3,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comparison.csv");
        write_comparison_csv(&path, &comparison).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], COMPARISON_HEADER.join(","));
        assert_eq!(lines.len(), 1 + comparison.rows.len());
        assert!(lines[1].starts_with("oracle,"));
        assert!(lines.last().unwrap().starts_with("maintain_all,0,0,0"));
    }
}
