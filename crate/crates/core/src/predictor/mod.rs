//! Two-stage balance prediction.
//!
//! Stage one classifies the post-decision average balance into three bands:
//! zero, low (up to the cutoff), and high. Stage two predicts the amount with
//! a per-band regressor; the zero band needs none. Class imbalance in stage
//! one can be corrected with SMOTE-NC before fitting.

pub mod metrics;
pub mod smote;
pub mod tree;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{limit_after, Action, BalancePredictor};
use crate::error::{Error, Result};
use crate::portfolio::CustomerRecord;
use crate::seeds;
use metrics::{rmse, wape, weighted_f1};
use smote::{smote_nc, SmoteRow};
use tree::{TreeClassifier, TreeConfig, TreeRegressor};

/// Default boundary between the low and high balance bands, in currency
/// units.
pub const DEFAULT_BALANCE_CUTOFF: f64 = 75.81;

/// Balance band of the post-decision average balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceClass {
    /// Positive but at most the cutoff.
    Low,
    /// Above the cutoff.
    High,
    /// Exactly zero: the customer carries no balance.
    Zero,
}

impl BalanceClass {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            BalanceClass::Low => 0,
            BalanceClass::High => 1,
            BalanceClass::Zero => 2,
        }
    }
}

pub fn classify_balance(rbar: f64, cutoff: f64) -> BalanceClass {
    if rbar <= 0.0 {
        BalanceClass::Zero
    } else if rbar <= cutoff {
        BalanceClass::Low
    } else {
        BalanceClass::High
    }
}

/// Number of model features: 15 describing the customer before the decision
/// (the portfolio columns in file order), then the post-decision limit and
/// the action indicator.
pub const N_FEATURES: usize = 17;
pub const N_BASE_FEATURES: usize = 15;

/// Feature columns of a customer before any decision, in model order.
pub fn base_features(rec: &CustomerRecord) -> [f64; N_BASE_FEATURES] {
    [
        rec.tc[0],
        rec.tc[1],
        rec.tc[2],
        rec.ob[0],
        rec.ob[1],
        rec.ob[2],
        rec.pay[0],
        rec.pay[1],
        rec.pay[2],
        rec.mp_r as f64,
        rec.limit,
        rec.int_annual,
        rec.pd,
        rec.bureau_score,
        rec.months_on_book as f64,
    ]
}

/// Full model feature vector for a customer under a hypothetical action.
pub fn feature_vector(rec: &CustomerRecord, action: Action, beta: f64) -> [f64; N_FEATURES] {
    let base = base_features(rec);
    let mut out = [0.0; N_FEATURES];
    out[..N_BASE_FEATURES].copy_from_slice(&base);
    out[15] = limit_after(rec.limit, action, beta);
    out[16] = action.index() as f64;
    out
}

/// One supervised example: features under the action actually taken, and the
/// realized post-decision average balance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub customer_id: String,
    pub features: [f64; N_FEATURES],
    pub target_rbar: f64,
}

pub const TRAINING_HEADER: [&str; 19] = [
    "customer_id",
    "tc_1",
    "tc_2",
    "tc_3",
    "ob_1",
    "ob_2",
    "ob_3",
    "pay_1",
    "pay_2",
    "pay_3",
    "mp_r",
    "limit",
    "int_annual",
    "pd",
    "bureau_score",
    "months_on_book",
    "limit_post",
    "ha_p",
    "target_rbar",
];

pub fn load_training_csv(path: &Path) -> Result<Vec<TrainingRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if header.iter().ne(TRAINING_HEADER.iter().copied()) {
        return Err(Error::format(
            path,
            format!("expected training header {:?}", TRAINING_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != TRAINING_HEADER.len() {
            return Err(Error::InvalidRecord {
                row,
                field: "record",
                message: format!("expected {} fields, got {}", TRAINING_HEADER.len(), record.len()),
            });
        }
        let field = |i: usize| -> &str { record.get(i).unwrap_or("") };
        let parse = |i: usize, name: &'static str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|e| Error::InvalidRecord {
                row,
                field: name,
                message: e.to_string(),
            })
        };
        let mut features = [0.0; N_FEATURES];
        for (j, slot) in features.iter_mut().enumerate() {
            *slot = parse(j + 1, TRAINING_HEADER[j + 1])?;
        }
        let target_rbar = parse(18, "target_rbar")?;
        let bad = |field: &'static str, message: String| Error::InvalidRecord { row, field, message };
        if features.iter().any(|v| !v.is_finite()) || !target_rbar.is_finite() {
            return Err(bad("record", "non-finite value".to_string()));
        }
        if target_rbar < 0.0 {
            return Err(bad("target_rbar", "must be non-negative".to_string()));
        }
        if features[16] != 0.0 && features[16] != 1.0 {
            return Err(bad("ha_p", "must be 0 or 1".to_string()));
        }
        rows.push(TrainingRow {
            customer_id: field(0).to_string(),
            features,
            target_rbar,
        });
    }
    Ok(rows)
}

pub fn write_training_csv(path: &Path, rows: &[TrainingRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(TRAINING_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for row in rows {
        let mut record = Vec::with_capacity(TRAINING_HEADER.len());
        record.push(row.customer_id.clone());
        record.extend(row.features.iter().map(|v| v.to_string()));
        record.push(row.target_rbar.to_string());
        writer
            .write_record(&record)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Hyperparameters for fitting the two-stage model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub cutoff: f64,
    pub classifier: TreeConfig,
    pub regressor: TreeConfig,
    /// Neighbourhood size for SMOTE-NC class balancing; None fits the
    /// classifier on the raw class distribution.
    pub smote_k: Option<usize>,
    /// When set, fitting fails unless every balance class has at least this
    /// many rows. None permits degenerate fits (a missing band predicts 0).
    pub min_rows_per_class: Option<usize>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            cutoff: DEFAULT_BALANCE_CUTOFF,
            classifier: TreeConfig::default(),
            regressor: TreeConfig::default(),
            smote_k: Some(5),
            min_rows_per_class: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.cutoff.is_finite() || self.cutoff <= 0.0 {
            return Err(Error::InvalidConfig("cutoff must be positive".to_string()));
        }
        if self.smote_k == Some(0) {
            return Err(Error::InvalidConfig("smote_k must be at least 1".to_string()));
        }
        self.classifier.validate()?;
        self.regressor.validate()
    }
}

/// The fitted two-stage balance model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoStageModel {
    pub cutoff: f64,
    classifier: TreeClassifier,
    low: Option<TreeRegressor>,
    high: Option<TreeRegressor>,
}

// Positions of the categorical features (mp_r and ha_p) inside the model
// feature vector; the rest are treated as continuous by SMOTE-NC.
const CATEGORICAL_FEATURES: [usize; 2] = [9, 16];

fn to_smote_row(features: &[f64; N_FEATURES], label: usize) -> SmoteRow {
    let mut continuous = Vec::with_capacity(N_FEATURES - CATEGORICAL_FEATURES.len());
    let mut categorical = Vec::with_capacity(CATEGORICAL_FEATURES.len());
    for (j, &v) in features.iter().enumerate() {
        if CATEGORICAL_FEATURES.contains(&j) {
            categorical.push(v.round() as u32);
        } else {
            continuous.push(v);
        }
    }
    SmoteRow {
        continuous,
        categorical,
        label,
    }
}

fn from_smote_row(row: &SmoteRow) -> Vec<f64> {
    let mut out = Vec::with_capacity(N_FEATURES);
    let mut cont = row.continuous.iter();
    let mut cat = row.categorical.iter();
    for j in 0..N_FEATURES {
        if CATEGORICAL_FEATURES.contains(&j) {
            out.push(*cat.next().expect("categorical arity") as f64);
        } else {
            out.push(*cont.next().expect("continuous arity"));
        }
    }
    out
}

/// Fits the classifier (optionally on SMOTE-balanced data) and one regressor
/// per non-zero band. Regressors always fit on original rows only.
pub fn fit_two_stage(rows: &[TrainingRow], cfg: &FitConfig) -> Result<TwoStageModel> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels: Vec<usize> = rows
        .iter()
        .map(|r| classify_balance(r.target_rbar, cfg.cutoff).index())
        .collect();
    if let Some(floor) = cfg.min_rows_per_class {
        for class in 0..BalanceClass::COUNT {
            let count = labels.iter().filter(|&&l| l == class).count();
            if count < floor {
                return Err(Error::InsufficientClassRows {
                    class,
                    rows: count,
                    floor,
                });
            }
        }
    }

    let (class_x, class_y): (Vec<Vec<f64>>, Vec<usize>) = match cfg.smote_k {
        None => (
            rows.iter().map(|r| r.features.to_vec()).collect(),
            labels.clone(),
        ),
        Some(k) => {
            let smote_rows: Vec<SmoteRow> = rows
                .iter()
                .zip(&labels)
                .map(|(r, &l)| to_smote_row(&r.features, l))
                .collect();
            let largest = (0..BalanceClass::COUNT)
                .map(|c| labels.iter().filter(|&&l| l == c).count())
                .max()
                .expect("three classes");
            // Only present classes are balanced up; an absent band stays
            // absent rather than being invented from nothing.
            let targets: BTreeMap<usize, usize> = (0..BalanceClass::COUNT)
                .filter(|c| labels.contains(c))
                .map(|c| (c, largest))
                .collect();
            let balanced = smote_nc(&smote_rows, k, &targets, seeds::derive(cfg.seed, seeds::STREAM_SMOTE, 0))?;
            (
                balanced.iter().map(from_smote_row).collect(),
                balanced.iter().map(|r| r.label).collect(),
            )
        }
    };
    let classifier = TreeClassifier::fit(&class_x, &class_y, BalanceClass::COUNT, &cfg.classifier)?;

    let fit_band = |class: usize| -> Result<Option<TreeRegressor>> {
        let x: Vec<Vec<f64>> = rows
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r.features.to_vec())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r.target_rbar)
            .collect();
        if x.is_empty() {
            return Ok(None);
        }
        Ok(Some(TreeRegressor::fit(&x, &y, &cfg.regressor)?))
    };
    let low = fit_band(BalanceClass::Low.index())?;
    let high = fit_band(BalanceClass::High.index())?;

    Ok(TwoStageModel {
        cutoff: cfg.cutoff,
        classifier,
        low,
        high,
    })
}

impl TwoStageModel {
    pub fn predict_class(&self, features: &[f64]) -> usize {
        self.classifier.predict(features)
    }

    /// Predicted post-decision average balance for a feature vector.
    pub fn predict_rbar(&self, features: &[f64]) -> f64 {
        let band = match self.classifier.predict(features) {
            0 => &self.low,
            1 => &self.high,
            _ => return 0.0,
        };
        band.as_ref().map_or(0.0, |t| t.predict(features).max(0.0))
    }
}

impl BalancePredictor for TwoStageModel {
    fn rbar(&self, rec: &CustomerRecord, action: Action, beta: f64) -> f64 {
        self.predict_rbar(&feature_vector(rec, action, beta))
    }
}

const MODEL_FORMAT: &str = "uplimit-balance-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TwoStageModel,
}

pub fn save_model(path: &Path, model: &TwoStageModel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let envelope = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(BufWriter::new(file), &envelope)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TwoStageModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let envelope: ModelFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(path, e.to_string()))?;
    if envelope.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "expected format {MODEL_FORMAT:?}, found {:?}",
            envelope.format
        )));
    }
    if envelope.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (this build reads {MODEL_VERSION})",
            envelope.version
        )));
    }
    if envelope.model.classifier.n_classes != BalanceClass::COUNT {
        return Err(Error::MismatchedContext(format!(
            "model predicts {} classes, expected {}",
            envelope.model.classifier.n_classes,
            BalanceClass::COUNT
        )));
    }
    Ok(envelope.model)
}

/// End-to-end holdout metrics: band F1 on the classifier and error on the
/// final balance prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorMetrics {
    pub weighted_f1: f64,
    pub rmse: f64,
    pub wape: f64,
}

pub fn evaluate(model: &TwoStageModel, rows: &[TrainingRow]) -> Result<PredictorMetrics> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let truth_class: Vec<usize> = rows
        .iter()
        .map(|r| classify_balance(r.target_rbar, model.cutoff).index())
        .collect();
    let pred_class: Vec<usize> = rows.iter().map(|r| model.predict_class(&r.features)).collect();
    let truth: Vec<f64> = rows.iter().map(|r| r.target_rbar).collect();
    let pred: Vec<f64> = rows.iter().map(|r| model.predict_rbar(&r.features)).collect();
    Ok(PredictorMetrics {
        weighted_f1: weighted_f1(&truth_class, &pred_class, BalanceClass::COUNT)?,
        rmse: rmse(&truth, &pred)?,
        wape: wape(&truth, &pred)?,
    })
}

/// Splits `0..n` into (train, holdout) index sets by a seeded shuffle.
/// The holdout takes `round(n * fraction)` rows, at least 1, at most n - 1.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "need at least 2 rows to split".to_string(),
        ));
    }
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::InvalidConfig(
            "holdout fraction must be in (0, 1)".to_string(),
        ));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seeds::derive(
        seed,
        seeds::STREAM_HOLDOUT,
        0,
    ));
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let holdout = indices.split_off(n - k);
    Ok((indices, holdout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio;
    use tempfile::tempdir;

    fn mk_row(id: u32, bureau: f64, rbar: f64) -> TrainingRow {
        let mut rec = portfolio::record(&format!("C{id}"));
        rec.bureau_score = bureau;
        // Spread a second feature so tree splits have material to work with.
        rec.limit = 500.0 + (id % 7) as f64 * 50.0;
        TrainingRow {
            customer_id: rec.customer_id.clone(),
            features: feature_vector(&rec, Action::Maintain, 0.5),
            target_rbar: rbar,
        }
    }

    /// Bureau score under 600 implies a high balance near 200, 600 to 700 a
    /// low balance near 40, above 700 zero.
    fn banded_rows(n: u32) -> Vec<TrainingRow> {
        (0..n)
            .map(|i| {
                let bureau = 500.0 + (i % 30) as f64 * 10.0;
                let rbar = if bureau < 600.0 {
                    200.0 + (i % 5) as f64
                } else if bureau < 700.0 {
                    40.0 + (i % 5) as f64
                } else {
                    0.0
                };
                mk_row(i, bureau, rbar)
            })
            .collect()
    }

    #[test]
    fn classify_balance_boundaries() {
        let c = DEFAULT_BALANCE_CUTOFF;
        assert_eq!(classify_balance(0.0, c), BalanceClass::Zero);
        assert_eq!(classify_balance(1e-9, c), BalanceClass::Low);
        assert_eq!(classify_balance(c, c), BalanceClass::Low);
        assert_eq!(classify_balance(c + 1e-9, c), BalanceClass::High);
    }

    #[test]
    fn feature_vector_encodes_the_action() {
        let rec = portfolio::record("A");
        let maintain = feature_vector(&rec, Action::Maintain, 0.5);
        let increase = feature_vector(&rec, Action::Increase, 0.5);
        assert_eq!(maintain[..15], increase[..15]);
        assert_eq!(maintain[15], rec.limit);
        assert_eq!(maintain[16], 0.0);
        assert_eq!(increase[15], rec.limit * 1.5);
        assert_eq!(increase[16], 1.0);
    }

    #[test]
    fn two_stage_recovers_banded_data() {
        let rows = banded_rows(300);
        let cfg = FitConfig {
            smote_k: None,
            classifier: TreeConfig {
                min_samples_leaf: 2,
                ..TreeConfig::default()
            },
            regressor: TreeConfig {
                min_samples_leaf: 2,
                ..TreeConfig::default()
            },
            ..FitConfig::default()
        };
        let model = fit_two_stage(&rows, &cfg).unwrap();
        let metrics = evaluate(&model, &rows).unwrap();
        assert!(metrics.weighted_f1 > 0.99, "f1 = {}", metrics.weighted_f1);
        assert!(metrics.wape < 0.05, "wape = {}", metrics.wape);
        for row in &rows {
            let zero_truth = row.target_rbar == 0.0;
            let pred = model.predict_rbar(&row.features);
            assert_eq!(pred == 0.0, zero_truth, "bureau {}", row.features[13]);
        }
    }

    #[test]
    fn smote_balancing_keeps_the_model_usable() {
        // 6 high rows against 120 low and 120 zero rows.
        let mut rows = Vec::new();
        for i in 0..120 {
            rows.push(mk_row(i, 650.0 + (i % 10) as f64, 30.0 + (i % 3) as f64));
            rows.push(mk_row(1000 + i, 750.0 + (i % 10) as f64, 0.0));
        }
        for i in 0..6 {
            rows.push(mk_row(3000 + i, 520.0 + i as f64 * 2.0, 220.0));
        }
        let cfg = FitConfig {
            smote_k: Some(3),
            ..FitConfig::default()
        };
        let model = fit_two_stage(&rows, &cfg).unwrap();
        let metrics = evaluate(&model, &rows).unwrap();
        assert!(metrics.weighted_f1 > 0.95, "f1 = {}", metrics.weighted_f1);
    }

    #[test]
    fn class_floor_is_enforced() {
        let rows = banded_rows(300);
        let cfg = FitConfig {
            min_rows_per_class: Some(200),
            smote_k: None,
            ..FitConfig::default()
        };
        let err = fit_two_stage(&rows, &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientClassRows { .. }));
    }

    #[test]
    fn degenerate_all_zero_fit_predicts_zero() {
        let rows: Vec<TrainingRow> = (0..20).map(|i| mk_row(i, 700.0, 0.0)).collect();
        let cfg = FitConfig {
            smote_k: None,
            ..FitConfig::default()
        };
        let model = fit_two_stage(&rows, &cfg).unwrap();
        for row in &rows {
            assert_eq!(model.predict_rbar(&row.features), 0.0);
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let rows = banded_rows(120);
        let cfg = FitConfig {
            smote_k: None,
            ..FitConfig::default()
        };
        let model = fit_two_stage(&rows, &cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        for row in &rows {
            assert_eq!(
                model.predict_rbar(&row.features),
                loaded.predict_rbar(&row.features)
            );
        }
    }

    #[test]
    fn foreign_json_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, r#"{"format":"something-else","version":1,"model":null}"#).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn training_csv_round_trips() {
        let rows = banded_rows(10);
        let dir = tempdir().unwrap();
        let path = dir.path().join("training.csv");
        write_training_csv(&path, &rows).unwrap();
        let loaded = load_training_csv(&path).unwrap();
        assert_eq!(loaded, rows);
    }

    #[test]
    fn training_csv_rejects_bad_action_flag() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("training.csv");
        let mut rows = banded_rows(3);
        rows[1].features[16] = 0.5;
        write_training_csv(&path, &rows).unwrap();
        let err = load_training_csv(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidRecord {
                row: 2,
                field: "ha_p",
                ..
            }
        ));
    }

    #[test]
    fn holdout_split_partitions_deterministically() {
        let (train, test) = holdout_split(100, 0.2, 11).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let (train2, test2) = holdout_split(100, 0.2, 11).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(holdout_split(100, 0.0, 1).is_err());
        assert!(holdout_split(100, 1.0, 1).is_err());
        assert!(holdout_split(1, 0.5, 1).is_err());
    }
}
