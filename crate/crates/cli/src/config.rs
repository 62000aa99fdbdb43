//! Flat key = value configuration with three layers: built-in defaults, an
//! optional config file, and command-line flags, later layers winning.
//!
//! Every key is registered in [`KEYS`] with its default, so the resolved
//! configuration is always total: stages read what they need and the run
//! manifest records the whole map plus a hash of it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use anyhow::{bail, Context, Result};
use uplimit_core::agents::{Algo, QTableSource};
use uplimit_core::portfolio::PortfolioParams;
use uplimit_core::synth::SynthPreset;

/// Key registry: name, default, one-line description (printed by
/// `--help-config` style docs in the README and used nowhere else).
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed every stage derives its streams from"),
    // synthetic data
    ("n_customers", "2000", "portfolio size for simulate-data"),
    ("n_defaulters", "200", "defaulter observations for simulate-data"),
    ("preset", "default", "archetype mix: default | imbalance"),
    ("noise", "0", "std dev (USD) of the balance response noise"),
    ("historical_increase_rate", "0.3", "share of historical increase decisions"),
    // portfolio-level parameters
    ("lgd", "0.75", "loss given default, in (0, 1]"),
    ("beta", "0.5", "relative limit increase"),
    ("ccf", "0.4", "credit conversion factor, or `estimate` to fit it from defaulters.csv"),
    // balance predictor
    ("cutoff", "75.81", "USD boundary between the low and high balance bands"),
    ("smote_k", "5", "SMOTE-NC neighbourhood size, or `none` to skip oversampling"),
    ("min_rows_per_class", "none", "refuse to fit when a band has fewer rows, or `none`"),
    ("max_depth", "12", "decision tree depth cap"),
    ("min_samples_leaf", "5", "minimum rows per tree leaf"),
    ("n_trees", "1", "trees per forest; 1 disables bootstrap resampling"),
    ("holdout_fraction", "0.2", "held-out share used only to report predictor metrics"),
    // agent
    ("algo", "double_q", "learner: q | double_q"),
    ("alpha", "0.01", "learning rate in (0, 1]"),
    ("gamma", "1", "discount factor in [0, 1]"),
    ("epsilon", "0.1", "exploration probability in [0, 1]"),
    ("episodes", "500", "training episodes"),
    ("runs", "1", "independent training runs stored in agent.json"),
    // state discretization
    ("interest_min", "0.0", "lower end of the annual interest range the grid covers"),
    ("interest_max", "0.6", "upper end of the annual interest range the grid covers"),
    // grid search
    ("grid_alphas", "1e-6,1e-5,1e-4,1e-3,1e-2,1e-1", "comma-separated learning rates"),
    ("grid_epsilons", "0.05,0.1,0.15", "comma-separated exploration rates"),
    ("grid_episodes", "500", "training episodes per grid cell"),
    ("grid_runs", "1", "runs per grid cell"),
    // evaluation
    ("eval_episodes", "100", "episodes per policy in compare"),
    ("random_p", "0.5", "increase probability of the random baseline"),
    ("propensity_threshold", "0.5", "current-policy cut on the propensity score"),
    ("bureau_quantiles", "0.85,0.95", "comma-separated bureau-score percentile baselines"),
    ("table", "q1", "Q-table the greedy policy reads: q1 | q2 | mean"),
    ("run", "0", "stored training run that export-curves reads"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, d, _)| (*k, d.to_string())).collect(),
        }
    }
}

fn known(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(k, _, _)| *k)
}

impl RunConfig {
    /// Layers a config file over the defaults. Lines are `key = value`;
    /// blank lines and `#` comments are ignored; unknown keys are errors so
    /// typos cannot silently fall back to defaults.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                );
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(key) = known(key) else {
                bail!("{}:{}: unknown config key `{key}`", path.display(), lineno + 1);
            };
            if value.is_empty() {
                bail!("{}:{}: key `{key}` has no value", path.display(), lineno + 1);
            }
            self.values.insert(key, value.to_string());
        }
        Ok(())
    }

    /// Applies one command-line override; `None` flags leave the layer below
    /// in place.
    pub fn set_flag<T: Display>(&mut self, key: &'static str, flag: &Option<T>) {
        debug_assert!(known(key).is_some(), "unregistered config key `{key}`");
        if let Some(v) = flag {
            self.values.insert(key, v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("unregistered config key `{key}`"))
    }

    /// The full resolved map, for the run manifest.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key `{key}`: `{}` is not a number", self.raw(key)))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key `{key}`: `{}` is not an integer", self.raw(key)))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key `{key}`: `{}` is not an integer", self.raw(key)))
    }

    pub fn u32(&self, key: &str) -> Result<u32> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key `{key}`: `{}` is not an integer", self.raw(key)))
    }

    /// Integer keys that accept `none`.
    pub fn optional_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key) {
            "none" => Ok(None),
            other => other
                .parse()
                .map(Some)
                .with_context(|| format!("config key `{key}`: `{other}` is not an integer or `none`")),
        }
    }

    pub fn list_f64(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key);
        let out: Vec<f64> = raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("config key `{key}`: `{raw}` is not a comma-separated number list"))?;
        if out.is_empty() {
            bail!("config key `{key}` must list at least one value");
        }
        Ok(out)
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn preset(&self) -> Result<SynthPreset> {
        Ok(SynthPreset::parse(self.raw("preset"))?)
    }

    pub fn algo(&self) -> Result<Algo> {
        Ok(Algo::parse(self.raw("algo"))?)
    }

    pub fn table(&self) -> Result<QTableSource> {
        Ok(QTableSource::parse(self.raw("table"))?)
    }

    /// The ccf key: a number, or `estimate` to fit from defaulters.csv.
    pub fn ccf(&self) -> Result<CcfSetting> {
        match self.raw("ccf") {
            "estimate" => Ok(CcfSetting::Estimate),
            other => other.parse().map(CcfSetting::Fixed).with_context(|| {
                format!("config key `ccf`: `{other}` is not a number or `estimate`")
            }),
        }
    }

    /// Portfolio parameters with the ccf already resolved to a number.
    pub fn params_with_ccf(&self, ccf: f64) -> Result<PortfolioParams> {
        let params = PortfolioParams {
            lgd: self.f64("lgd")?,
            beta: self.f64("beta")?,
            ccf,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CcfSetting {
    Fixed(f64),
    Estimate,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_cover_every_key() {
        let cfg = RunConfig::default();
        for (key, default, _) in KEYS {
            assert_eq!(cfg.raw(key), *default);
        }
    }

    #[test]
    fn file_overrides_defaults_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");

        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\nalpha = 0.2  # trailing comment\n\nepisodes=42").unwrap();
        drop(f);
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.f64("alpha").unwrap(), 0.2);
        assert_eq!(cfg.usize("episodes").unwrap(), 42);
        assert_eq!(cfg.raw("gamma"), "1");

        std::fs::write(&path, "alhpa = 0.2\n").unwrap();
        let err = RunConfig::default().load_file(&path).unwrap_err();
        assert!(err.to_string().contains("alhpa"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg = RunConfig::default();
        cfg.values.insert("alpha", "0.2".to_string());
        cfg.set_flag("alpha", &Some(0.05));
        cfg.set_flag("epsilon", &None::<f64>);
        assert_eq!(cfg.f64("alpha").unwrap(), 0.05);
        assert_eq!(cfg.f64("epsilon").unwrap(), 0.1);
    }

    #[test]
    fn ccf_parses_number_or_estimate() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.ccf().unwrap(), CcfSetting::Fixed(0.4));
        cfg.values.insert("ccf", "estimate".to_string());
        assert_eq!(cfg.ccf().unwrap(), CcfSetting::Estimate);
        cfg.values.insert("ccf", "maybe".to_string());
        assert!(cfg.ccf().is_err());
    }

    #[test]
    fn optional_keys_accept_none() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.optional_usize("min_rows_per_class").unwrap(), None);
        cfg.values.insert("min_rows_per_class", "8".to_string());
        assert_eq!(cfg.optional_usize("min_rows_per_class").unwrap(), Some(8));
    }
}
