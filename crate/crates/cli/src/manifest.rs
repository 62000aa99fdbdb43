//! The run manifest: one JSON array per output directory, appended to by
//! every stage, recording what ran, when, under which resolved
//! configuration, and which files it read and wrote. Re-running a stage
//! with the `config` map of its manifest entry regenerates its artifacts
//! bit-identically; the timestamp is the only field that varies between
//! such runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    /// Version of this tool, so an artifact names the code that made it.
    pub version: String,
    pub unix_time_secs: u64,
    pub seed: u64,
    /// Parallelism cap the stage ran under. Informational: artifact bytes
    /// do not depend on it.
    pub jobs: Option<usize>,
    /// FNV-1a hash (hex) of the resolved `config` map.
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    /// Upstream artifacts read, by file name within the output directory.
    pub inputs: Vec<String>,
    /// Artifacts written, by file name within the output directory.
    pub artifacts: Vec<String>,
}

pub fn entry(
    stage: &str,
    config: BTreeMap<String, String>,
    seed: u64,
    jobs: Option<usize>,
    inputs: &[&str],
    artifacts: &[&str],
) -> ManifestEntry {
    ManifestEntry {
        stage: stage.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        unix_time_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed,
        jobs,
        config_hash: format!("{:016x}", config_hash(&config)),
        config,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    }
}

/// FNV-1a over the sorted `key=value` lines.
pub fn config_hash(config: &BTreeMap<String, String>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (k, v) in config {
        for byte in k.bytes().chain(*b"=").chain(v.bytes()).chain(*b"\n") {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn append(out: &Path, entry: ManifestEntry) -> Result<()> {
    let path = out.join(MANIFEST_FILE);
    let mut entries: Vec<ManifestEntry> = if path.exists() {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        Vec::new()
    };
    entries.push(entry);
    let json = serde_json::to_string_pretty(&entries).context("serializing manifest")?;
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read(out: &Path) -> Result<Vec<ManifestEntry>> {
    let path = out.join(MANIFEST_FILE);
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn hash_depends_on_values_not_insertion_order() {
        let a = map(&[("alpha", "0.1"), ("seed", "7")]);
        let b = map(&[("seed", "7"), ("alpha", "0.1")]);
        let c = map(&[("alpha", "0.2"), ("seed", "7")]);
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn append_accumulates_entries() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = map(&[("seed", "1")]);
        append(dir.path(), entry("simulate-data", cfg.clone(), 1, None, &[], &["portfolio.csv"])).unwrap();
        append(dir.path(), entry("train", cfg, 1, Some(4), &["portfolio.csv"], &["agent.json"])).unwrap();
        let entries = read(dir.path()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].stage, "simulate-data");
        assert_eq!(entries[1].jobs, Some(4));
        assert_eq!(entries[1].inputs, vec!["portfolio.csv"]);
    }
}
