//! Expected-loss provisioning: exposure at default, provisions, and credit
//! conversion factors estimated from defaulter histories.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Denominators at or below this threshold make an individual CCF
/// observation unusable.
pub const CCF_DENOMINATOR_EPSILON: f64 = 1e-9;

/// Exposure at default: the drawn balance plus the CCF share of the
/// remaining headroom, `ob + ccf * max(0, limit - ob)`.
///
/// The clamp keeps over-limit balances (ob > limit) from producing negative
/// undrawn exposure.
pub fn compute_ead(ob: f64, limit: f64, ccf: f64) -> f64 {
    ob + ccf * (limit - ob).max(0.0)
}

/// Expected-loss provision, `pd * lgd * ead`.
pub fn compute_provision(pd: f64, lgd: f64, ob: f64, limit: f64, ccf: f64) -> f64 {
    pd * lgd * compute_ead(ob, limit, ccf)
}

/// Balances of one defaulted account at the reference date and at default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaulterObservation {
    /// Outstanding balance when default was declared, USD.
    pub ob_at_default: f64,
    /// Outstanding balance at the start of the observation period, USD.
    pub ob_at_period_start: f64,
    /// Credit limit at the start of the observation period, USD.
    pub limit: f64,
}

/// Credit conversion factor of a single defaulter: the share of the initially
/// undrawn limit that was drawn by the time of default, clamped to [0, 1].
///
/// Returns `None` when the initial headroom `limit - ob_at_period_start` is
/// at or below [`CCF_DENOMINATOR_EPSILON`]; such observations carry no
/// information about undrawn exposure and are skipped.
pub fn individual_ccf(obs: &DefaulterObservation) -> Option<f64> {
    let headroom = obs.limit - obs.ob_at_period_start;
    if headroom <= CCF_DENOMINATOR_EPSILON {
        return None;
    }
    let raw = (obs.ob_at_default - obs.ob_at_period_start) / headroom;
    Some(raw.clamp(0.0, 1.0))
}

/// Portfolio CCF: the mean of the usable individual CCFs.
///
/// Errors with [`Error::NoUsableDefaulters`] when every observation is
/// skipped (or the slice is empty).
pub fn portfolio_ccf(observations: &[DefaulterObservation]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for obs in observations {
        if let Some(ccf) = individual_ccf(obs) {
            sum += ccf;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoUsableDefaulters);
    }
    Ok(sum / count as f64)
}

/// Column order of the defaulters CSV.
pub const DEFAULTERS_HEADER: [&str; 4] =
    ["customer_id", "ob_at_default", "ob_at_period_start", "limit"];

/// Loads defaulter observations from CSV. The `customer_id` column is kept
/// only for diagnostics and does not appear in the returned observations.
pub fn load_defaulters_csv(path: impl AsRef<Path>) -> Result<Vec<DefaulterObservation>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => return Err(Error::format(path, format!("unreadable header: {e}"))),
        None => return Err(Error::format(path, "missing header")),
    };
    if header.len() != DEFAULTERS_HEADER.len()
        || header.iter().zip(DEFAULTERS_HEADER).any(|(got, want)| got != want)
    {
        return Err(Error::format(
            path,
            format!(
                "bad header: expected `{}`, got `{}`",
                DEFAULTERS_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::format(path, format!("data row {row}: {e}")))?;
        if rec.len() != DEFAULTERS_HEADER.len() {
            return Err(Error::format(
                path,
                format!("data row {row}: expected 4 fields, got {}", rec.len()),
            ));
        }
        let parse = |idx: usize, field: &'static str| -> Result<f64> {
            rec[idx].trim().parse().map_err(|_| Error::InvalidRecord {
                row,
                field,
                message: format!("not a number: `{}`", &rec[idx]),
            })
        };
        let obs = DefaulterObservation {
            ob_at_default: parse(1, "ob_at_default")?,
            ob_at_period_start: parse(2, "ob_at_period_start")?,
            limit: parse(3, "limit")?,
        };
        for (field, v) in [
            ("ob_at_default", obs.ob_at_default),
            ("ob_at_period_start", obs.ob_at_period_start),
            ("limit", obs.limit),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidRecord {
                    row,
                    field,
                    message: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        out.push(obs);
    }
    Ok(out)
}

/// Writes defaulter observations with their ids in the standard column order.
pub fn write_defaulters_csv(
    path: impl AsRef<Path>,
    rows: &[(String, DefaulterObservation)],
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(DEFAULTERS_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for (id, obs) in rows {
        writer
            .write_record([
                id.as_str(),
                &obs.ob_at_default.to_string(),
                &obs.ob_at_period_start.to_string(),
                &obs.limit.to_string(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ead_hand_values() {
        assert_eq!(compute_ead(100.0, 500.0, 0.2), 180.0);
        // Over-limit balance: undrawn part clamps to zero.
        assert_eq!(compute_ead(600.0, 500.0, 0.2), 600.0);
        assert_eq!(compute_ead(0.0, 500.0, 0.0), 0.0);
        assert_eq!(compute_ead(0.0, 500.0, 1.0), 500.0);
    }

    #[test]
    fn provision_hand_values() {
        assert_eq!(compute_provision(0.1, 0.5, 100.0, 500.0, 0.2), 9.0);
        assert_eq!(compute_provision(0.0, 0.5, 100.0, 500.0, 0.2), 0.0);
        assert_eq!(compute_provision(1.0, 1.0, 500.0, 500.0, 0.2), 500.0);
    }

    #[test]
    fn individual_ccf_hand_values() {
        let obs = DefaulterObservation {
            ob_at_default: 150.0,
            ob_at_period_start: 100.0,
            limit: 200.0,
        };
        assert_eq!(individual_ccf(&obs), Some(0.5));

        // Paid down before defaulting: clamps to 0.
        let paid_down = DefaulterObservation {
            ob_at_default: 50.0,
            ..obs
        };
        assert_eq!(individual_ccf(&paid_down), Some(0.0));

        // Beyond the limit at default: clamps to 1.
        let blown = DefaulterObservation {
            ob_at_default: 400.0,
            ..obs
        };
        assert_eq!(individual_ccf(&blown), Some(1.0));

        // Fully drawn at period start: unusable.
        let full = DefaulterObservation {
            ob_at_default: 210.0,
            ob_at_period_start: 200.0,
            limit: 200.0,
        };
        assert_eq!(individual_ccf(&full), None);
    }

    #[test]
    fn portfolio_ccf_averages_usable_observations() {
        let mk = |ccf: f64| DefaulterObservation {
            ob_at_default: ccf * 100.0,
            ob_at_period_start: 0.0,
            limit: 100.0,
        };
        let obs = vec![mk(0.2), mk(0.4), mk(0.6)];
        assert!((portfolio_ccf(&obs).unwrap() - 0.4).abs() < 1e-12);

        // Skipped observations do not dilute the mean.
        let with_skip = vec![
            mk(0.2),
            mk(0.4),
            mk(0.6),
            DefaulterObservation {
                ob_at_default: 120.0,
                ob_at_period_start: 100.0,
                limit: 100.0,
            },
        ];
        assert!((portfolio_ccf(&with_skip).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn portfolio_ccf_requires_usable_observations() {
        assert!(matches!(portfolio_ccf(&[]), Err(Error::NoUsableDefaulters)));
        let all_full = vec![DefaulterObservation {
            ob_at_default: 100.0,
            ob_at_period_start: 100.0,
            limit: 100.0,
        }];
        assert!(matches!(
            portfolio_ccf(&all_full),
            Err(Error::NoUsableDefaulters)
        ));
    }

    #[test]
    fn defaulters_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(
            &path,
            "customer_id,ob_at_default,ob_at_period_start,limit\nD1,150,100,200\nD2,90,10,100\n",
        )
        .unwrap();
        let obs = load_defaulters_csv(&path).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].ob_at_default, 150.0);
        assert!((portfolio_ccf(&obs).unwrap() - (0.5 + 80.0 / 90.0) / 2.0).abs() < 1e-12);
    }

    proptest! {
        // EAD is monotone in each argument over valid ranges.
        #[test]
        fn ead_monotonicity(
            ob in 0.0..2000.0f64,
            limit in 1.0..5000.0f64,
            ccf in 0.0..=1.0f64,
            bump in 0.0..500.0f64,
        ) {
            let base = compute_ead(ob, limit, ccf);
            prop_assert!(compute_ead(ob + bump, limit, ccf) + 1e-9 >= base);
            prop_assert!(compute_ead(ob, limit + bump, ccf) + 1e-9 >= base);
            let ccf2 = (ccf + bump / 500.0).min(1.0);
            prop_assert!(compute_ead(ob, limit, ccf2) + 1e-9 >= base);
        }

        // Provision composes pd * lgd with the EAD term.
        #[test]
        fn provision_composition(
            pd in 0.0..=1.0f64,
            lgd in 0.0..=1.0f64,
            ob in 0.0..2000.0f64,
            limit in 1.0..5000.0f64,
            ccf in 0.0..=1.0f64,
        ) {
            let lhs = compute_provision(pd, lgd, ob, limit, ccf);
            let rhs = pd * lgd * compute_ead(ob, limit, ccf);
            prop_assert_eq!(lhs, rhs);
            prop_assert!(lhs >= 0.0);
        }

        // Individual CCFs are always in [0, 1] when usable.
        #[test]
        fn individual_ccf_is_clamped(
            ob_d in 0.0..5000.0f64,
            ob_r in 0.0..5000.0f64,
            limit in 0.0..5000.0f64,
        ) {
            let obs = DefaulterObservation {
                ob_at_default: ob_d,
                ob_at_period_start: ob_r,
                limit,
            };
            if let Some(ccf) = individual_ccf(&obs) {
                prop_assert!((0.0..=1.0).contains(&ccf));
            } else {
                prop_assert!(limit - ob_r <= CCF_DENOMINATOR_EPSILON);
            }
        }
    }
}
