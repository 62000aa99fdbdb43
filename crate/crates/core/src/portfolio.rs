//! Customer records, derived rate features, and portfolio CSV I/O.
//!
//! A portfolio is a flat list of per-customer records observed over a
//! three-month retrospective window, plus the economic parameters (LGD,
//! limit-increase factor, CCF) shared by every provisioning computation on
//! that portfolio.

use std::collections::hash_map::DefaultHasher;
use std::fs::File;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::error::{Error, Result};

/// Column order of the portfolio CSV.
pub const PORTFOLIO_HEADER: [&str; 16] = [
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
];

/// One customer as observed over the retrospective window.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRecord {
    pub customer_id: String,
    /// Total monthly spending, USD.
    pub tc: [f64; 3],
    /// Outstanding balance at each monthly cut-off, USD.
    pub ob: [f64; 3],
    /// Payment made at each monthly payment date, USD.
    pub pay: [f64; 3],
    /// Missed payments during the window.
    pub mp_r: u32,
    /// Current credit limit, USD. Strictly positive.
    pub limit: f64,
    /// Annual interest rate as a fraction.
    pub int_annual: f64,
    /// Probability of default, in [0, 1].
    pub pd: f64,
    /// External bureau score.
    pub bureau_score: f64,
    pub months_on_book: u32,
}

impl CustomerRecord {
    /// Checks the record invariants, returning the offending field on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err((name, format!("must be finite, got {v}")))
            }
        };
        let nonneg = |name: &'static str, v: f64| {
            finite(name, v)?;
            if v < 0.0 {
                Err((name, format!("must be non-negative, got {v}")))
            } else {
                Ok(())
            }
        };
        for (i, &v) in self.tc.iter().enumerate() {
            nonneg(["tc_1", "tc_2", "tc_3"][i], v)?;
        }
        for (i, &v) in self.ob.iter().enumerate() {
            nonneg(["ob_1", "ob_2", "ob_3"][i], v)?;
        }
        for (i, &v) in self.pay.iter().enumerate() {
            nonneg(["pay_1", "pay_2", "pay_3"][i], v)?;
        }
        finite("limit", self.limit)?;
        if self.limit <= 0.0 {
            return Err(("limit", format!("must be positive, got {}", self.limit)));
        }
        nonneg("int_annual", self.int_annual)?;
        finite("pd", self.pd)?;
        if !(0.0..=1.0).contains(&self.pd) {
            return Err(("pd", format!("must lie in [0, 1], got {}", self.pd)));
        }
        finite("bureau_score", self.bureau_score)?;
        Ok(())
    }

    /// Whether the record may enter a training or evaluation episode.
    ///
    /// Eligibility requires at least one full retrospective window on book.
    /// The schema carries no point-in-time arrears column; records are
    /// assumed current at the decision date.
    pub fn is_episode_eligible(&self) -> bool {
        self.months_on_book >= 3
    }
}

/// Rates and terms derived from a record, the continuous state variables of
/// the decision process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinancialFeatures {
    /// Mean utilization rate, mean_i(ob_i / limit).
    pub ur_avg: f64,
    /// Mean payment rate, mean_i(pay_i / ob_i), where a month with ob_i = 0
    /// contributes 1.
    pub pr_avg: f64,
    /// Mean spending rate, mean_i(tc_i / limit).
    pub cr_avg: f64,
    /// Missed payments during the window.
    pub mp: u32,
    /// Current credit limit, USD.
    pub limit: f64,
    /// Monthly interest rate, int_annual / 12.
    pub int_monthly: f64,
}

/// Economic parameters shared across a portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioParams {
    /// Loss given default, in [0, 1].
    pub lgd: f64,
    /// Relative limit increase granted by the increase action.
    pub beta: f64,
    /// Credit conversion factor, in [0, 1].
    pub ccf: f64,
}

impl PortfolioParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lgd) || !self.lgd.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lgd must lie in [0, 1], got {}",
                self.lgd
            )));
        }
        if !(0.0..=1.0).contains(&self.ccf) || !self.ccf.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ccf must lie in [0, 1], got {}",
                self.ccf
            )));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

impl Default for PortfolioParams {
    fn default() -> Self {
        PortfolioParams {
            lgd: 0.75,
            beta: 0.5,
            ccf: 0.4,
        }
    }
}

/// A set of customer records plus shared economic parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub customers: Vec<CustomerRecord>,
    pub params: PortfolioParams,
}

impl Portfolio {
    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    /// Stable fingerprint of the customer set and parameters, used to reject
    /// cross-portfolio comparisons of evaluation results.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.customers.len().hash(&mut h);
        self.params.lgd.to_bits().hash(&mut h);
        self.params.beta.to_bits().hash(&mut h);
        self.params.ccf.to_bits().hash(&mut h);
        for rec in &self.customers {
            rec.customer_id.hash(&mut h);
            for v in rec.tc.iter().chain(&rec.ob).chain(&rec.pay) {
                v.to_bits().hash(&mut h);
            }
            rec.mp_r.hash(&mut h);
            rec.limit.to_bits().hash(&mut h);
            rec.int_annual.to_bits().hash(&mut h);
            rec.pd.to_bits().hash(&mut h);
            rec.bureau_score.to_bits().hash(&mut h);
            rec.months_on_book.hash(&mut h);
        }
        h.finish()
    }
}

/// Derives the rate features of a record.
pub fn derive_features(rec: &CustomerRecord) -> FinancialFeatures {
    let mean3 = |v: [f64; 3]| (v[0] + v[1] + v[2]) / 3.0;
    let ur = [
        rec.ob[0] / rec.limit,
        rec.ob[1] / rec.limit,
        rec.ob[2] / rec.limit,
    ];
    let pr: [f64; 3] = std::array::from_fn(|i| {
        if rec.ob[i] == 0.0 {
            1.0
        } else {
            rec.pay[i] / rec.ob[i]
        }
    });
    let cr = [
        rec.tc[0] / rec.limit,
        rec.tc[1] / rec.limit,
        rec.tc[2] / rec.limit,
    ];
    FinancialFeatures {
        ur_avg: mean3(ur),
        pr_avg: mean3(pr),
        cr_avg: mean3(cr),
        mp: rec.mp_r,
        limit: rec.limit,
        int_monthly: rec.int_annual / 12.0,
    }
}

/// Loads a portfolio CSV.
///
/// The header must match [`PORTFOLIO_HEADER`] exactly. Every record is
/// validated; the first violation aborts the load with the data row number
/// and field name. With `eligible_only` set, records failing
/// [`CustomerRecord::is_episode_eligible`] are dropped rather than rejected.
pub fn load_portfolio_csv(
    path: impl AsRef<Path>,
    params: PortfolioParams,
    eligible_only: bool,
) -> Result<Portfolio> {
    let path = path.as_ref();
    params.validate()?;
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
    if header.len() != PORTFOLIO_HEADER.len()
        || header.iter().zip(PORTFOLIO_HEADER).any(|(got, want)| got != want)
    {
        return Err(Error::format(
            path,
            format!(
                "bad header: expected `{}`, got `{}`",
                PORTFOLIO_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut customers = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::format(path, format!("data row {row}: {e}")))?;
        if rec.len() != PORTFOLIO_HEADER.len() {
            return Err(Error::format(
                path,
                format!(
                    "data row {row}: expected {} fields, got {}",
                    PORTFOLIO_HEADER.len(),
                    rec.len()
                ),
            ));
        }
        let customer = parse_record(&rec, row)?;
        customer
            .validate()
            .map_err(|(field, message)| Error::InvalidRecord { row, field, message })?;
        if !eligible_only || customer.is_episode_eligible() {
            customers.push(customer);
        }
    }
    Ok(Portfolio { customers, params })
}

fn parse_record(rec: &csv::StringRecord, row: usize) -> Result<CustomerRecord> {
    fn f64_field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<f64> {
        let field = PORTFOLIO_HEADER[idx];
        rec[idx].trim().parse().map_err(|_| Error::InvalidRecord {
            row,
            field,
            message: format!("not a number: `{}`", &rec[idx]),
        })
    }
    fn u32_field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<u32> {
        let field = PORTFOLIO_HEADER[idx];
        rec[idx].trim().parse().map_err(|_| Error::InvalidRecord {
            row,
            field,
            message: format!("not a non-negative integer: `{}`", &rec[idx]),
        })
    }
    Ok(CustomerRecord {
        customer_id: rec[0].to_string(),
        tc: [
            f64_field(rec, 1, row)?,
            f64_field(rec, 2, row)?,
            f64_field(rec, 3, row)?,
        ],
        ob: [
            f64_field(rec, 4, row)?,
            f64_field(rec, 5, row)?,
            f64_field(rec, 6, row)?,
        ],
        pay: [
            f64_field(rec, 7, row)?,
            f64_field(rec, 8, row)?,
            f64_field(rec, 9, row)?,
        ],
        mp_r: u32_field(rec, 10, row)?,
        limit: f64_field(rec, 11, row)?,
        int_annual: f64_field(rec, 12, row)?,
        pd: f64_field(rec, 13, row)?,
        bureau_score: f64_field(rec, 14, row)?,
        months_on_book: u32_field(rec, 15, row)?,
    })
}

/// Writes a portfolio CSV that [`load_portfolio_csv`] reads back
/// field-for-field. Floats use the shortest round-trip representation.
pub fn write_portfolio_csv(portfolio: &Portfolio, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(PORTFOLIO_HEADER)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for rec in &portfolio.customers {
        w.write_record(portfolio_row(rec))
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn portfolio_row(rec: &CustomerRecord) -> Vec<String> {
    vec![
        rec.customer_id.clone(),
        rec.tc[0].to_string(),
        rec.tc[1].to_string(),
        rec.tc[2].to_string(),
        rec.ob[0].to_string(),
        rec.ob[1].to_string(),
        rec.ob[2].to_string(),
        rec.pay[0].to_string(),
        rec.pay[1].to_string(),
        rec.pay[2].to_string(),
        rec.mp_r.to_string(),
        rec.limit.to_string(),
        rec.int_annual.to_string(),
        rec.pd.to_string(),
        rec.bureau_score.to_string(),
        rec.months_on_book.to_string(),
    ]
}

/// Canonical valid record for tests across the crate: ur 0.5, pr 0.5,
/// cr 0.2, monthly interest 0.02.
#[cfg(test)]
pub(crate) fn record(id: &str) -> CustomerRecord {
    CustomerRecord {
        customer_id: id.to_string(),
        tc: [30.0, 40.0, 50.0],
        ob: [50.0, 100.0, 150.0],
        pay: [25.0, 50.0, 75.0],
        mp_r: 0,
        limit: 200.0,
        int_annual: 0.24,
        pd: 0.05,
        bureau_score: 700.0,
        months_on_book: 12,
    }
}
