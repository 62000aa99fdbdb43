//! The credit-limit decision process.
//!
//! An episode walks a freshly permuted portfolio once. For each customer the
//! agent either maintains the current limit or grants a fixed relative
//! increase; the reward for an increase is the expected-profit advantage
//! over maintaining, and maintaining itself is worth exactly zero. Granted
//! increases accumulate extra provisions in a ledger that is part of the
//! observed state, so the agent sees how much balance-sheet headroom it has
//! already consumed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{derive_features, CustomerRecord, FinancialFeatures, Portfolio, PortfolioParams};
use crate::provisioning::compute_provision;

/// The two admissible decisions per customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Maintain,
    Increase,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Maintain => 0,
            Action::Increase => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Maintain => "maintain",
            Action::Increase => "increase",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        match s {
            "maintain" => Some(Action::Maintain),
            "increase" => Some(Action::Increase),
            _ => None,
        }
    }

    pub fn from_index(idx: usize) -> Option<Action> {
        match idx {
            0 => Some(Action::Maintain),
            1 => Some(Action::Increase),
            _ => None,
        }
    }
}

/// Source of expected average-balance responses.
///
/// `rbar(rec, action, beta)` returns the expected mean outstanding balance at
/// payment date over the prospective window, conditional on the customer
/// keeping `limit` (maintain) or moving to `limit * (1 + beta)` (increase).
pub trait BalancePredictor {
    fn rbar(&self, rec: &CustomerRecord, action: Action, beta: f64) -> f64;
}

/// Post-decision limit for a record.
pub fn limit_after(limit: f64, action: Action, beta: f64) -> f64 {
    match action {
        Action::Maintain => limit,
        Action::Increase => limit * (1.0 + beta),
    }
}

/// Expected quarterly profit of a decision:
/// `3 * int_monthly * rbar * (1 - pd) - provision(pd, lgd, ob_3, limit_after, ccf)`.
///
/// Revenue accrues on the expected balance only if the customer survives;
/// the provision is charged on the post-decision limit.
pub fn expected_profit(
    feat: &FinancialFeatures,
    pd: f64,
    ob3: f64,
    action: Action,
    rbar: f64,
    params: &PortfolioParams,
) -> f64 {
    let limit = limit_after(feat.limit, action, params.beta);
    3.0 * feat.int_monthly * rbar * (1.0 - pd) - compute_provision(pd, params.lgd, ob3, limit, params.ccf)
}

/// Per-step reward: the profit advantage of increasing when the action is
/// increase, and exactly zero when the action is maintain.
pub fn reward(profit_increase: f64, profit_maintain: f64, action: Action) -> f64 {
    match action {
        Action::Increase => profit_increase - profit_maintain,
        Action::Maintain => 0.0,
    }
}

/// Expected profit of each action for one customer: `(increase, maintain)`.
/// Queries the predictor for both conditional balance responses.
pub fn action_profits(
    rec: &CustomerRecord,
    predictor: &dyn BalancePredictor,
    params: &PortfolioParams,
) -> (f64, f64) {
    let feat = derive_features(rec);
    let ob3 = rec.ob[2];
    let rbar_maintain = predictor.rbar(rec, Action::Maintain, params.beta);
    let rbar_increase = predictor.rbar(rec, Action::Increase, params.beta);
    (
        expected_profit(&feat, rec.pd, ob3, Action::Increase, rbar_increase, params),
        expected_profit(&feat, rec.pd, ob3, Action::Maintain, rbar_maintain, params),
    )
}

/// Extra provisions a single increase would add for this customer.
pub(crate) fn provision_delta(rec: &CustomerRecord, params: &PortfolioParams) -> f64 {
    let ob3 = rec.ob[2];
    compute_provision(
        rec.pd,
        params.lgd,
        ob3,
        rec.limit * (1.0 + params.beta),
        params.ccf,
    ) - compute_provision(rec.pd, params.lgd, ob3, rec.limit, params.ccf)
}

/// Running provisions account of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProvisionLedger {
    /// Extra provisions granted so far this episode, USD.
    pub delta_total: f64,
    /// Episode-constant normalizer: the extra provisions of increasing every
    /// customer, USD.
    pub max_delta: f64,
}

/// What the agent observes before deciding on one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub features: FinancialFeatures,
    /// Ledger total at observation time, USD.
    pub delta_provisions: f64,
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// `None` once the episode is exhausted.
    pub next_state: Option<EnvState>,
    /// Extra provisions booked by this step; zero for maintain.
    pub provision_increase: f64,
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

/// Bin layout mapping continuous observations onto tabular states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationGrid {
    /// Width of the utilization / payment / spending rate bins.
    pub rate_bin_width: f64,
    /// Ascending upper edges of the limit bins, USD. Values beyond the last
    /// edge land in an open-ended top bin.
    pub limit_edges: Vec<f64>,
    /// Ascending upper edges of the monthly-interest bins. Values beyond the
    /// last edge land in the top bin.
    pub interest_edges: Vec<f64>,
    /// Missed-payment counts at or above this cap share one bin.
    pub mp_cap: u32,
    /// Width of one provisions bin as a fraction of `max_delta`.
    pub provision_bin_fraction: f64,
}

impl DiscretizationGrid {
    /// Grid with the standard layout: 5% rate bins, limit edges every
    /// 100 USD up to 1,000 then every 500 USD up to 5,000 with an open top
    /// bin, five uniform interest bins over the given annual-rate range, a
    /// missed-payment cap of 3, and 1% provision bins.
    pub fn with_interest_range(annual_min: f64, annual_max: f64) -> Result<Self> {
        if !(annual_min.is_finite() && annual_max.is_finite()) || annual_min >= annual_max {
            return Err(Error::InvalidConfig(format!(
                "interest range must be an ordered pair, got ({annual_min}, {annual_max})"
            )));
        }
        let mut limit_edges: Vec<f64> = (1..=10).map(|k| 100.0 * k as f64).collect();
        limit_edges.extend((1..=8).map(|k| 1000.0 + 500.0 * k as f64));
        // Five uniform monthly-interest bins need four interior edges.
        let step = (annual_max - annual_min) / 5.0;
        let interest_edges = (1..=4).map(|k| (annual_min + step * k as f64) / 12.0).collect();
        let grid = DiscretizationGrid {
            rate_bin_width: 0.05,
            limit_edges,
            interest_edges,
            mp_cap: 3,
            provision_bin_fraction: 0.01,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_bin_width > 0.0 && self.rate_bin_width <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rate_bin_width must lie in (0, 1], got {}",
                self.rate_bin_width
            )));
        }
        if !(self.provision_bin_fraction > 0.0 && self.provision_bin_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "provision_bin_fraction must lie in (0, 1], got {}",
                self.provision_bin_fraction
            )));
        }
        for edges in [&self.limit_edges, &self.interest_edges] {
            if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "bin edges must be non-empty and strictly ascending".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Number of rate bins.
    pub fn rate_bins(&self) -> u16 {
        (1.0 / self.rate_bin_width).round() as u16
    }

    /// Number of provision bins (indices 0..=1/fraction).
    pub fn provision_bins(&self) -> u16 {
        (1.0 / self.provision_bin_fraction).round() as u16 + 1
    }

    fn rate_bin(&self, rate: f64) -> u16 {
        let bin = (rate / self.rate_bin_width).floor();
        let max = self.rate_bins() as i64 - 1;
        (bin as i64).clamp(0, max) as u16
    }

    fn edge_bin(edges: &[f64], value: f64) -> u16 {
        edges.partition_point(|e| value > *e) as u16
    }

    fn provision_bin(&self, delta_total: f64, max_delta: f64) -> u16 {
        if max_delta <= 0.0 {
            return 0;
        }
        let bin = (delta_total / (self.provision_bin_fraction * max_delta)).floor();
        let max = (1.0 / self.provision_bin_fraction).round() as i64;
        (bin as i64).clamp(0, max) as u16
    }
}

impl Default for DiscretizationGrid {
    fn default() -> Self {
        DiscretizationGrid::with_interest_range(0.0, 0.60).expect("valid default grid")
    }
}

/// A fully binned observation, the key of the Q-tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscretizedState {
    pub ur_bin: u16,
    pub pr_bin: u16,
    pub cr_bin: u16,
    pub mp_bin: u16,
    pub limit_bin: u16,
    pub int_bin: u16,
    pub provision_bin: u16,
}

/// Bins a state against a grid; the provisions bin is relative to the
/// episode's `max_delta`.
pub fn discretize(
    state: &EnvState,
    grid: &DiscretizationGrid,
    ledger: &ProvisionLedger,
) -> DiscretizedState {
    DiscretizedState {
        ur_bin: grid.rate_bin(state.features.ur_avg),
        pr_bin: grid.rate_bin(state.features.pr_avg),
        cr_bin: grid.rate_bin(state.features.cr_avg),
        mp_bin: state.features.mp.min(grid.mp_cap) as u16,
        limit_bin: DiscretizationGrid::edge_bin(&grid.limit_edges, state.features.limit),
        int_bin: DiscretizationGrid::edge_bin(&grid.interest_edges, state.features.int_monthly),
        provision_bin: grid.provision_bin(state.delta_provisions, ledger.max_delta),
    }
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

/// One pass over a permuted portfolio.
#[derive(Debug)]
pub struct Episode<'a> {
    portfolio: &'a Portfolio,
    order: Vec<usize>,
    cursor: usize,
    ledger: ProvisionLedger,
}

/// Starts an episode: permutes the customer order with a generator seeded by
/// `seed`, zeroes the ledger, and recomputes `max_delta` as the total extra
/// provisions of increasing everyone.
pub fn episode_reset(portfolio: &Portfolio, seed: u64) -> Result<Episode<'_>> {
    if portfolio.is_empty() {
        return Err(Error::EmptyPortfolio);
    }
    let mut order: Vec<usize> = (0..portfolio.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let max_delta = portfolio
        .customers
        .iter()
        .map(|rec| provision_delta(rec, &portfolio.params))
        .sum();
    Ok(Episode {
        portfolio,
        order,
        cursor: 0,
        ledger: ProvisionLedger {
            delta_total: 0.0,
            max_delta,
        },
    })
}

impl<'a> Episode<'a> {
    /// Visit order of this episode, as indices into the portfolio.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn ledger(&self) -> &ProvisionLedger {
        &self.ledger
    }

    pub fn is_terminal(&self) -> bool {
        self.cursor >= self.order.len()
    }

    /// The record the next step will decide on.
    pub fn current_customer(&self) -> Option<&'a CustomerRecord> {
        self.order
            .get(self.cursor)
            .map(|&i| &self.portfolio.customers[i])
    }

    /// The observation for the next decision, `None` once terminal.
    pub fn current_state(&self) -> Option<EnvState> {
        self.current_customer().map(|rec| EnvState {
            features: derive_features(rec),
            delta_provisions: self.ledger.delta_total,
        })
    }

    /// Applies `action` to the current customer.
    ///
    /// Queries the predictor for both conditional balance responses, rewards
    /// the profit advantage for an increase (zero for maintain), books the
    /// provision increase on the ledger, and advances the cursor.
    pub fn step(
        &mut self,
        action: Action,
        predictor: &dyn BalancePredictor,
    ) -> Result<StepOutcome> {
        let rec = self.current_customer().ok_or(Error::TerminalEpisode)?;
        let (profit_increase, profit_maintain) =
            action_profits(rec, predictor, &self.portfolio.params);
        let step_reward = reward(profit_increase, profit_maintain, action);
        let (next_state, provision_increase) = self.apply(action)?;
        Ok(StepOutcome {
            reward: step_reward,
            next_state,
            provision_increase,
        })
    }

    /// Books `action` for the current customer without computing a reward:
    /// the ledger and cursor move exactly as in `step`. Useful when only the
    /// decision trace matters.
    pub fn apply(&mut self, action: Action) -> Result<(Option<EnvState>, f64)> {
        let rec = self.current_customer().ok_or(Error::TerminalEpisode)?;
        let provision_increase = match action {
            Action::Increase => provision_delta(rec, &self.portfolio.params),
            Action::Maintain => 0.0,
        };
        self.ledger.delta_total += provision_increase;
        self.cursor += 1;
        Ok((self.current_state(), provision_increase))
    }
}
