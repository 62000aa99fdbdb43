//! Credit-limit adjustment as a reinforcement-learning problem.
//!
//! The pipeline turns a portfolio of credit-card customers into an episodic
//! decision process: every episode walks a permuted portfolio once, choosing
//! for each customer between keeping the current limit and raising it by a
//! fixed factor. The reward of an increase is the expected quarterly profit
//! advantage over maintaining: interest on the predicted balance response,
//! net of the extra Basel-style provisions the higher limit commands.
//!
//! Module map:
//!
//! - [`portfolio`]: the customer data model, CSV schema, and derived rates.
//! - [`provisioning`]: expected-loss arithmetic (EAD, provisions, CCF).
//! - [`env`]: the episodic environment, its provisions ledger, and state
//!   discretization.
//! - [`predictor`]: the two-stage balance-response model (classifier plus
//!   per-band regressors), SMOTE-NC oversampling, and evaluation metrics.
//! - [`synth`]: deterministic synthetic portfolios with known responses,
//!   giving an exact per-customer reward oracle.
//! - [`agents`]: tabular Q-learning and double Q-learning, grid search,
//!   multi-seed robustness curves, and greedy policy extraction.
//! - [`baselines`]: reference strategies and the comparison harness.
//! - [`seeds`]: splittable seed derivation shared by everything above.

pub mod agents;
pub mod baselines;
pub mod env;
pub mod error;
pub mod portfolio;
pub mod predictor;
pub mod provisioning;
pub mod seeds;
pub mod synth;

pub use error::{Error, Result};
