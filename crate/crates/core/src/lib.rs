//! Interval-based Bayesian phase-I dose finding (mTPI and mTPI-2).
//!
//! The crate is layered bottom-up:
//!
//! - [`beta`]: exact beta-binomial posterior math with integer shapes.
//! - [`partition`]: candidate toxicity-probability intervals for each design.
//! - [`decision`]: unit probability mass, optimal decisions, the safety
//!   overlay, Bayes factors, and precalculated decision tables.
//! - [`conduct`]: the live trial state machine and MTD selection.
//! - [`isotonic`]: weighted pool-adjacent-violators.
//! - [`sim`]: Monte Carlo operating characteristics.
//! - [`document`]: table and simulation documents for export.

pub mod beta;
pub mod conduct;
pub mod decision;
pub mod document;
pub mod error;
pub mod export;
pub mod isotonic;
pub mod params;
pub mod partition;
pub mod sim;

pub use beta::{BetaParams, DoseData};
pub use conduct::{CohortOutcome, MtdResult, TrialState, TrialStatus};
pub use decision::{Decision, DecisionCard, DecisionCell, DecisionRule, DecisionTable};
pub use error::{Error, FieldError, Result};
pub use params::{DesignParams, LeftoverPolicy, Variant};
pub use partition::{Action, Interval, IntervalPartition};
