//! Calibrated forecasting with signal-dependent checking rules, and a
//! backtest harness for short-term trading strategies built on top of it.
//!
//! Prices are rescaled into `[0, 1]`. At each step the forecaster sees the
//! signal, issues a deterministic forecast, randomizes it onto a grid, and
//! learns the outcome.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod concentration;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod forecaster;
pub mod game;
pub mod grid;
pub mod rules;
pub mod schedule;
pub mod trading;

pub use backtest::{run_backtest, BacktestConfig, Report};
pub use error::{Error, Result};
pub use forecaster::{Forecaster, ForecasterState, GridPlan, KernelMode};
pub use grid::{ForecastPoint, PartitionGrid, WeightPair};
pub use rules::{CheckingRule, RuleSpec};
pub use schedule::EpochSchedule;

#[cfg(test)]
mod props;
