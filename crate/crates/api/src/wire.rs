//! Request and response bodies shared by the service and its clients.

use std::collections::BTreeMap;

use calitrade_core::backtest::{BacktestConfig, SummaryRow};
use calitrade_core::diagnostics::RuleDiagnostic;
use calitrade_core::schedule::Violation;
use calitrade_core::{GridPlan, KernelMode};
use calitrade_core::data::MarketSpec;
use serde::{Deserialize, Serialize};

/// A price CSV sent inline; the asset is named after the file stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub name: String,
    pub csv: String,
}

/// Body of `/v1/backtest` and `/v1/calibrate`. With no files the run uses
/// the synthetic market described by the config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default)]
    pub config: BacktestConfig,
    #[serde(default)]
    pub files: Vec<InputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResponse {
    pub summary: Vec<SummaryRow>,
    /// Report files by name.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateResponse {
    pub rows: Vec<RuleDiagnostic>,
    pub files: BTreeMap<String, String>,
}

fn one() -> usize {
    1
}

fn ten() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRequest {
    pub exponent: u32,
    #[serde(default = "one")]
    pub signal_dim: usize,
    #[serde(default = "ten")]
    pub s_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResponse {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

fn price_lo() -> f64 {
    100.0
}

fn price_hi() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub market: MarketSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "price_lo")]
    pub price_lo: f64,
    #[serde(default = "price_hi")]
    pub price_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub csv: String,
}

fn default_plan() -> GridPlan {
    GridPlan::Fixed { cells: 20 }
}

/// Body of `POST /v1/sessions`: an interactive forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    #[serde(default = "default_plan")]
    pub plan: GridPlan,
    #[serde(default = "one")]
    pub signal_dim: usize,
    #[serde(default)]
    pub kernel: KernelMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SessionRequest {
    fn default() -> Self {
        Self {
            plan: default_plan(),
            signal_dim: 1,
            kernel: KernelMode::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRequest {
    #[serde(default)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    /// One-based index of the step being forecast.
    pub step: usize,
    pub p: f64,
    pub p_tilde: f64,
    pub x_tilde: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRequest {
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub id: String,
    /// Number of completed steps.
    pub steps: usize,
    pub delta: f64,
    pub energy: f64,
    pub pending: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
