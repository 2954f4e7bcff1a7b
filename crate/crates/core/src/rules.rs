//! Checking rules and the calibration error they select.
//!
//! A checking rule is the indicator of a subset of `[0, 1]^{k+1}`, evaluated
//! on the randomized forecast and randomized signal of each step.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{rounding_weights, PartitionGrid};

type Predicate = dyn Fn(f64, &[f64]) -> bool + Send + Sync;

#[derive(Clone)]
pub struct CheckingRule {
    description: String,
    predicate: Arc<Predicate>,
}

impl fmt::Debug for CheckingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CheckingRule").field(&self.description).finish()
    }
}

impl CheckingRule {
    pub fn new(
        description: impl Into<String>,
        predicate: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            description: description.into(),
            predicate: Arc::new(predicate),
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn selects(&self, p: f64, x: &[f64]) -> bool {
        (self.predicate)(p, x)
    }

    /// Selects every step.
    pub fn always() -> Self {
        Self::new("all", |_, _| true)
    }

    /// Selects forecasts in the half-open interval `(lo, hi]`; `lo < 0`
    /// includes zero.
    pub fn forecast_in(lo: f64, hi: f64) -> Self {
        Self::new(format!("p in ({lo}, {hi}]"), move |p, _| p > lo && p <= hi)
    }

    /// Union of rules that never select the same point.
    pub fn union(parts: Vec<CheckingRule>) -> Self {
        let description = parts
            .iter()
            .map(|r| r.description.as_str())
            .collect::<Vec<_>>()
            .join(" | ");
        Self::new(description, move |p, x| parts.iter().any(|r| r.selects(p, x)))
    }
}

/// `p > x_1 + epsilon`, strict; the entry rule of the trader.
pub fn threshold_rule(epsilon: f64) -> Result<CheckingRule> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("threshold epsilon {epsilon} must lie in (0, 1)")));
    }
    Ok(CheckingRule::new(format!("p > x + {epsilon}"), move |p, x| {
        x.first().is_some_and(|&prev| p > prev + epsilon)
    }))
}

/// Serializable description of the rules the service and CLI can build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RuleSpec {
    All,
    Threshold { epsilon: f64 },
    ForecastIn { lo: f64, hi: f64 },
}

impl RuleSpec {
    pub fn build(&self) -> Result<CheckingRule> {
        match *self {
            RuleSpec::All => Ok(CheckingRule::always()),
            RuleSpec::Threshold { epsilon } => threshold_rule(epsilon),
            RuleSpec::ForecastIn { lo, hi } => {
                if lo >= hi {
                    return Err(Error::config(format!("empty forecast interval ({lo}, {hi}]")));
                }
                Ok(CheckingRule::forecast_in(lo, hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub p: f64,
    pub x: Vec<f64>,
    pub outcome: f64,
    pub selected: bool,
}

/// Per-step randomized forecasts with the selection bit of one rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrace {
    steps: Vec<TraceStep>,
}

impl CalibrationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rule: &CheckingRule, p: f64, x: &[f64], outcome: f64) {
        self.steps.push(TraceStep {
            p,
            x: x.to_vec(),
            outcome,
            selected: rule.selects(p, x),
        });
    }

    pub fn from_steps(steps: Vec<TraceStep>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.steps.iter().filter(|s| s.selected).count()
    }

    /// `sum_i selected_i (S_i - p_i)`.
    pub fn residual_sum(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.selected)
            .map(|s| s.outcome - s.p)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    PerStep,
    PerSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationError {
    pub value: f64,
    /// Set when the rule selected nothing; `value` is then 0.
    pub no_selections: bool,
}

pub fn calibration_error(trace: &CalibrationTrace, normalization: Normalization) -> CalibrationError {
    let selected = trace.selected_count();
    if selected == 0 {
        return CalibrationError {
            value: 0.0,
            no_selections: true,
        };
    }
    let denom = match normalization {
        Normalization::PerStep => trace.len(),
        Normalization::PerSelection => selected,
    };
    CalibrationError {
        value: trace.residual_sum() / denom as f64,
        no_selections: false,
    }
}

/// `E[I(p~, x~) (S - p~)]` under the rounding distribution of `(p, x)`,
/// summed exactly over the support cells.
pub fn expected_selected_residual(
    rule: &CheckingRule,
    p: f64,
    x: &[f64],
    outcome: f64,
    grid: &PartitionGrid,
) -> Result<f64> {
    let mut cells: Vec<(f64, Vec<f64>, f64)> = rounding_weights(p, grid)?
        .support()
        .map(|(i, w)| (grid.endpoint(i), Vec::with_capacity(x.len()), w))
        .collect();
    for &xj in x {
        let pair = rounding_weights(xj, grid)?;
        cells = cells
            .into_iter()
            .flat_map(|(v1, v2, w)| {
                pair.support().map(move |(i, wj)| {
                    let mut v2 = v2.clone();
                    v2.push(grid.endpoint(i));
                    (v1, v2, w * wj)
                })
            })
            .collect();
    }
    Ok(cells
        .iter()
        .filter(|(v1, v2, _)| rule.selects(*v1, v2))
        .map(|(v1, _, w)| w * (outcome - v1))
        .sum())
}
