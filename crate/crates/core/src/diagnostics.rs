//! Calibration-only diagnostics: errors of a family of checking rules on
//! the deterministic and randomized forecast streams of each asset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backtest::{calibration_bound, run_asset, BacktestConfig, TraceRow};
use crate::data::{rescale, PriceSeries};
use crate::error::{Error, Result};
use crate::rules::{calibration_error, CalibrationTrace, CheckingRule, Normalization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDiagnostic {
    pub asset: String,
    pub rule: String,
    pub steps: usize,
    pub selected_randomized: usize,
    pub selected_deterministic: usize,
    /// Per-step error on the randomized stream.
    pub error_randomized: f64,
    /// Per-step error on the deterministic stream.
    pub error_deterministic: f64,
    /// Per-selection error on the randomized stream, 0 when nothing selected.
    pub mean_residual_randomized: f64,
    pub bound: f64,
}

/// Rules evaluated on `(p, [reference, epsilon])`.
fn rule_family() -> Vec<CheckingRule> {
    vec![
        CheckingRule::always(),
        CheckingRule::new("entry", |p, x| p > x[0] + x[1]),
        CheckingRule::forecast_in(-1.0, 0.5),
        CheckingRule::forecast_in(0.5, 1.0),
    ]
}

pub fn diagnose_trace(asset: &str, trace: &[TraceRow], config: &BacktestConfig) -> Vec<RuleDiagnostic> {
    let bound = calibration_bound(trace.len(), trace.last().map_or(config.delta, |r| r.delta), config.k, config.confidence);
    rule_family()
        .iter()
        .map(|rule| {
            let mut rnd = CalibrationTrace::new();
            let mut det = CalibrationTrace::new();
            for r in trace {
                rnd.push(rule, r.p_tilde, &[r.s_tilde_prev, r.epsilon], r.s);
                det.push(rule, r.p, &[r.s_prev, r.epsilon], r.s);
            }
            RuleDiagnostic {
                asset: asset.to_string(),
                rule: rule.description().to_string(),
                steps: trace.len(),
                selected_randomized: rnd.selected_count(),
                selected_deterministic: det.selected_count(),
                error_randomized: calibration_error(&rnd, Normalization::PerStep).value,
                error_deterministic: calibration_error(&det, Normalization::PerStep).value,
                mean_residual_randomized: calibration_error(&rnd, Normalization::PerSelection).value,
                bound,
            }
        })
        .collect()
}

/// Diagnostics for every asset of `config`, loaded from its inputs.
pub fn calibrate(config: &BacktestConfig) -> Result<Vec<RuleDiagnostic>> {
    let assets = config.load_assets()?;
    calibrate_on(config, assets, config.inputs.is_empty())
}

pub fn calibrate_on(config: &BacktestConfig, assets: Vec<(String, PriceSeries)>, synthetic: bool) -> Result<Vec<RuleDiagnostic>> {
    if assets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = config.scale_bounds(synthetic)?;
    config.validate(assets.iter().map(|(_, s)| s.len()).max().unwrap_or(0))?;
    let mut out = Vec::new();
    for (j, (name, raw)) in assets.into_iter().enumerate() {
        let series = rescale(&raw, config.scale, lo, hi)?;
        let trace = run_asset(config, &series, j as u64)?;
        out.extend(diagnose_trace(&name, &trace, config));
    }
    Ok(out)
}

pub fn diagnostics_csv(rows: &[RuleDiagnostic]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn diagnostics_files(rows: &[RuleDiagnostic]) -> Result<BTreeMap<String, String>> {
    Ok(BTreeMap::from([("calibration_summary.csv".to_string(), diagnostics_csv(rows)?)]))
}
