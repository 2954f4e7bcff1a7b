//! Backtest orchestration: configuration, the per-asset game loop with two
//! books (with and without costs), aggregation, and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::azuma_deviation;
use crate::data::{load_prices, rescale, synth_series, MarketSpec, PriceSeries, ScaleMode, ScaledSeries};
use crate::error::{Error, Result};
use crate::forecaster::{Forecaster, GridPlan, KernelMode};
use crate::game::{lagged_signal, Randomizer};
use crate::schedule::{validate_schedule, EpochSchedule};
use crate::trading::{
    aggregate_strategies, entry_decision, sigma_threshold, Book, Execution, StrategyMode, StrategyParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    #[default]
    Fixed,
    Epoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    #[default]
    Fixed,
    /// `epsilon' * sigma` over a trailing window of scaled prices.
    Sigma,
}

/// Every free parameter of a run. Serialized as flat `key = value` TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Price files (`timestamp,price`). When empty, synthetic assets are used.
    pub inputs: Vec<PathBuf>,
    pub synth_kind: String,
    pub synth_assets: usize,
    pub synth_n: usize,
    pub synth_seed: u64,
    pub synth_start: f64,
    pub synth_sigma: f64,
    pub synth_drift: f64,
    pub synth_segment: u64,
    pub synth_noise: f64,
    /// Raw price range of synthetic assets.
    pub price_lo: f64,
    pub price_hi: f64,

    pub scale: ScaleMode,
    /// Required for strict and clamp scaling of file inputs.
    pub scale_lo: Option<f64>,
    pub scale_hi: Option<f64>,

    /// Number of lagged prices in the signal.
    pub k: usize,
    pub grid: GridKind,
    pub delta: f64,
    pub exponent: u32,
    pub kernel: KernelMode,

    pub threshold: ThresholdKind,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub window: usize,
    pub epsilon_floor: f64,

    pub strategy: StrategyMode,
    pub delta_fraction: f64,
    pub initial_capital: f64,
    pub execution: Execution,
    pub tx_cost: f64,
    pub cost_sides: u8,

    pub eta: f64,
    pub period: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            synth_kind: "drift-segments".into(),
            synth_assets: 1,
            synth_n: 20_000,
            synth_seed: 0,
            synth_start: 0.5,
            synth_sigma: 0.01,
            synth_drift: 0.002,
            synth_segment: 500,
            synth_noise: 0.0,
            price_lo: 100.0,
            price_hi: 200.0,
            scale: ScaleMode::Strict,
            scale_lo: None,
            scale_hi: None,
            k: 1,
            grid: GridKind::Fixed,
            delta: 0.05,
            exponent: 8,
            kernel: KernelMode::Grid,
            threshold: ThresholdKind::Fixed,
            epsilon: 0.05,
            epsilon_prime: 0.5,
            window: 60,
            epsilon_floor: 1e-4,
            strategy: StrategyMode::Simple,
            delta_fraction: 0.5,
            initial_capital: 1.0,
            execution: Execution::PerStep,
            tx_cost: 0.0001,
            cost_sides: 2,
            eta: 1.0,
            period: 1440,
            confidence: 0.99,
            seed: 0,
        }
    }
}

impl BacktestConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn market(&self) -> Result<MarketSpec> {
        let spec = match MarketSpec::parse_kind(&self.synth_kind)? {
            MarketSpec::RandomWalk { .. } => MarketSpec::RandomWalk {
                start: self.synth_start,
                sigma: self.synth_sigma,
            },
            MarketSpec::DriftSegments { .. } => MarketSpec::DriftSegments {
                start: self.synth_start,
                drift: self.synth_drift,
                segment: self.synth_segment,
                noise: self.synth_noise,
            },
            other => other,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plan(&self) -> Result<GridPlan> {
        match self.grid {
            GridKind::Fixed => GridPlan::fixed_delta(self.delta),
            GridKind::Epoch => {
                EpochSchedule::new(self.exponent)?;
                Ok(GridPlan::Epochs { exponent: self.exponent })
            }
        }
    }

    pub fn strategy_params(&self) -> StrategyParams {
        StrategyParams {
            mode: self.strategy,
            execution: self.execution,
            delta: self.delta_fraction,
            tx_cost: self.tx_cost,
            cost_sides: self.cost_sides,
        }
    }

    /// Checks parameter ranges, and the epoch schedule up to the epoch that
    /// contains step `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1: the signal carries the previous price"));
        }
        self.plan()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("epsilon = {} must lie in (0, 1)", self.epsilon)));
        }
        if self.threshold == ThresholdKind::Sigma {
            if !(self.epsilon_prime > 0.0 && self.epsilon_prime < 1.0) {
                return Err(Error::config(format!("epsilon_prime = {} must lie in (0, 1)", self.epsilon_prime)));
            }
            if self.window < 2 {
                return Err(Error::config("window must hold at least 2 prices"));
            }
            if !(self.epsilon_floor > 0.0) {
                return Err(Error::config("epsilon_floor must be positive"));
            }
        }
        self.strategy_params().validate()?;
        if !(self.initial_capital > 0.0) {
            return Err(Error::config("initial_capital must be positive"));
        }
        if !(self.eta > 0.0) || self.period == 0 {
            return Err(Error::config("eta must be positive and period at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config("confidence must lie in (0, 1)"));
        }
        if self.grid == GridKind::Epoch {
            let sch = EpochSchedule::new(self.exponent)?;
            let s_max = sch.epoch_of(n.max(1) as u64) + 1;
            let v = validate_schedule(self.exponent, self.k, s_max.max(2));
            if let Some(first) = v.first() {
                return Err(Error::config(format!(
                    "epoch schedule M = {} fails the {:?} condition at epoch {}",
                    self.exponent, first.constraint, first.epoch
                )));
            }
        }
        Ok(())
    }

    pub fn scale_bounds(&self, synthetic: bool) -> Result<(f64, f64)> {
        match (self.scale_lo, self.scale_hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ if synthetic => Ok((self.price_lo, self.price_hi)),
            _ if self.scale == ScaleMode::Auto => Ok((0.0, 0.0)),
            _ => Err(Error::config("scale_lo and scale_hi are required unless scale = \"auto\"")),
        }
    }

    /// Named raw series for this run: the input files or synthetic assets.
    pub fn load_assets(&self) -> Result<Vec<(String, PriceSeries)>> {
        if self.inputs.is_empty() {
            return self.synth_assets();
        }
        let mut names = BTreeMap::new();
        self.inputs
            .iter()
            .map(|path| {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("asset").to_string();
                let count = names.entry(stem.clone()).or_insert(0usize);
                *count += 1;
                let name = if *count > 1 { format!("{stem}_{count}") } else { stem };
                let series = load_prices(path).map_err(|e| match e {
                    Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
                    other => other,
                })?;
                Ok((name, series))
            })
            .collect()
    }

    pub fn synth_assets(&self) -> Result<Vec<(String, PriceSeries)>> {
        let spec = self.market()?;
        (0..self.synth_assets.max(1))
            .map(|j| {
                let series = synth_series(&spec, self.synth_n, self.synth_seed.wrapping_add(j as u64), self.price_lo, self.price_hi)?;
                Ok((format!("synth{}", j + 1), series))
            })
            .collect()
    }
}

/// One step of one asset. Prices other than `price` are scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub timestamp: String,
    pub price: f64,
    pub s_prev: f64,
    pub s: f64,
    pub delta: f64,
    pub p: f64,
    pub p_tilde: f64,
    pub s_tilde_prev: f64,
    pub epsilon: f64,
    pub entered: bool,
    pub held: bool,
    pub opened: bool,
    pub closed: bool,
    pub shares: f64,
    pub gain: f64,
    pub capital: f64,
    pub shares_cost: f64,
    pub cost: f64,
    pub gain_cost: f64,
    pub capital_cost: f64,
    pub buy_and_hold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub asset: String,
    pub entry_frequency: f64,
    /// Mean gamble length in steps, entry to exit inclusive.
    pub avg_gamble_duration: Option<f64>,
    pub return_without_costs_pct: f64,
    pub return_with_costs_pct: f64,
    pub buy_and_hold_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub step: usize,
    /// `(1/i) sum_{j<=i} entered_j (S_j - p~_j)`.
    pub error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub period: usize,
    pub end_step: usize,
    pub return_without_costs: f64,
    pub capital_without_costs: f64,
    pub return_with_costs: f64,
    pub capital_with_costs: f64,
    /// Weights during the period (with costs), ordered as in the header.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetReport {
    pub name: String,
    pub trace: Vec<TraceRow>,
    pub summary: SummaryRow,
    pub calibration: Vec<CalibrationPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config: BacktestConfig,
    pub assets: Vec<AssetReport>,
    pub aggregate: SummaryRow,
    pub strategy_names: Vec<String>,
    pub aggregate_rows: Vec<AggregateRow>,
}

/// Additive deviation in the per-step calibration bound at step `n`.
pub fn calibration_bound(n: usize, delta: f64, k: usize, confidence: f64) -> f64 {
    let n = n.max(1);
    delta + azuma_deviation(n as u64, confidence) + (1.0 / (n as f64 * delta.powi(k as i32 + 1))).sqrt()
}

/// Runs the game loop over one scaled series.
pub fn run_asset(config: &BacktestConfig, series: &ScaledSeries, stream: u64) -> Result<Vec<TraceRow>> {
    let n = series.len();
    let mut f = Forecaster::new(config.plan()?, config.k, config.kernel)?;
    let mut rnd = Randomizer::with_stream(config.seed, stream);
    let params = config.strategy_params();
    let mut plain = Book::new(StrategyParams { tx_cost: 0.0, ..params }, config.initial_capital)?;
    let mut costly = Book::new(params, config.initial_capital)?;
    let s = &series.scaled;
    let first_raw = series.raw[0];
    let mut rows = Vec::with_capacity(n);
    for i in 1..=n {
        let wrap = |e: Error| e.at_step(i);
        let x = lagged_signal(&s[..i], config.k);
        let p = f.forecast(&x).map_err(wrap)?;
        let grid = *f.grid();
        let (p_tilde, x_tilde) = rnd.draw(p, &x, &grid).map_err(wrap)?;
        let s_tilde_prev = x_tilde[0];
        let epsilon = match config.threshold {
            ThresholdKind::Fixed => config.epsilon,
            ThresholdKind::Sigma => {
                let lo = i.saturating_sub(config.window);
                sigma_threshold(&s[lo..i], config.epsilon_prime, config.epsilon_floor)
            }
        };
        let entered = entry_decision(p_tilde, s_tilde_prev, epsilon);
        let last = i == n;
        let a = plain.step(entered, p_tilde, epsilon, s[i - 1], s[i], last);
        let b = costly.step(entered, p_tilde, epsilon, s[i - 1], s[i], last);
        f.reveal(s[i]).map_err(wrap)?;
        rows.push(TraceRow {
            step: i,
            timestamp: series.timestamps[i - 1].clone(),
            price: series.raw[i - 1],
            s_prev: s[i - 1],
            s: s[i],
            delta: grid.delta(),
            p,
            p_tilde,
            s_tilde_prev,
            epsilon,
            entered,
            held: a.held,
            opened: a.opened,
            closed: a.closed,
            shares: a.shares,
            gain: a.gain,
            capital: a.capital,
            shares_cost: b.shares,
            cost: b.cost,
            gain_cost: b.gain,
            capital_cost: b.capital,
            buy_and_hold: config.initial_capital * series.raw[i - 1] / first_raw,
        });
    }
    Ok(rows)
}

/// Summary statistics computed from a trace alone.
pub fn summarize(asset: &str, trace: &[TraceRow], initial_capital: f64) -> SummaryRow {
    let n = trace.len().max(1) as f64;
    let mut opened_at = None;
    let mut durations = Vec::new();
    for (i, r) in trace.iter().enumerate() {
        if r.opened {
            opened_at = Some(i);
        }
        if r.closed {
            if let Some(o) = opened_at.take() {
                durations.push((i - o + 1) as f64);
            }
        }
    }
    let entries = trace.iter().filter(|r| r.opened).count() as f64;
    let gain: f64 = trace.iter().map(|r| r.gain).sum();
    let gain_cost: f64 = trace.iter().map(|r| r.gain_cost).sum();
    let bh = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => 100.0 * (b.price / a.price - 1.0),
        _ => 0.0,
    };
    SummaryRow {
        asset: asset.to_string(),
        entry_frequency: entries / n,
        avg_gamble_duration: (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64),
        return_without_costs_pct: 100.0 * gain / initial_capital,
        return_with_costs_pct: 100.0 * gain_cost / initial_capital,
        buy_and_hold_pct: bh,
    }
}

/// Per-step calibration error of the entry rule with its bound.
pub fn calibration_curve(trace: &[TraceRow], k: usize, confidence: f64) -> Vec<CalibrationPoint> {
    let mut sum = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(j, r)| {
            if r.entered {
                sum += r.s - r.p_tilde;
            }
            let i = j + 1;
            CalibrationPoint {
                step: r.step,
                error: sum / i as f64,
                bound: calibration_bound(i, r.delta, k, confidence),
            }
        })
        .collect()
}

/// Period returns of a strategy's capital path. Simple-mode capital starts
/// at zero, so its returns are taken relative to the initial capital.
fn period_returns(capital: &[f64], start: f64, base: Option<f64>, bounds: &[(usize, usize)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(a, b)| {
            let c0 = if a == 0 { start } else { capital[a - 1] };
            let c1 = capital[b - 1];
            match base {
                Some(base) => (c1 - c0) / base,
                None => c1 / c0 - 1.0,
            }
        })
        .collect()
}

fn period_bounds(n: usize, period: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(period).map(|a| (a, (a + period).min(n))).collect()
}

/// Aggregate rows and strategy names from completed asset traces.
pub fn aggregate_report(config: &BacktestConfig, assets: &[AssetReport]) -> Result<(Vec<String>, Vec<AggregateRow>, SummaryRow)> {
    let n = assets.iter().map(|a| a.trace.len()).min().unwrap_or(0);
    let bounds = period_bounds(n, config.period);
    let k0 = config.initial_capital;
    let base = match config.strategy {
        StrategyMode::Simple => Some(k0),
        StrategyMode::LimitedRisk => None,
    };
    let start = match config.strategy {
        StrategyMode::Simple => 0.0,
        StrategyMode::LimitedRisk => k0,
    };
    let mut names = Vec::new();
    let mut plain = Vec::new();
    let mut costly = Vec::new();
    for a in assets {
        let cap: Vec<f64> = a.trace.iter().map(|r| r.capital).collect();
        let cap_c: Vec<f64> = a.trace.iter().map(|r| r.capital_cost).collect();
        let bh: Vec<f64> = a.trace.iter().map(|r| r.buy_and_hold).collect();
        names.push(format!("{}_calibrated", a.name));
        plain.push(period_returns(&cap, start, base, &bounds));
        costly.push(period_returns(&cap_c, start, base, &bounds));
        names.push(format!("{}_buy_and_hold", a.name));
        let bh_r = period_returns(&bh, k0, None, &bounds);
        plain.push(bh_r.clone());
        costly.push(bh_r);
    }
    let agg_plain = aggregate_strategies(&plain, config.eta)?;
    let agg_cost = aggregate_strategies(&costly, config.eta)?;
    let rows = bounds
        .iter()
        .enumerate()
        .map(|(t, &(_, b))| AggregateRow {
            period: t + 1,
            end_step: b,
            return_without_costs: agg_plain.returns[t],
            capital_without_costs: agg_plain.capital[t],
            return_with_costs: agg_cost.returns[t],
            capital_with_costs: agg_cost.capital[t],
            weights: agg_cost.weights[t].clone(),
        })
        .collect::<Vec<_>>();
    let m = assets.len().max(1) as f64;
    let durations: Vec<f64> = assets.iter().filter_map(|a| a.summary.avg_gamble_duration).collect();
    let summary = SummaryRow {
        asset: "AGGR".into(),
        entry_frequency: assets.iter().map(|a| a.summary.entry_frequency).sum::<f64>() / m,
        avg_gamble_duration: (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64),
        return_without_costs_pct: 100.0 * (agg_plain.capital.last().copied().unwrap_or(1.0) - 1.0),
        return_with_costs_pct: 100.0 * (agg_cost.capital.last().copied().unwrap_or(1.0) - 1.0),
        buy_and_hold_pct: assets.iter().map(|a| a.summary.buy_and_hold_pct).sum::<f64>() / m,
    };
    Ok((names, rows, summary))
}

/// Runs every asset of `config` (loading inputs or generating synthetic data).
pub fn run_backtest(config: &BacktestConfig) -> Result<Report> {
    let assets = config.load_assets()?;
    run_backtest_on(config, assets, config.inputs.is_empty())
}

/// Runs on already-loaded raw series. `synthetic` selects the default
/// scale bounds of synthetic data.
pub fn run_backtest_on(config: &BacktestConfig, assets: Vec<(String, PriceSeries)>, synthetic: bool) -> Result<Report> {
    if assets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = config.scale_bounds(synthetic)?;
    let longest = assets.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    config.validate(longest)?;
    let reports = assets
        .into_par_iter()
        .enumerate()
        .map(|(j, (name, raw))| {
            let series = rescale(&raw, config.scale, lo, hi)?;
            let trace = run_asset(config, &series, j as u64)?;
            let summary = summarize(&name, &trace, config.initial_capital);
            let calibration = calibration_curve(&trace, config.k, config.confidence);
            Ok(AssetReport {
                name,
                trace,
                summary,
                calibration,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (strategy_names, aggregate_rows, aggregate) = aggregate_report(config, &reports)?;
    Ok(Report {
        config: config.clone(),
        assets: reports,
        aggregate,
        strategy_names,
        aggregate_rows,
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn trace_csv(trace: &[TraceRow]) -> Result<String> {
    to_csv(trace)
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

impl Report {
    /// Report files by name, in a stable order.
    pub fn files(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        let mut summary: Vec<SummaryRow> = self.assets.iter().map(|a| a.summary.clone()).collect();
        summary.push(self.aggregate.clone());
        out.insert("summary.csv".into(), to_csv(&summary)?);
        for a in &self.assets {
            out.insert(format!("trace_{}.csv", a.name), to_csv(&a.trace)?);
            out.insert(format!("calibration_{}.csv", a.name), to_csv(&a.calibration)?);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "period",
            "end_step",
            "return_without_costs",
            "capital_without_costs",
            "return_with_costs",
            "capital_with_costs",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.strategy_names.iter().map(|s| format!("w_{s}")));
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.aggregate_rows {
            let mut rec = vec![
                r.period.to_string(),
                r.end_step.to_string(),
                r.return_without_costs.to_string(),
                r.capital_without_costs.to_string(),
                r.return_with_costs.to_string(),
                r.capital_with_costs.to_string(),
            ];
            rec.extend(r.weights.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.insert("aggregate.csv".into(), String::from_utf8(bytes).expect("csv output is utf-8"));
        out.insert("config.toml".into(), self.config.to_toml());
        Ok(out)
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = self.assets.iter().map(|a| a.summary.clone()).collect();
        rows.push(self.aggregate.clone());
        rows
    }
}

/// Writes `files` into `dir`, creating it when missing.
pub fn write_files(files: &BTreeMap<String, String>, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    write_files(&report.files()?, dir)
}
