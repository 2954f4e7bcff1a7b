//! Command-line surface and command execution.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use calitrade_api::wire::*;
use calitrade_core::backtest::{write_files, SummaryRow};
use calitrade_core::data::MarketSpec;
use calitrade_core::diagnostics::RuleDiagnostic;
use clap::{Args, Parser, Subcommand};

use crate::client::Client;
use crate::config::{build_config, collect_inputs, ConfigFlags};

#[derive(Debug, Parser)]
#[command(name = "calitrade", version, about = "Client for the calibrated forecasting and backtest service")]
pub struct Cli {
    /// Base URL of the service.
    #[arg(long, global = true, env = "CALITRADE_URL", default_value = "http://127.0.0.1:7878")]
    pub server: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a backtest and write the report files.
    Backtest(RunArgs),
    /// Calibration diagnostics of the forecaster on the inputs.
    Calibrate(RunArgs),
    /// Check the epoch schedule conditions for an exponent M.
    ValidateSchedule(ScheduleArgs),
    /// Generate a synthetic price series.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Price CSV (timestamp,price); repeat for several assets.
    #[arg(long = "input", value_name = "CSV")]
    pub inputs: Vec<PathBuf>,
    /// Extra configuration override, KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Schedule exponent M.
    #[arg(long, short = 'm')]
    pub exponent: u32,
    /// Signal dimension k.
    #[arg(long, default_value_t = 1)]
    pub signal_dim: usize,
    /// Last epoch checked.
    #[arg(long, default_value_t = 10)]
    pub s_max: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// iid-uniform, random-walk or drift-segments.
    #[arg(long)]
    pub kind: String,
    /// Number of bars.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub segment: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub price_lo: f64,
    #[arg(long, default_value_t = 200.0)]
    pub price_hi: f64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn market(&self) -> Result<MarketSpec> {
        let given: Vec<(&str, serde_json::Value)> = [
            ("start", self.start.map(Into::into)),
            ("sigma", self.sigma.map(Into::into)),
            ("drift", self.drift.map(Into::into)),
            ("segment", self.segment.map(Into::into)),
            ("noise", self.noise.map(Into::into)),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect();
        let allowed: &[&str] = match self.kind.as_str() {
            "iid-uniform" => &[],
            "random-walk" => &["start", "sigma"],
            "drift-segments" => &["start", "drift", "segment", "noise"],
            "oakes-adversary" => bail!("oakes-adversary reacts to forecasts and cannot be written to a file"),
            other => bail!("unknown market kind {other:?}"),
        };
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), self.kind.clone().into());
        for (k, v) in given {
            if !allowed.contains(&k) {
                bail!("--{k} does not apply to {}", self.kind);
            }
            obj.insert(k.into(), v);
        }
        Ok(serde_json::from_value(obj.into())?)
    }
}

fn pct(v: f64) -> String {
    format!("{v:.4}")
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<24} {:>10} {:>10} {:>14} {:>14} {:>14}\n",
        "asset", "entry_freq", "avg_dur", "return_%", "return_cost_%", "buy_hold_%"
    );
    for r in rows {
        out += &format!(
            "{:<24} {:>10.6} {:>10} {:>14} {:>14} {:>14}\n",
            r.asset,
            r.entry_frequency,
            r.avg_gamble_duration.map_or("-".to_string(), |d| format!("{d:.3}")),
            pct(r.return_without_costs_pct),
            pct(r.return_with_costs_pct),
            pct(r.buy_and_hold_pct),
        );
    }
    out
}

pub fn diagnostics_table(rows: &[RuleDiagnostic]) -> String {
    let mut out = format!(
        "{:<20} {:<18} {:>8} {:>14} {:>14} {:>10}\n",
        "asset", "rule", "selected", "err_random", "err_determ", "bound"
    );
    for r in rows {
        out += &format!(
            "{:<20} {:<18} {:>8} {:>14.6} {:>14.6} {:>10.4}\n",
            r.asset, r.rule, r.selected_randomized, r.error_randomized, r.error_deterministic, r.bound
        );
    }
    out
}

fn run_request(args: &RunArgs) -> Result<RunRequest> {
    let mut config = build_config(args.config.as_deref(), &args.flags, &args.sets)?;
    let files = collect_inputs(&mut config, &args.inputs)?;
    Ok(RunRequest { config, files })
}

/// Runs one command; `Ok(false)` signals a negative result (an invalid
/// schedule) that should exit nonzero.
pub async fn run(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    let client = Client::new(cli.server);
    match cli.command {
        Command::Backtest(args) => {
            let resp = client.backtest(&run_request(&args)?).await?;
            let written = write_files(&resp.files, &args.out)?;
            write!(out, "{}", summary_table(&resp.summary))?;
            writeln!(out, "wrote {} files to {}", written.len(), args.out.display())?;
        }
        Command::Calibrate(args) => {
            let resp = client.calibrate(&run_request(&args)?).await?;
            let written = write_files(&resp.files, &args.out)?;
            write!(out, "{}", diagnostics_table(&resp.rows))?;
            writeln!(out, "wrote {} files to {}", written.len(), args.out.display())?;
        }
        Command::ValidateSchedule(args) => {
            let req = ScheduleRequest {
                exponent: args.exponent,
                signal_dim: args.signal_dim,
                s_max: args.s_max,
            };
            let resp = client.validate_schedule(&req).await?;
            for v in &resp.violations {
                writeln!(out, "epoch {}: {:?} violated ({} > {})", v.epoch, v.constraint, v.lhs, v.rhs)?;
            }
            writeln!(
                out,
                "M = {}, k = {}, epochs 2..={}: {}",
                args.exponent,
                args.signal_dim,
                args.s_max,
                if resp.valid { "valid" } else { "invalid" }
            )?;
            return Ok(resp.valid);
        }
        Command::Synth(args) => {
            let req = SynthRequest {
                market: args.market()?,
                n: args.n,
                seed: args.seed,
                price_lo: args.price_lo,
                price_hi: args.price_hi,
            };
            let resp = client.synth(&req).await?;
            match &args.out {
                Some(path) => {
                    std::fs::write(path, &resp.csv).with_context(|| format!("writing {}", path.display()))?;
                    writeln!(out, "wrote {} bars to {}", args.n, path.display())?;
                }
                None => write!(out, "{}", resp.csv)?,
            }
        }
    }
    Ok(true)
}
