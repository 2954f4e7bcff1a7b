//! Builds a backtest configuration from an optional TOML file, per-field
//! flags and `--set key=value` overrides, in that order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use calitrade_api::wire::InputFile;
use calitrade_core::backtest::BacktestConfig;

macro_rules! config_flags {
    ($($field:ident : $ty:ty => $doc:literal),* $(,)?) => {
        /// One optional flag per configuration field.
        #[derive(Debug, Default, Clone, clap::Args)]
        pub struct ConfigFlags {
            $(
                #[doc = $doc]
                #[arg(long, help_heading = "Configuration")]
                pub $field: Option<$ty>,
            )*
        }

        impl ConfigFlags {
            pub fn overrides(&self) -> Result<Vec<(&'static str, toml::Value)>> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        let value = toml::Value::try_from(v.clone())
                            .with_context(|| format!("--{} value {:?} is out of range", stringify!($field).replace('_', "-"), v))?;
                        out.push((stringify!($field), value));
                    }
                )*
                Ok(out)
            }
        }
    };
}

config_flags! {
    synth_kind: String => "Synthetic market: iid-uniform, random-walk or drift-segments",
    synth_assets: u64 => "Number of synthetic assets",
    synth_n: u64 => "Bars per synthetic asset",
    synth_seed: u64 => "Seed of the first synthetic asset",
    synth_start: f64 => "Starting level of synthetic paths on [0, 1]",
    synth_sigma: f64 => "Random-walk step size",
    synth_drift: f64 => "Drift per step of drift segments",
    synth_segment: u64 => "Steps per drift segment",
    synth_noise: f64 => "Noise added to drift segments",
    price_lo: f64 => "Lowest synthetic price",
    price_hi: f64 => "Highest synthetic price",
    scale: String => "Rescaling of prices to [0, 1]: strict, clamp or auto",
    scale_lo: f64 => "Price mapped to 0",
    scale_hi: f64 => "Price mapped to 1",
    k: u64 => "Number of lagged prices in the signal",
    grid: String => "Grid plan: fixed or epoch",
    delta: f64 => "Grid step for the fixed plan",
    exponent: u64 => "Schedule exponent M for the epoch plan",
    kernel: String => "Kernel: grid or cosine",
    threshold: String => "Entry threshold: fixed or sigma",
    epsilon: f64 => "Fixed entry threshold",
    epsilon_prime: f64 => "Multiplier of the rolling standard deviation",
    window: u64 => "Rolling window for the sigma threshold",
    epsilon_floor: f64 => "Lower bound of the sigma threshold",
    strategy: String => "Strategy: simple or limited-risk",
    delta_fraction: f64 => "Fraction of capital invested per entry (limited-risk)",
    initial_capital: f64 => "Initial capital",
    execution: String => "Execution: per-step or gamble",
    tx_cost: f64 => "Transaction cost rate per side",
    cost_sides: u64 => "Charged sides per round trip (1 or 2)",
    eta: f64 => "Learning rate of the strategy aggregator",
    period: u64 => "Bars per aggregation period",
    confidence: f64 => "Confidence level of the calibration bound",
    seed: u64 => "Seed of the randomization",
}

/// Parses `key=value`; the value is read as TOML and falls back to a string.
pub fn parse_set(item: &str) -> Result<(String, toml::Value)> {
    let Some((key, raw)) = item.split_once('=') else {
        bail!("--set expects KEY=VALUE, got {item:?}");
    };
    let key = key.trim().replace('-', "_");
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

/// Merged configuration. Input paths in the file are resolved against the
/// file's directory.
pub fn build_config(file: Option<&Path>, flags: &ConfigFlags, sets: &[String]) -> Result<BacktestConfig> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => toml::Table::new(),
    };
    for (key, value) in flags.overrides()? {
        table.insert(key.to_string(), value);
    }
    for item in sets {
        let (key, value) = parse_set(item)?;
        table.insert(key, value);
    }
    let mut config = BacktestConfig::from_toml(&toml::to_string(&table)?)?;
    if let Some(dir) = file.and_then(Path::parent) {
        config.inputs = config.inputs.iter().map(|p| dir.join(p)).collect();
    }
    Ok(config)
}

/// Reads every input named in the config or on the command line and moves
/// them into the request; the service never reads local paths.
pub fn collect_inputs(config: &mut BacktestConfig, extra: &[PathBuf]) -> Result<Vec<InputFile>> {
    let paths: Vec<PathBuf> = config.inputs.drain(..).chain(extra.iter().cloned()).collect();
    paths
        .iter()
        .map(|p| {
            let csv = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .with_context(|| format!("{} has no file name", p.display()))?;
            Ok(InputFile { name, csv })
        })
        .collect()
}
