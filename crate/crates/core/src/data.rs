//! Price loading, rescaling into `[0, 1]`, and synthetic markets.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw price bars with their timestamps, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub timestamps: Vec<String>,
    pub raw: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<String>, raw: Vec<f64>) -> Result<Self> {
        if timestamps.len() != raw.len() {
            return Err(Error::config("timestamp and price columns differ in length"));
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { timestamps, raw })
    }

    /// Series with zero-padded step numbers as timestamps.
    pub fn from_values(raw: Vec<f64>) -> Result<Self> {
        let width = raw.len().to_string().len().max(6);
        let timestamps = (1..=raw.len()).map(|i| format!("{i:0width$}")).collect();
        Self::new(timestamps, raw)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// `timestamp,price` text with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["timestamp", "price"]).map_err(csv_io)?;
        for (t, p) in self.timestamps.iter().zip(&self.raw) {
            w.write_record([t.as_str(), &p.to_string()]).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let file = std::fs::File::open(path)?;
    parse_prices(file)
}

/// Parses `timestamp,price` text. Line numbers in errors count the header as
/// line 1. Timestamps are compared as strings and must not decrease.
pub fn parse_prices(input: impl Read) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| parse_error(1, e))?.clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "price" {
        if header.is_empty() {
            return Err(Error::EmptyInput);
        }
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header \"timestamp,price\", found {:?}", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut timestamps: Vec<String> = Vec::new();
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let price: f64 = rec[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("price {:?} is not a number", &rec[1]),
        })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("price {price} must be positive and finite"),
            });
        }
        if let Some(prev) = timestamps.last() {
            if rec[0] < **prev {
                return Err(Error::Ordering {
                    line,
                    timestamp: rec[0].to_string(),
                });
            }
        }
        timestamps.push(rec[0].to_string());
        raw.push(price);
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(PriceSeries { timestamps, raw })
}

fn parse_error(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Configured bounds; prices outside them are an error.
    #[default]
    Strict,
    /// Configured bounds; prices outside them are clamped.
    Clamp,
    /// Bounds taken from the series minimum and maximum.
    Auto,
}

/// A price series mapped into `[0, 1]`. `scaled` has one more entry than
/// `raw`: `scaled[0]` duplicates `scaled[1]` so that `S_0 = S_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSeries {
    pub timestamps: Vec<String>,
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl ScaledSeries {
    /// Number of price bars, which is also the number of trading steps.
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn unscale(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

pub fn rescale(series: &PriceSeries, mode: ScaleMode, lo: f64, hi: f64) -> Result<ScaledSeries> {
    if series.raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = match mode {
        ScaleMode::Auto => series
            .raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        _ => (lo, hi),
    };
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::config(format!("scale bounds [{lo}, {hi}] are degenerate")));
    }
    let mut scaled = Vec::with_capacity(series.raw.len() + 1);
    for (row, &v) in series.raw.iter().enumerate() {
        if mode == ScaleMode::Strict && !(lo..=hi).contains(&v) {
            return Err(Error::Range { row: row + 1, value: v, lo, hi });
        }
        scaled.push(((v - lo) / (hi - lo)).clamp(0.0, 1.0));
    }
    scaled.insert(0, scaled[0]);
    Ok(ScaledSeries {
        timestamps: series.timestamps.clone(),
        raw: series.raw.clone(),
        scaled,
        lo,
        hi,
    })
}

/// Synthetic outcome generators on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MarketSpec {
    IidUniform,
    /// Gaussian steps of size `sigma`, reflected at 0 and 1.
    RandomWalk {
        #[serde(default = "half")]
        start: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// Alternating up and down segments of `segment` steps with per-step
    /// drift `drift` and Gaussian noise `noise`, reflected at 0 and 1.
    DriftSegments {
        #[serde(default = "half")]
        start: f64,
        #[serde(default = "default_drift")]
        drift: f64,
        #[serde(default = "default_segment")]
        segment: u64,
        #[serde(default)]
        noise: f64,
    },
    /// Outcome 0 when the forecast exceeds 1/2, else 1.
    OakesAdversary,
}

fn half() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    0.01
}
fn default_drift() -> f64 {
    0.002
}
fn default_segment() -> u64 {
    500
}

impl MarketSpec {
    /// Whether outcomes depend on the forecasts.
    pub fn is_reactive(&self) -> bool {
        matches!(self, MarketSpec::OakesAdversary)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        match *self {
            MarketSpec::RandomWalk { start, sigma } => {
                if !(0.0..=1.0).contains(&start) {
                    return bad(format!("random-walk start {start} outside [0, 1]"));
                }
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return bad(format!("random-walk sigma {sigma} must be nonnegative"));
                }
            }
            MarketSpec::DriftSegments { start, drift, segment, noise } => {
                if !(0.0..=1.0).contains(&start) {
                    return bad(format!("drift-segments start {start} outside [0, 1]"));
                }
                if segment == 0 || !drift.is_finite() || !(noise >= 0.0 && noise.is_finite()) {
                    return bad("drift-segments needs segment >= 1, finite drift, noise >= 0".into());
                }
            }
            MarketSpec::IidUniform | MarketSpec::OakesAdversary => {}
        }
        Ok(())
    }

    pub fn parse_kind(kind: &str) -> Result<Self> {
        Ok(match kind {
            "iid-uniform" => MarketSpec::IidUniform,
            "random-walk" => MarketSpec::RandomWalk {
                start: half(),
                sigma: default_sigma(),
            },
            "drift-segments" => MarketSpec::DriftSegments {
                start: half(),
                drift: default_drift(),
                segment: default_segment(),
                noise: 0.0,
            },
            "oakes-adversary" => MarketSpec::OakesAdversary,
            other => return Err(Error::config(format!("unknown market kind {other:?}"))),
        })
    }
}

/// An outcome stream. Reactive markets see the deterministic forecast of
/// the step, never its randomization.
pub trait Market: Send {
    fn next(&mut self, forecast: f64) -> f64;
}

/// Folds `v` back into `[0, 1]` by reflection at both ends.
pub fn reflect(v: f64) -> f64 {
    let m = v.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

struct IidUniform(ChaCha8Rng);

impl Market for IidUniform {
    fn next(&mut self, _: f64) -> f64 {
        self.0.random::<f64>()
    }
}

struct RandomWalk {
    rng: ChaCha8Rng,
    level: f64,
    step: Normal<f64>,
}

impl Market for RandomWalk {
    fn next(&mut self, _: f64) -> f64 {
        self.level = reflect(self.level + self.step.sample(&mut self.rng));
        self.level
    }
}

struct DriftSegments {
    rng: ChaCha8Rng,
    level: f64,
    drift: f64,
    segment: u64,
    noise: Normal<f64>,
    t: u64,
}

impl Market for DriftSegments {
    fn next(&mut self, _: f64) -> f64 {
        let sign = if (self.t / self.segment).is_multiple_of(2) { 1.0 } else { -1.0 };
        self.t += 1;
        self.level = reflect(self.level + sign * self.drift + self.noise.sample(&mut self.rng));
        self.level
    }
}

struct OakesAdversary;

impl Market for OakesAdversary {
    fn next(&mut self, forecast: f64) -> f64 {
        if forecast > 0.5 {
            0.0
        } else {
            1.0
        }
    }
}

pub fn synth_market(spec: &MarketSpec, seed: u64) -> Result<Box<dyn Market>> {
    spec.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::config(e.to_string()));
    Ok(match *spec {
        MarketSpec::IidUniform => Box::new(IidUniform(rng)),
        MarketSpec::RandomWalk { start, sigma } => Box::new(RandomWalk {
            rng,
            level: start,
            step: normal(sigma)?,
        }),
        MarketSpec::DriftSegments { start, drift, segment, noise } => Box::new(DriftSegments {
            rng,
            level: start,
            drift,
            segment,
            noise: normal(noise)?,
            t: 0,
        }),
        MarketSpec::OakesAdversary => Box::new(OakesAdversary),
    })
}

/// `n` outcomes of a non-reactive market.
pub fn synth_values(spec: &MarketSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if spec.is_reactive() {
        return Err(Error::config("a reactive market needs forecasts and cannot be pre-generated"));
    }
    let mut m = synth_market(spec, seed)?;
    Ok((0..n).map(|_| m.next(0.5)).collect())
}

/// Raw price series `lo + (hi - lo) S` for a non-reactive market.
pub fn synth_series(spec: &MarketSpec, n: usize, seed: u64, lo: f64, hi: f64) -> Result<PriceSeries> {
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::config(format!("synthetic price bounds [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let values = synth_values(spec, n, seed)?;
    PriceSeries::from_values(values.into_iter().map(|v| lo + (hi - lo) * v).collect())
}
