//! Hoeffding–Azuma tail bounds for bounded martingale differences and a
//! seeded simulation harness that checks empirical tails against them.
//!
//! The bounds assume `V_i` lies in `[A_i, A_i + 1]` for a predictable `A_i`.
//! Both bounds are capped at 1.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{randomize_point, rounding_weights, PartitionGrid};
use crate::rules::{expected_selected_residual, CheckingRule};

/// `P(|S_n / n| > t) <= 2 exp(-2 n t^2)`.
pub fn azuma_tail(n: u64, t: f64) -> f64 {
    (2.0 * (-2.0 * n as f64 * t * t).exp()).min(1.0)
}

/// `P(sup_{k >= n} |S_k / k| > t) <= t^{-2} exp(-2 n t^2)`.
pub fn maximal_tail(n: u64, t: f64) -> f64 {
    ((-2.0 * n as f64 * t * t).exp() / (t * t)).min(1.0)
}

/// Smallest `t` with `azuma_tail(n, t) <= 1 - confidence`.
pub fn azuma_deviation(n: u64, confidence: f64) -> f64 {
    let alpha = (1.0 - confidence).clamp(f64::MIN_POSITIVE, 1.0);
    ((2.0 / alpha).ln() / (2.0 * n.max(1) as f64)).sqrt()
}

/// One martingale difference and the lower end of its declared unit range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    pub value: f64,
    pub lower: f64,
}

/// Source of martingale-difference sequences. Implementations must produce
/// increments with conditional mean zero given the past.
pub trait DifferenceGenerator: Sync {
    fn next(&self, step: usize, rng: &mut dyn RngCore) -> Result<Increment>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroIncrements;

impl DifferenceGenerator for ZeroIncrements {
    fn next(&self, _step: usize, _rng: &mut dyn RngCore) -> Result<Increment> {
        Ok(Increment {
            value: 0.0,
            lower: -0.5,
        })
    }
}

/// `+1/2` or `-1/2` with equal probability.
#[derive(Debug, Clone, Copy, Default)]
pub struct FairCoin;

impl DifferenceGenerator for FairCoin {
    fn next(&self, _step: usize, rng: &mut dyn RngCore) -> Result<Increment> {
        let value = if rng.next_u32() & 1 == 1 { 0.5 } else { -0.5 };
        Ok(Increment { value, lower: -0.5 })
    }
}

#[derive(Debug, Clone)]
struct HarvestStep {
    p: f64,
    x: Vec<f64>,
    outcome: f64,
    grid: PartitionGrid,
    expected: f64,
    lower: f64,
}

/// Centred calibration residuals `I(p~, x~)(S - p~) - E[..]` of a forecasting
/// run. The deterministic forecasts and outcomes are fixed; each trial
/// redraws the randomization.
#[derive(Debug, Clone)]
pub struct CalibrationResiduals {
    rule: CheckingRule,
    steps: Vec<HarvestStep>,
}

impl CalibrationResiduals {
    /// `steps` holds `(p, x, outcome, grid)` for each step of the run.
    pub fn new(rule: CheckingRule, steps: impl IntoIterator<Item = (f64, Vec<f64>, f64, PartitionGrid)>) -> Result<Self> {
        let steps = steps
            .into_iter()
            .map(|(p, x, outcome, grid)| {
                let expected = expected_selected_residual(&rule, p, &x, outcome, &grid)?;
                let mut lo = f64::INFINITY;
                for (i, _) in rounding_weights(p, &grid)?.support() {
                    let v1 = grid.endpoint(i);
                    lo = lo.min(outcome - v1).min(0.0);
                }
                Ok(HarvestStep {
                    p,
                    x,
                    outcome,
                    grid,
                    expected,
                    lower: lo - expected,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rule, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl DifferenceGenerator for CalibrationResiduals {
    fn next(&self, step: usize, rng: &mut dyn RngCore) -> Result<Increment> {
        let h = self
            .steps
            .get(step)
            .ok_or_else(|| Error::config(format!("residual harvest has only {} steps", self.steps.len())))?;
        let r = randomize_point(h.p, &h.x, &h.grid, rng)?;
        let raw = if self.rule.selects(r.p, &r.x) {
            h.outcome - r.p
        } else {
            0.0
        };
        Ok(Increment {
            value: raw - h.expected,
            lower: h.lower,
        })
    }
}

/// Horizon and generator of a simulated martingale.
pub struct MartingaleSpec<'a> {
    pub n: usize,
    pub generator: &'a dyn DifferenceGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub t: f64,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial standard error at the bound, `sqrt(b (1 - b) / trials)`.
    pub std_error: f64,
}

impl TailEstimate {
    /// Frequency within `sigmas` standard errors of the bound.
    pub fn within(&self, sigmas: f64) -> bool {
        self.frequency <= self.bound + sigmas * self.std_error
    }
}

fn trial_mean(spec: &MartingaleSpec<'_>, seed: u64, trial: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut sum = 0.0;
    for step in 0..spec.n {
        let inc = spec.generator.next(step, &mut rng)?;
        if !(inc.value >= inc.lower - 1e-12 && inc.value <= inc.lower + 1.0 + 1e-12) {
            return Err(Error::Contract {
                step,
                value: inc.value,
                lower: inc.lower,
            });
        }
        sum += inc.value;
    }
    Ok(sum / spec.n.max(1) as f64)
}

/// Empirical `P(|S_n / n| > t)` for each `t`, from `trials` seeded trials.
/// Trial `j` uses stream `j` of the generator seeded with `seed`.
pub fn empirical_tails(spec: &MartingaleSpec<'_>, ts: &[f64], trials: u64, seed: u64) -> Result<Vec<TailEstimate>> {
    if trials == 0 {
        return Err(Error::config("at least one trial is required"));
    }
    let means = (0..trials)
        .into_par_iter()
        .map(|j| trial_mean(spec, seed, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(ts
        .iter()
        .map(|&t| {
            let hits = means.iter().filter(|m| m.abs() > t).count();
            let bound = azuma_tail(spec.n as u64, t);
            TailEstimate {
                t,
                frequency: hits as f64 / trials as f64,
                bound,
                std_error: (bound * (1.0 - bound) / trials as f64).sqrt(),
            }
        })
        .collect())
}

pub fn empirical_tail(spec: &MartingaleSpec<'_>, t: f64, trials: u64, seed: u64) -> Result<TailEstimate> {
    Ok(empirical_tails(spec, &[t], trials, seed)?[0])
}
