//! The forecasting game against an outcome stream: observe the signal,
//! forecast, randomize, reveal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Market;
use crate::error::{Error, Result};
use crate::forecaster::{Forecaster, GridPlan, KernelMode};
use crate::grid::{randomize_point, PartitionGrid};
use crate::rules::{CalibrationTrace, CheckingRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub plan: GridPlan,
    pub kernel: KernelMode,
    /// Number of lagged outcomes used as the signal.
    pub signal_dim: usize,
    /// Outcome assumed before the first step, for the lagged signal.
    pub initial: f64,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            plan: GridPlan::Fixed { cells: 20 },
            kernel: KernelMode::Grid,
            signal_dim: 1,
            initial: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameStep {
    pub p: f64,
    pub p_tilde: f64,
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub outcome: f64,
    pub grid: PartitionGrid,
}

/// Lag vector `(v_{i-1}, ..., v_{i-k})` of `history` (which starts with the
/// value before step 1), repeating the oldest value when too short.
pub fn lagged_signal(history: &[f64], k: usize) -> Vec<f64> {
    let n = history.len();
    (1..=k).map(|j| history[n.saturating_sub(j)]).collect()
}

/// Draws randomizations from a seeded stream.
#[derive(Debug, Clone)]
pub struct Randomizer {
    rng: ChaCha8Rng,
}

impl Randomizer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator seeded with `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn draw(&mut self, p: f64, x: &[f64], grid: &PartitionGrid) -> Result<(f64, Vec<f64>)> {
        let r = randomize_point(p, x, grid, &mut self.rng)?;
        Ok((r.p, r.x))
    }
}

/// Plays `n` steps. The market sees only the deterministic forecast.
pub fn play(config: &GameConfig, market: &mut dyn Market, n: usize) -> Result<Vec<GameStep>> {
    if !(0.0..=1.0).contains(&config.initial) {
        return Err(Error::config(format!("initial outcome {} outside [0, 1]", config.initial)));
    }
    let mut f = Forecaster::new(config.plan, config.signal_dim, config.kernel)?;
    let mut rnd = Randomizer::new(config.seed);
    let mut outcomes = Vec::with_capacity(n + 1);
    outcomes.push(config.initial);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let x = lagged_signal(&outcomes, config.signal_dim);
        let p = f.forecast(&x).map_err(|e| e.at_step(i))?;
        let grid = *f.grid();
        let (p_tilde, x_tilde) = rnd.draw(p, &x, &grid).map_err(|e| e.at_step(i))?;
        let outcome = market.next(p);
        f.reveal(outcome).map_err(|e| e.at_step(i))?;
        outcomes.push(outcome);
        out.push(GameStep {
            p,
            p_tilde,
            x,
            x_tilde,
            outcome,
            grid,
        });
    }
    Ok(out)
}

/// Trace of `rule` on the randomized forecasts and signals.
pub fn randomized_trace(steps: &[GameStep], rule: &CheckingRule) -> CalibrationTrace {
    let mut t = CalibrationTrace::new();
    for s in steps {
        t.push(rule, s.p_tilde, &s.x_tilde, s.outcome);
    }
    t
}

/// Trace of `rule` on the deterministic forecasts and signals.
pub fn deterministic_trace(steps: &[GameStep], rule: &CheckingRule) -> CalibrationTrace {
    let mut t = CalibrationTrace::new();
    for s in steps {
        t.push(rule, s.p, &s.x, s.outcome);
    }
    t
}
