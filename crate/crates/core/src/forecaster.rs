//! Deterministic forecaster driven by the kernel score equation.
//!
//! For every cell `v` of `V^{k+1}` the state keeps
//! `mu(v) = sum_i W_v(Q_i) (S_i - p_i)`. The score of a candidate forecast `p`
//! for signal `x` is `sum_v W_v(p, x) mu(v)`, which equals the kernel sum
//! `sum_i K((p, x), Q_i) (S_i - p_i)`. The forecast is the leftmost root of
//! the score on `[0, 1]`, or `1` / `0` when the score keeps a strict sign.
//!
//! With the grid kernel the score is piecewise linear in `p` with breaks at
//! grid endpoints, so the root is found exactly by interpolating the values
//! at the endpoints. With the cosine kernel `cos(pi (p - p'))` the score is
//! `A cos(pi p) + B sin(pi p)` and the root is closed form.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::grid::{joint_weights, rounding_weights, CellCodec, ForecastPoint, PartitionGrid};
use crate::schedule::EpochSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// Dot product of the joint rounding distributions.
    #[default]
    Grid,
    /// `cos(pi (p - p'))`, forecast coordinate only.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub signal: Vec<f64>,
    pub outcome: f64,
}

#[derive(Debug, Clone)]
pub struct ForecasterState {
    grid: PartitionGrid,
    dim: usize,
    kernel: KernelMode,
    codec: CellCodec,
    mu: BTreeMap<u64, f64>,
    cos_sum: f64,
    sin_sum: f64,
    history: Vec<Observation>,
    det_forecasts: Vec<f64>,
    epoch: u64,
}

impl ForecasterState {
    pub fn new(grid: PartitionGrid, dim: usize, kernel: KernelMode) -> Result<Self> {
        Ok(Self {
            codec: CellCodec::new(&grid, dim)?,
            grid,
            dim,
            kernel,
            mu: BTreeMap::new(),
            cos_sum: 0.0,
            sin_sum: 0.0,
            history: Vec::new(),
            det_forecasts: Vec::new(),
            epoch: 1,
        })
    }

    /// Number of completed updates.
    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn grid(&self) -> &PartitionGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> KernelMode {
        self.kernel
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn det_forecasts(&self) -> &[f64] {
        &self.det_forecasts
    }

    pub fn accumulator(&self, cell: &[u32]) -> f64 {
        if cell.len() != self.dim + 1 {
            return 0.0;
        }
        let mut key = 0u64;
        let mut place = 1u64;
        for &i in &cell[1..] {
            key += i as u64 * place;
            place *= self.grid.len() as u64;
        }
        self.mu
            .get(&self.codec.key(cell[0], key))
            .copied()
            .unwrap_or(0.0)
    }

    /// Nonzero accumulators keyed by cell index tuple.
    pub fn accumulators(&self) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        self.mu
            .iter()
            .map(|(&key, &m)| (self.codec.decode(key, self.dim), m))
    }

    /// `sum_v mu(v)^2`; at most the number of updates.
    pub fn energy(&self) -> f64 {
        self.mu.values().map(|m| m * m).sum()
    }

    fn check_signal(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        x.iter().try_for_each(|&v| check_unit("signal", v))
    }

    pub fn score(&self, p: f64, x: &[f64]) -> Result<f64> {
        self.check_signal(x)?;
        check_unit("forecast", p)?;
        match self.kernel {
            KernelMode::Grid => {
                let signal = self.codec.signal_weights(x, &self.grid)?;
                let mut total = 0.0;
                for (j, wp) in rounding_weights(p, &self.grid)?.support() {
                    for &(xk, wx) in &signal {
                        if let Some(m) = self.mu.get(&self.codec.key(j, xk)) {
                            total += wp * wx * m;
                        }
                    }
                }
                Ok(total)
            }
            KernelMode::Cosine => Ok(self.cos_sum * (PI * p).cos() + self.sin_sum * (PI * p).sin()),
        }
    }

    /// Score at every grid endpoint for signal `x`.
    pub fn node_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_signal(x)?;
        let signal = self.codec.signal_weights(x, &self.grid)?;
        Ok((0..self.grid.len())
            .map(|j| {
                signal
                    .iter()
                    .filter_map(|&(xk, wx)| self.mu.get(&self.codec.key(j, xk)).map(|m| wx * m))
                    .sum()
            })
            .collect())
    }

    /// Deterministic forecast for signal `x`.
    pub fn solve(&self, x: &[f64]) -> Result<f64> {
        self.check_signal(x)?;
        if self.history.is_empty() {
            return Ok(0.5);
        }
        match self.kernel {
            KernelMode::Grid => Ok(leftmost_root(&self.node_scores(x)?, &self.grid)),
            KernelMode::Cosine => Ok(cosine_root(self.cos_sum, self.sin_sum)),
        }
    }

    /// Adds the residual of forecast `p` against `outcome`.
    pub fn update(&mut self, p: f64, x: &[f64], outcome: f64) -> Result<()> {
        self.check_signal(x)?;
        check_unit("forecast", p)?;
        check_unit("outcome", outcome)?;
        let r = outcome - p;
        match self.kernel {
            KernelMode::Grid => {
                if r != 0.0 {
                    let signal = self.codec.signal_weights(x, &self.grid)?;
                    for (j, wp) in rounding_weights(p, &self.grid)?.support() {
                        for &(xk, wx) in &signal {
                            *self.mu.entry(self.codec.key(j, xk)).or_insert(0.0) += wp * wx * r;
                        }
                    }
                }
            }
            KernelMode::Cosine => {
                self.cos_sum += r * (PI * p).cos();
                self.sin_sum += r * (PI * p).sin();
            }
        }
        self.history.push(Observation {
            signal: x.to_vec(),
            outcome,
        });
        self.det_forecasts.push(p);
        Ok(())
    }

    /// Fresh state on `grid` rebuilt by rerunning the forecaster over the
    /// stored history. The replayed forecasts only feed the accumulators.
    pub fn replay(&self, grid: PartitionGrid, epoch: u64) -> Result<Self> {
        let mut fresh = Self::new(grid, self.dim, self.kernel)?;
        fresh.epoch = epoch;
        for obs in &self.history {
            let p = fresh.solve(&obs.signal)?;
            fresh.update(p, &obs.signal, obs.outcome)?;
        }
        Ok(fresh)
    }
}

/// Leftmost zero of the piecewise-linear interpolation of `nodes` on `grid`;
/// `1` if every node is strictly positive, `0` if every node is strictly
/// negative.
pub(crate) fn leftmost_root(nodes: &[f64], grid: &PartitionGrid) -> f64 {
    if nodes[0] == 0.0 {
        return 0.0;
    }
    for (j, pair) in nodes.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if b == 0.0 {
            return grid.endpoint(j as u32 + 1);
        }
        if (a > 0.0) != (b > 0.0) {
            let t = a / (a - b);
            return (grid.endpoint(j as u32) + t * grid.delta()).clamp(0.0, 1.0);
        }
    }
    if nodes[0] > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Leftmost zero on `[0, 1]` of `a cos(pi p) + b sin(pi p)`.
pub(crate) fn cosine_root(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.5;
    }
    if a == 0.0 {
        return 0.0;
    }
    let mut theta = a.atan2(-b);
    if theta < 0.0 {
        theta += PI;
    }
    (theta / PI).clamp(0.0, 1.0)
}

pub fn kernel_eval(
    q: &ForecastPoint,
    q2: &ForecastPoint,
    grid: &PartitionGrid,
    mode: KernelMode,
) -> Result<f64> {
    match mode {
        KernelMode::Grid => {
            let a = joint_weights(q, grid)?;
            let b = joint_weights(q2, grid)?;
            Ok(a.entries()
                .iter()
                .map(|(cell, w)| w * b.weight(cell))
                .sum())
        }
        KernelMode::Cosine => {
            check_unit("forecast", q.p)?;
            check_unit("forecast", q2.p)?;
            Ok((PI * (q.p - q2.p)).cos())
        }
    }
}

pub fn score_function(p: f64, x: &[f64], state: &ForecasterState) -> Result<f64> {
    state.score(p, x)
}

pub fn solve_forecast(x: &[f64], state: &ForecasterState) -> Result<f64> {
    state.solve(x)
}

pub fn update_state(state: &mut ForecasterState, p: f64, x: &[f64], outcome: f64) -> Result<()> {
    state.update(p, x, outcome)
}

/// Moves `state` to the next epoch of `schedule` by replaying its history on
/// the finer grid.
pub fn advance_epoch(state: &ForecasterState, schedule: &EpochSchedule) -> Result<ForecasterState> {
    let next = state.epoch + 1;
    state.replay(schedule.grid(next)?, next)
}

/// How the grid step is chosen over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum GridPlan {
    Fixed { cells: u32 },
    Epochs { exponent: u32 },
}

impl GridPlan {
    pub fn fixed_delta(delta: f64) -> Result<Self> {
        Ok(GridPlan::Fixed {
            cells: PartitionGrid::from_delta(delta)?.cells(),
        })
    }
}

/// Runs the forecast/reveal protocol and advances epochs at their boundaries.
#[derive(Debug, Clone)]
pub struct Forecaster {
    state: ForecasterState,
    schedule: Option<EpochSchedule>,
    pending: Option<(f64, Vec<f64>)>,
}

impl Forecaster {
    pub fn new(plan: GridPlan, dim: usize, kernel: KernelMode) -> Result<Self> {
        let (grid, schedule) = match plan {
            GridPlan::Fixed { cells } => (PartitionGrid::new(cells)?, None),
            GridPlan::Epochs { exponent } => {
                let sch = EpochSchedule::new(exponent)?;
                (sch.grid(1)?, Some(sch))
            }
        };
        Ok(Self {
            state: ForecasterState::new(grid, dim, kernel)?,
            schedule,
            pending: None,
        })
    }

    pub fn state(&self) -> &ForecasterState {
        &self.state
    }

    pub fn grid(&self) -> &PartitionGrid {
        self.state.grid()
    }

    pub fn pending(&self) -> Option<f64> {
        self.pending.as_ref().map(|(p, _)| *p)
    }

    /// Issues the deterministic forecast for the next step.
    pub fn forecast(&mut self, x: &[f64]) -> Result<f64> {
        if self.pending.is_some() {
            return Err(Error::Protocol("forecast already issued for this step"));
        }
        if let Some(sch) = self.schedule {
            let n = self.state.step() as u64 + 1;
            while sch.start(self.state.epoch() + 1) <= n {
                self.state = advance_epoch(&self.state, &sch)?;
            }
        }
        let p = self.state.solve(x)?;
        self.pending = Some((p, x.to_vec()));
        Ok(p)
    }

    /// Reveals the outcome of the step whose forecast is pending.
    pub fn reveal(&mut self, outcome: f64) -> Result<()> {
        let (p, x) = self
            .pending
            .take()
            .ok_or(Error::Protocol("outcome revealed before a forecast was issued"))?;
        if let Err(e) = self.state.update(p, &x, outcome) {
            self.pending = Some((p, x));
            return Err(e);
        }
        Ok(())
    }
}
