//! Uniform partition of `[0, 1]` and the randomized rounding built on it.
//!
//! A point `p` between two neighbouring endpoints is written as the convex
//! combination of those endpoints; the coefficients are the probabilities
//! with which `p` is rounded. Signals are rounded coordinate-wise and the
//! product of the per-coordinate weights gives a distribution over the cells
//! of `V^{k+1}` with at most `2^{k+1}` atoms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Fractional offsets closer than this to an endpoint snap onto it, so that
/// values computed as `i / K` are recognised as grid points.
const SNAP: f64 = 1e-12;

/// Endpoints `i / K`, `i = 0..=K`, of a partition of `[0, 1]` into `K` equal
/// subintervals. The step is always the reciprocal of an integer so that
/// endpoints are rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionGrid {
    cells: u32,
}

impl PartitionGrid {
    pub fn new(cells: u32) -> Result<Self> {
        if cells == 0 {
            return Err(Error::config("grid must have at least one subinterval"));
        }
        Ok(Self { cells })
    }

    /// Builds the grid whose step is `delta`; `1 / delta` must be an integer.
    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::config(format!("grid step {delta} must lie in (0, 1]")));
        }
        let cells = (1.0 / delta).round();
        if (cells * delta - 1.0).abs() > 1e-9 || cells > u32::MAX as f64 {
            return Err(Error::config(format!(
                "grid step {delta} is not the reciprocal of an integer"
            )));
        }
        Self::new(cells as u32)
    }

    /// Number of subintervals `K`.
    pub fn cells(&self) -> u32 {
        self.cells
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn endpoint(&self, index: u32) -> f64 {
        debug_assert!(index <= self.cells);
        index as f64 / self.cells as f64
    }

    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(|i| self.endpoint(i))
    }

    /// Number of endpoints, `K + 1`.
    pub fn len(&self) -> u32 {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The two bracketing endpoints of a value together with their rounding
/// probabilities. On-grid values carry a single endpoint with weight 1, in
/// which case `upper_index == lower_index` and `upper_weight == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub lower_index: u32,
    pub lower_weight: f64,
    pub upper_index: u32,
    pub upper_weight: f64,
}

impl WeightPair {
    pub fn is_degenerate(&self) -> bool {
        self.upper_weight == 0.0
    }

    /// Endpoints with nonzero weight, lower first.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> {
        let upper = (!self.is_degenerate()).then_some((self.upper_index, self.upper_weight));
        std::iter::once((self.lower_index, self.lower_weight)).chain(upper)
    }

    /// Picks an endpoint from a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> u32 {
        if u < self.upper_weight {
            self.upper_index
        } else {
            self.lower_index
        }
    }

    /// Variance of the rounded value, `w_lo * w_up * delta^2`.
    pub fn variance(&self, grid: &PartitionGrid) -> f64 {
        let d = grid.delta();
        self.lower_weight * self.upper_weight * d * d
    }
}

/// Linear-interpolation weights of `value` on its two neighbouring endpoints.
pub fn rounding_weights(value: f64, grid: &PartitionGrid) -> Result<WeightPair> {
    check_unit("value", value)?;
    let scaled = value * grid.cells as f64;
    let lower = (scaled.floor() as u32).min(grid.cells);
    let frac = scaled - lower as f64;
    if frac <= SNAP || frac >= 1.0 - SNAP || lower == grid.cells {
        let on = if frac >= 1.0 - SNAP { lower + 1 } else { lower };
        return Ok(WeightPair {
            lower_index: on,
            lower_weight: 1.0,
            upper_index: on,
            upper_weight: 0.0,
        });
    }
    Ok(WeightPair {
        lower_index: lower,
        lower_weight: 1.0 - frac,
        upper_index: lower + 1,
        upper_weight: frac,
    })
}

/// Deterministic forecast together with the signal it was issued for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub p: f64,
    pub x: Vec<f64>,
}

impl ForecastPoint {
    pub fn new(p: f64, x: impl Into<Vec<f64>>) -> Self {
        Self { p, x: x.into() }
    }
}

/// Sparse distribution `W_v(q)` over cells of `V^{k+1}`; a cell is the tuple
/// of endpoint indices `(p, x_1, .., x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointWeights {
    entries: Vec<(Vec<u32>, f64)>,
}

impl JointWeights {
    pub fn entries(&self) -> &[(Vec<u32>, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    pub fn weight(&self, cell: &[u32]) -> f64 {
        self.entries
            .iter()
            .find(|(c, _)| c.as_slice() == cell)
            .map_or(0.0, |(_, w)| *w)
    }
}

pub fn joint_weights(q: &ForecastPoint, grid: &PartitionGrid) -> Result<JointWeights> {
    let mut entries: Vec<(Vec<u32>, f64)> = rounding_weights(q.p, grid)?
        .support()
        .map(|(i, w)| (vec![i], w))
        .collect();
    for &xj in &q.x {
        let pair = rounding_weights(xj, grid)?;
        entries = entries
            .into_iter()
            .flat_map(|(cell, w)| {
                pair.support().map(move |(i, wj)| {
                    let mut c = cell.clone();
                    c.push(i);
                    (c, w * wj)
                })
            })
            .collect();
    }
    Ok(JointWeights { entries })
}

/// Packs a cell index tuple into a single `u64` key, base `K + 1`, with the
/// forecast coordinate most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CellCodec {
    base: u64,
    signal_span: u64,
}

impl CellCodec {
    pub(crate) fn new(grid: &PartitionGrid, dim: usize) -> Result<Self> {
        let base = grid.len() as u64;
        let too_fine = || Error::config(format!("grid with {} cells is too fine for signal dimension {dim}", grid.cells));
        let signal_span = base.checked_pow(dim as u32).ok_or_else(too_fine)?;
        signal_span.checked_mul(base).ok_or_else(too_fine)?;
        Ok(Self { base, signal_span })
    }

    pub(crate) fn key(&self, p_index: u32, signal_key: u64) -> u64 {
        p_index as u64 * self.signal_span + signal_key
    }

    /// Distribution of the rounded signal as `(signal key, weight)` pairs.
    pub(crate) fn signal_weights(&self, x: &[f64], grid: &PartitionGrid) -> Result<Vec<(u64, f64)>> {
        let mut out = vec![(0u64, 1.0f64)];
        let mut place = 1u64;
        for &xj in x {
            let pair = rounding_weights(xj, grid)?;
            out = out
                .into_iter()
                .flat_map(|(key, w)| pair.support().map(move |(i, wj)| (key + i as u64 * place, w * wj)))
                .collect();
            place *= self.base;
        }
        Ok(out)
    }

    pub(crate) fn decode(&self, key: u64, dim: usize) -> Vec<u32> {
        let mut cell = Vec::with_capacity(dim + 1);
        cell.push((key / self.signal_span) as u32);
        let mut rest = key % self.signal_span;
        for _ in 0..dim {
            cell.push((rest % self.base) as u32);
            rest /= self.base;
        }
        cell
    }
}

/// A randomized forecast/signal pair, values and endpoint indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedPoint {
    pub p: f64,
    pub p_index: u32,
    pub x: Vec<f64>,
    pub x_index: Vec<u32>,
}

/// Rounds `p` and each signal coordinate independently.
///
/// Exactly one uniform draw is consumed per coordinate, forecast first and
/// then signal coordinates in index order, whether or not the coordinate is
/// already on the grid. This keeps the random stream aligned across runs.
pub fn randomize_point<R: Rng + ?Sized>(
    p: f64,
    x: &[f64],
    grid: &PartitionGrid,
    rng: &mut R,
) -> Result<RandomizedPoint> {
    let p_pair = rounding_weights(p, grid)?;
    let p_index = p_pair.pick(rng.random());
    let mut x_index = Vec::with_capacity(x.len());
    for &xj in x {
        let pair = rounding_weights(xj, grid)?;
        x_index.push(pair.pick(rng.random()));
    }
    Ok(RandomizedPoint {
        p: grid.endpoint(p_index),
        p_index,
        x: x_index.iter().map(|&i| grid.endpoint(i)).collect(),
        x_index,
    })
}
