//! Epoch schedule for driving the grid step to zero.
//!
//! Epoch `s` covers steps `n_s <= n < n_{s+1}` with `n_s = s^M` and grid step
//! `Delta_s = s^{-M/4}`. When `M` is not a multiple of four the step is
//! rounded down to the reciprocal of the next integer so grid endpoints stay
//! rational.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PartitionGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    exponent: u32,
}

impl EpochSchedule {
    pub fn new(exponent: u32) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::config("epoch exponent M must be a positive integer"));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// First step of epoch `s` (`s >= 1`), saturating at `u64::MAX`.
    pub fn start(&self, s: u64) -> u64 {
        s.checked_pow(self.exponent).unwrap_or(u64::MAX)
    }

    /// Number of grid subintervals used in epoch `s`.
    pub fn cells(&self, s: u64) -> u64 {
        if self.exponent.is_multiple_of(4) {
            s.checked_pow(self.exponent / 4).unwrap_or(u64::MAX)
        } else {
            ((s as f64).powf(self.exponent as f64 / 4.0) - 1e-9).ceil().max(1.0) as u64
        }
    }

    pub fn delta(&self, s: u64) -> f64 {
        1.0 / self.cells(s) as f64
    }

    pub fn grid(&self, s: u64) -> Result<PartitionGrid> {
        let cells = u32::try_from(self.cells(s))
            .map_err(|_| Error::config(format!("epoch {s} grid is too fine")))?;
        PartitionGrid::new(cells)
    }

    /// Epoch containing step `n` (1-based).
    pub fn epoch_of(&self, n: u64) -> u64 {
        let mut s = 1;
        while self.start(s + 1) <= n {
            s += 1;
        }
        s
    }

    pub fn validate(&self, signal_dim: usize, s_max: u64) -> Vec<Violation> {
        validate_schedule(self.exponent, signal_dim, s_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// `n_s` strictly increasing and `Delta_s` strictly decreasing.
    Monotone,
    /// `Delta_s <= Delta_{s-1} * (1 - 1/(s+1))`.
    Ratio,
    /// `n_s >= ((k+1)/2)^2 * Delta_s^{-(k+3)}`.
    MinimumPoint,
    /// `n_s >= (ln s + 2 ln ln s - 2 ln Delta_s) / (2 Delta_s^2)`.
    Summability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub epoch: u64,
    pub constraint: Constraint,
    /// Left- and right-hand side of the failed inequality `lhs <= rhs`.
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks the schedule conditions for `s = 2..=s_max` and lists every failure.
///
/// The ratio condition at `s` compares epoch `s` with epoch `s - 1`. Integer
/// arithmetic is used wherever the quantities are integers so that boundary
/// cases (the minimum-point condition holds with equality for `M = 8`,
/// `k = 1`) are decided exactly.
pub fn validate_schedule(exponent: u32, signal_dim: usize, s_max: u64) -> Vec<Violation> {
    let Ok(schedule) = EpochSchedule::new(exponent) else {
        return vec![Violation {
            epoch: 0,
            constraint: Constraint::Monotone,
            lhs: 0.0,
            rhs: 1.0,
        }];
    };
    let k = signal_dim as u32;
    let mut out = Vec::new();
    for s in 2..=s_max.max(1) {
        let (n_prev, n_s) = (schedule.start(s - 1), schedule.start(s));
        let (k_prev, k_s) = (schedule.cells(s - 1), schedule.cells(s));

        if n_s <= n_prev || k_s <= k_prev {
            out.push(Violation {
                epoch: s,
                constraint: Constraint::Monotone,
                lhs: k_prev as f64,
                rhs: k_s as f64,
            });
        }

        // 1/K_s <= (1/K_{s-1}) * s/(s+1)  <=>  K_{s-1} (s+1) <= K_s s
        let lhs = k_prev as u128 * (s as u128 + 1);
        let rhs = k_s as u128 * s as u128;
        if lhs > rhs {
            out.push(Violation {
                epoch: s,
                constraint: Constraint::Ratio,
                lhs: 1.0 / k_s as f64,
                rhs: (1.0 / k_prev as f64) * (1.0 - 1.0 / (s as f64 + 1.0)),
            });
        }

        // 4 n_s >= (k+1)^2 K_s^{k+3}
        let need = (k_s as u128)
            .checked_pow(k + 3)
            .and_then(|p| p.checked_mul((k as u128 + 1).pow(2)));
        let have = (n_s as u128) * 4;
        let fails = match need {
            Some(need) => have < need,
            None => {
                (have as f64).ln() < 2.0 * ((k + 1) as f64).ln() + (k + 3) as f64 * (k_s as f64).ln()
            }
        };
        if fails {
            out.push(Violation {
                epoch: s,
                constraint: Constraint::MinimumPoint,
                lhs: (((k + 1) as f64) / 2.0).powi(2) * (k_s as f64).powi(k as i32 + 3),
                rhs: n_s as f64,
            });
        }

        let sf = s as f64;
        let d = 1.0 / k_s as f64;
        let bound = (sf.ln() + 2.0 * sf.ln().ln() - 2.0 * d.ln()) / (2.0 * d * d);
        if (n_s as f64) < bound {
            out.push(Violation {
                epoch: s,
                constraint: Constraint::Summability,
                lhs: bound,
                rhs: n_s as f64,
            });
        }
    }
    out
}
