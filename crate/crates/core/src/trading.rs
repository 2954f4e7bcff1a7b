//! Long-only speculator strategies driven by randomized forecasts, the
//! buy-and-hold baseline, and exponential-weights aggregation.
//!
//! All prices here are scaled into `[0, 1]`. A share bought at `S_{i-1}` and
//! sold at `S_i` earns `S_i - S_{i-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p~ > S~_prev + epsilon`.
pub fn entry_decision(p_tilde: f64, s_tilde_prev: f64, epsilon: f64) -> bool {
    p_tilde > s_tilde_prev + epsilon
}

/// Exit an open position when the forecast no longer clears the threshold
/// or the price did not rise.
pub fn position_exit(p_tilde: f64, s_prev: f64, s_now: f64, epsilon: f64) -> bool {
    p_tilde <= s_prev + epsilon || s_now <= s_prev
}

/// `max(epsilon' * sigma, floor)` with `sigma` the sample standard deviation
/// (denominator `n - 1`) of the window. Windows shorter than two give the
/// floor.
pub fn sigma_threshold(window: &[f64], epsilon_prime: f64, epsilon_floor: f64) -> f64 {
    if window.len() < 2 {
        return epsilon_floor;
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let ss = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (epsilon_prime * (ss / (n - 1.0)).sqrt()).max(epsilon_floor)
}

/// Cost of one buy or one sell of `notional` at proportional `rate`.
pub fn transaction_cost(notional: f64, rate: f64) -> f64 {
    rate * notional.abs()
}

/// `gain` less a round trip (one buy and one sell) on `notional`.
pub fn apply_transaction_cost(gain: f64, notional: f64, rate: f64) -> f64 {
    gain - 2.0 * transaction_cost(notional, rate)
}

/// `K0 exp(delta (L (epsilon - delta var) - deviation))`.
pub fn capital_lower_bound(k0: f64, delta: f64, epsilon: f64, entries: u64, var: f64, deviation: f64) -> f64 {
    k0 * (delta * (entries as f64 * (epsilon - delta * var) - deviation)).exp()
}

/// Whether the entry count is large enough for the bound above to exceed `K0`.
pub fn capital_grows(delta: f64, epsilon: f64, entries: u64, var: f64, deviation: f64) -> bool {
    entries as f64 * (epsilon - delta * var) > deviation
}

/// `ln K0 + delta sum dS - delta^2 sum dS^2` over the entered increments.
pub fn log_capital_floor(k0: f64, delta: f64, entered_moves: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for d in entered_moves {
        s1 += d;
        s2 += d * d;
    }
    k0.ln() + delta * s1 - delta * delta * s2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    /// One share per entry, capital starts at zero.
    #[default]
    Simple,
    /// `delta K_{i-1}` shares per entry.
    LimitedRisk,
}

/// When positions are opened and closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    /// Buy at `S_{i-1}` and sell at `S_i` on every entered step.
    #[default]
    PerStep,
    /// Hold from entry until the exit rule fires.
    Gamble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerStep {
    /// The entry rule fired at this step.
    pub entered: bool,
    /// A position was exposed to this step's price move.
    pub held: bool,
    pub opened: bool,
    pub closed: bool,
    pub shares: f64,
    pub price_prev: f64,
    pub price_now: f64,
    /// `shares * (price_now - price_prev)` net of `cost`.
    pub gain: f64,
    pub cost: f64,
    pub capital: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    initial: f64,
    steps: Vec<LedgerStep>,
    entry_count: u64,
    durations: Vec<u64>,
}

impl TradeLedger {
    /// Ledger starting from capital `initial`.
    pub fn new(initial: f64) -> Self {
        Self {
            initial,
            steps: Vec::new(),
            entry_count: 0,
            durations: Vec::new(),
        }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn capital(&self) -> f64 {
        self.steps.last().map_or(self.initial, |s| s.capital)
    }

    pub fn steps(&self) -> &[LedgerStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of positions opened.
    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    /// Lengths of closed gambles, entry to exit inclusive.
    pub fn durations(&self) -> &[u64] {
        &self.durations
    }

    pub fn total_gain(&self) -> f64 {
        self.capital() - self.initial
    }

    /// Capital path rebuilt from per-step gains.
    pub fn recomputed_capital(&self) -> Vec<f64> {
        let mut k = self.initial;
        self.steps
            .iter()
            .map(|s| {
                k += s.gain;
                k
            })
            .collect()
    }

    fn push_round_trip(&mut self, entered: bool, shares: f64, s_prev: f64, s_now: f64, cost: f64) {
        let gain = if entered { shares * (s_now - s_prev) - cost } else { 0.0 };
        let capital = self.capital() + gain;
        if entered {
            self.entry_count += 1;
            self.durations.push(1);
        }
        self.steps.push(LedgerStep {
            entered,
            held: entered,
            opened: entered,
            closed: entered,
            shares: if entered { shares } else { 0.0 },
            price_prev: s_prev,
            price_now: s_now,
            gain,
            cost: if entered { cost } else { 0.0 },
            capital,
        });
    }
}

/// One unit share on entered steps.
pub fn simple_rise_step(ledger: &mut TradeLedger, entered: bool, s_prev: f64, s_now: f64) {
    ledger.push_round_trip(entered, 1.0, s_prev, s_now, 0.0);
}

/// `K_i = K_{i-1} (1 + delta dS_i)` on entered steps.
pub fn limited_risk_step(ledger: &mut TradeLedger, entered: bool, s_prev: f64, s_now: f64, delta: f64) -> Result<()> {
    check_fraction(delta)?;
    let shares = delta * ledger.capital();
    ledger.push_round_trip(entered, shares, s_prev, s_now, 0.0);
    Ok(())
}

fn check_fraction(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::config(format!("capital fraction delta = {delta} must lie in [0, 1)")))
    }
}

/// `K_n / L_n`; `None` when nothing was entered.
pub fn average_gain(ledger: &TradeLedger) -> Option<f64> {
    (ledger.entry_count > 0).then(|| ledger.total_gain() / ledger.entry_count as f64)
}

/// `(1/L_n) sum held (dS_i)^2`; `None` when nothing was entered.
pub fn realized_variance(ledger: &TradeLedger) -> Option<f64> {
    (ledger.entry_count > 0).then(|| {
        ledger
            .steps
            .iter()
            .filter(|s| s.held)
            .map(|s| (s.price_now - s.price_prev).powi(2))
            .sum::<f64>()
            / ledger.entry_count as f64
    })
}

/// Cost settings and sizing for a [`Book`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub mode: StrategyMode,
    pub execution: Execution,
    /// Capital fraction for limited-risk sizing.
    pub delta: f64,
    pub tx_cost: f64,
    /// 2 charges both the buy and the sell, 1 only the buy.
    pub cost_sides: u8,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        check_fraction(self.delta)?;
        if !(self.tx_cost >= 0.0) {
            return Err(Error::config(format!("transaction cost {} must be nonnegative", self.tx_cost)));
        }
        if !matches!(self.cost_sides, 1 | 2) {
            return Err(Error::config(format!("cost_sides must be 1 or 2, got {}", self.cost_sides)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Position {
    shares: f64,
    opened_at: usize,
}

/// Executes entry and exit decisions into a ledger.
#[derive(Debug, Clone)]
pub struct Book {
    params: StrategyParams,
    ledger: TradeLedger,
    position: Option<Position>,
}

impl Book {
    /// Simple mode starts from zero capital regardless of `initial`.
    pub fn new(params: StrategyParams, initial: f64) -> Result<Self> {
        params.validate()?;
        let start = match params.mode {
            StrategyMode::Simple => 0.0,
            StrategyMode::LimitedRisk => {
                if !(initial > 0.0) {
                    return Err(Error::config(format!("initial capital {initial} must be positive")));
                }
                initial
            }
        };
        Ok(Self {
            params,
            ledger: TradeLedger::new(start),
            position: None,
        })
    }

    pub fn ledger(&self) -> &TradeLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> TradeLedger {
        self.ledger
    }

    pub fn is_open(&self) -> bool {
        self.position.is_some()
    }

    fn size(&self) -> f64 {
        match self.params.mode {
            StrategyMode::Simple => 1.0,
            StrategyMode::LimitedRisk => self.params.delta * self.ledger.capital(),
        }
    }

    /// Records step `i` with move `s_prev -> s_now`. `entered` is the entry
    /// rule at this step; `p_tilde` and `epsilon` feed the exit rule. An open
    /// position is always closed when `last` is set.
    pub fn step(&mut self, entered: bool, p_tilde: f64, epsilon: f64, s_prev: f64, s_now: f64, last: bool) -> LedgerStep {
        let index = self.ledger.steps.len();
        let mut opened = false;
        if self.position.is_none() && entered {
            self.position = Some(Position {
                shares: self.size(),
                opened_at: index,
            });
            opened = true;
        }
        let Some(pos) = self.position else {
            let capital = self.ledger.capital();
            let rec = LedgerStep {
                entered,
                held: false,
                opened: false,
                closed: false,
                shares: 0.0,
                price_prev: s_prev,
                price_now: s_now,
                gain: 0.0,
                cost: 0.0,
                capital,
            };
            self.ledger.steps.push(rec);
            return rec;
        };
        let closed = match self.params.execution {
            Execution::PerStep => true,
            Execution::Gamble => last || position_exit(p_tilde, s_prev, s_now, epsilon),
        };
        let rate = self.params.tx_cost;
        let mut cost = 0.0;
        if opened {
            cost += transaction_cost(pos.shares * s_prev, rate);
            self.ledger.entry_count += 1;
        }
        if closed && self.params.cost_sides == 2 {
            cost += transaction_cost(pos.shares * s_now, rate);
        }
        let gain = pos.shares * (s_now - s_prev) - cost;
        let capital = self.ledger.capital() + gain;
        if closed {
            self.ledger.durations.push((index - pos.opened_at + 1) as u64);
            self.position = None;
        }
        let rec = LedgerStep {
            entered,
            held: true,
            opened,
            closed,
            shares: pos.shares,
            price_prev: s_prev,
            price_now: s_now,
            gain,
            cost,
            capital,
        };
        self.ledger.steps.push(rec);
        rec
    }
}

/// Inputs of one step of the simple per-step strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub entered: bool,
    pub p_tilde: f64,
    pub s_tilde_prev: f64,
    pub s_prev: f64,
    pub s_now: f64,
}

/// Total simple-mode gain split as
/// `sum I (S_i - p~_i) + sum I (S~_{i-1} - S_{i-1}) + sum I (p~_i - S~_{i-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainDecomposition {
    /// Selected calibration residual.
    pub calibration: f64,
    /// Rounding error of the previous price.
    pub rounding: f64,
    /// Forecast edge over the randomized previous price, at least `epsilon` per entry.
    pub edge: f64,
}

impl GainDecomposition {
    pub fn total(&self) -> f64 {
        self.calibration + self.rounding + self.edge
    }
}

pub fn gain_decomposition(records: &[DecisionRecord]) -> GainDecomposition {
    records
        .iter()
        .filter(|r| r.entered)
        .fold(GainDecomposition::default(), |mut d, r| {
            d.calibration += r.s_now - r.p_tilde;
            d.rounding += r.s_tilde_prev - r.s_prev;
            d.edge += r.p_tilde - r.s_tilde_prev;
            d
        })
}

pub fn simple_total_gain(records: &[DecisionRecord]) -> f64 {
    records.iter().filter(|r| r.entered).map(|r| r.s_now - r.s_prev).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuyAndHold {
    /// `K0 (last / first) - K0`.
    pub gain: f64,
    /// `last / first - 1`.
    pub relative: f64,
}

pub fn buy_and_hold(prices: &[f64], k0: f64) -> Result<BuyAndHold> {
    let (&first, &last) = match (prices.first(), prices.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput),
    };
    if !(first > 0.0) {
        return Err(Error::config(format!("first price {first} must be positive")));
    }
    let relative = last / first - 1.0;
    Ok(BuyAndHold {
        gain: k0 * relative,
        relative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `weights[t]` are the weights held during period `t`; the last row is
    /// the weight vector after the final update.
    pub weights: Vec<Vec<f64>>,
    /// Aggregate return of each period.
    pub returns: Vec<f64>,
    /// Capital after each period, starting from 1.
    pub capital: Vec<f64>,
}

/// Exponential weights over strategies. `returns[j][t]` is the relative
/// return of strategy `j` in period `t`.
#[allow(clippy::needless_range_loop)]
pub fn aggregate_strategies(returns: &[Vec<f64>], eta: f64) -> Result<Aggregate> {
    if !(eta > 0.0) {
        return Err(Error::config(format!("learning rate eta = {eta} must be positive")));
    }
    let m = returns.len();
    if m == 0 {
        return Err(Error::config("no strategies to aggregate"));
    }
    let periods = returns[0].len();
    if returns.iter().any(|r| r.len() != periods) {
        return Err(Error::config("strategies have different numbers of periods"));
    }
    let mut w = vec![1.0 / m as f64; m];
    let mut out = Aggregate {
        weights: Vec::with_capacity(periods + 1),
        returns: Vec::with_capacity(periods),
        capital: Vec::with_capacity(periods),
    };
    let mut capital = 1.0;
    for t in 0..periods {
        out.weights.push(w.clone());
        let r: f64 = (0..m).map(|j| w[j] * returns[j][t]).sum();
        capital *= 1.0 + r;
        out.returns.push(r);
        out.capital.push(capital);
        // subtract the max exponent before exponentiating to avoid overflow
        let top = (0..m).map(|j| eta * returns[j][t]).fold(f64::NEG_INFINITY, f64::max);
        for j in 0..m {
            w[j] *= (eta * returns[j][t] - top).exp();
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
    }
    out.weights.push(w);
    Ok(out)
}
