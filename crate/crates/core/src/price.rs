//! From spin sums to prices and returns.
//!
//! The log-price is an affine map of the magnetization,
//! `ln p = ln p* + λ·M`, with the fundamental fixed at `ln p* = 0`. Because
//! `M = S/N` for integer spin sum `S`, every return over an interval with
//! boundary sums `a → b` is exactly `λ·(b − a)/N`; with the conventional
//! scale `λ = 1/2` this is `(b − a)/(2N)`. All return arithmetic in this
//! module keeps the integer difference exact and performs a single float
//! division, so chained intraday returns telescope to the daily return
//! without rounding drift.
//!
//! One trading day is one sweep: `N = L²` ticks. A tick stream is grouped
//! into [`DayRecord`]s by a [`DayRecorder`], and day closes chain exactly
//! (the open of day `T+1` is the close of day `T`).

use crate::{lattice::TickEvent, lattice::TickSink, Error, Result};

/// Log-price for a given spin sum: `ln p = log_fundamental + λ·S/N`.
#[inline]
pub fn log_price(spin_sum: i64, n_sites: usize, lambda: f64, log_fundamental: f64) -> f64 {
    log_fundamental + lambda * (spin_sum as f64 / n_sites as f64)
}

/// Log-return between two boundary spin sums at scale λ = 1/2:
/// `(b − a) / (2N)`.
#[inline]
pub fn intraday_return(open_sum: i64, close_sum: i64, n_sites: usize) -> f64 {
    (close_sum - open_sum) as f64 / (2.0 * n_sites as f64)
}

/// Daily log-return from open/close spin sums. Identical arithmetic to
/// [`intraday_return`] over the whole day, so intraday partitions of any
/// interval length telescope to this value exactly.
#[inline]
pub fn daily_return(open_sum: i64, close_sum: i64, n_sites: usize) -> f64 {
    intraday_return(open_sum, close_sum, n_sites)
}

/// Number of sampling intervals a day of `n_sites` ticks splits into at
/// interval `delta_t`: `⌈N/Δt⌉`. The last interval is shorter when `Δt`
/// does not divide `N`.
#[inline]
pub fn n_intervals(n_sites: usize, delta_t: usize) -> usize {
    n_sites.div_ceil(delta_t)
}

/// Boundary spin sums of one day sampled every `delta_t` ticks: starts at
/// the day's open, then the sum after `Δt, 2Δt, …` updates, and always ends
/// at the close (a final partial interval if `Δt ∤ N`). Length is
/// `n_intervals(N, Δt) + 1`.
pub fn partition_day(open_sum: i64, ticks: &[i64], delta_t: usize) -> Result<Vec<i64>> {
    if delta_t == 0 || delta_t > ticks.len() {
        return Err(Error::InvalidConfig(format!(
            "delta_t must lie in [1, {}], got {delta_t}",
            ticks.len()
        )));
    }
    let mut bounds = Vec::with_capacity(n_intervals(ticks.len(), delta_t) + 1);
    bounds.push(open_sum);
    let mut t = delta_t;
    while t < ticks.len() {
        bounds.push(ticks[t - 1]);
        t += delta_t;
    }
    bounds.push(ticks[ticks.len() - 1]);
    Ok(bounds)
}

/// One complete trading day: the opening spin sum plus the sum after each
/// of the `N` updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayRecord {
    pub day_index: usize,
    pub open_sum: i64,
    /// Spin sum after update `t` (1-based); `ticks.len() == N`.
    pub ticks: Vec<i64>,
}

impl DayRecord {
    pub fn close_sum(&self) -> i64 {
        *self.ticks.last().expect("a day has at least one tick")
    }

    pub fn daily_return(&self, n_sites: usize) -> f64 {
        daily_return(self.open_sum, self.close_sum(), n_sites)
    }
}

/// Open/close spin sums of consecutive days, with the chaining invariant
/// (each open equals the previous close) enforced on push.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReturnSeries {
    n_sites: usize,
    open_close: Vec<(i64, i64)>,
}

impl ReturnSeries {
    pub fn new(n_sites: usize) -> Self {
        ReturnSeries {
            n_sites,
            open_close: Vec::new(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.open_close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open_close.is_empty()
    }

    pub fn push_day(&mut self, open_sum: i64, close_sum: i64) -> Result<()> {
        if let Some(&(_, prev_close)) = self.open_close.last() {
            if prev_close != open_sum {
                return Err(Error::Internal(format!(
                    "day {} opens at {open_sum} but day {} closed at {prev_close}",
                    self.open_close.len(),
                    self.open_close.len() - 1
                )));
            }
        }
        self.open_close.push((open_sum, close_sum));
        Ok(())
    }

    /// Raw open/close pair of one day.
    pub fn open_close(&self, day: usize) -> (i64, i64) {
        self.open_close[day]
    }

    pub fn daily_return(&self, day: usize) -> f64 {
        let (open, close) = self.open_close[day];
        daily_return(open, close, self.n_sites)
    }

    pub fn returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.open_close
            .iter()
            .map(|&(o, c)| daily_return(o, c, self.n_sites))
    }
}

/// Tick sink that groups the stream into complete [`DayRecord`]s.
/// Intended for tests and small runs; large runs stream through the
/// realized-volatility accumulator instead of buffering ticks.
pub struct DayRecorder {
    n_sites: usize,
    open_sum: i64,
    current: Vec<i64>,
    days: Vec<DayRecord>,
}

impl DayRecorder {
    /// `initial_sum` is the spin sum immediately before the first
    /// measurement update (the open of day 0).
    pub fn new(n_sites: usize, initial_sum: i64) -> Self {
        DayRecorder {
            n_sites,
            open_sum: initial_sum,
            current: Vec::with_capacity(n_sites),
            days: Vec::new(),
        }
    }

    /// Completed days so far; errors if the stream stopped mid-day.
    pub fn finish(self) -> Result<Vec<DayRecord>> {
        if !self.current.is_empty() {
            return Err(Error::TruncatedDay {
                day: self.days.len(),
                got: self.current.len(),
                expected: self.n_sites,
            });
        }
        Ok(self.days)
    }
}

impl TickSink for DayRecorder {
    fn on_tick(&mut self, tick: TickEvent) -> Result<()> {
        self.current.push(tick.spin_sum);
        if self.current.len() == self.n_sites {
            let ticks = std::mem::replace(&mut self.current, Vec::with_capacity(self.n_sites));
            let close = *ticks.last().expect("n_sites >= 1");
            self.days.push(DayRecord {
                day_index: self.days.len(),
                open_sum: self.open_sum,
                ticks,
            });
            self.open_sum = close;
        }
        Ok(())
    }
}
