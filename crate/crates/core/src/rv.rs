//! Realized volatility and standardized returns.
//!
//! For each day and each sampling interval `Δt`, the realized volatility is
//! the sum of squared intraday returns over the `⌈N/Δt⌉` intervals of that
//! day (the last interval is shorter when `Δt ∤ N`). The standardized
//! return is the daily return divided by the square root of that day's
//! realized volatility; days whose realized volatility is exactly zero have
//! no defined standardized return and are excluded and counted.
//!
//! [`RvAccumulator`] computes the whole table in a single streaming pass
//! over the tick stream with O(|grid|) state per tick — no day buffering —
//! and produces results bit-for-bit identical to the buffered reference
//! path ([`rv_day`] / [`rv_grid`]), because both accumulate the same
//! interval returns in the same order.

use crate::{
    lattice::{TickEvent, TickSink},
    price::{intraday_return, n_intervals, partition_day, DayRecord, ReturnSeries},
    Error, Result,
};

/// Realized volatility of one buffered day at one sampling interval.
/// Reference implementation used for auditing the streaming path.
pub fn rv_day(day: &DayRecord, delta_t: usize) -> Result<f64> {
    let n_sites = day.ticks.len();
    let bounds = partition_day(day.open_sum, &day.ticks, delta_t)?;
    let mut acc = 0.0;
    for w in bounds.windows(2) {
        let r = intraday_return(w[0], w[1], n_sites);
        acc += r * r;
    }
    Ok(acc)
}

/// Daily return standardized by realized volatility. `Ok(None)` marks a
/// zero-volatility day (standardization undefined, day excluded).
pub fn standardized_return(daily_return: f64, rv: f64) -> Result<Option<f64>> {
    if !rv.is_finite() || rv < 0.0 {
        return Err(Error::Internal(format!(
            "realized volatility must be finite and >= 0, got {rv}"
        )));
    }
    if rv == 0.0 {
        return Ok(None);
    }
    Ok(Some(daily_return / rv.sqrt()))
}

/// Per-interval streaming state.
struct DtState {
    delta_t: usize,
    /// Tick index (1-based within the day) of the next boundary; clamped to
    /// the day length so the close is always a boundary.
    next_boundary: usize,
    /// Spin sum at the previous boundary.
    last_sum: i64,
    /// Running sum of squared interval returns for the current day.
    acc: f64,
}

/// Complete realized-volatility table of a run: per day and per sampling
/// interval the realized volatility, plus the standardized daily returns
/// and their validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RvTable {
    n_sites: usize,
    delta_ts: Vec<usize>,
    n_eff: Vec<usize>,
    returns: ReturnSeries,
    /// Row-major `[day][dt_idx]`.
    rv: Vec<f64>,
    sr: Vec<f64>,
    valid: Vec<bool>,
}

impl RvTable {
    fn idx(&self, day: usize, dt_idx: usize) -> usize {
        day * self.delta_ts.len() + dt_idx
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_days(&self) -> usize {
        self.returns.len()
    }

    pub fn delta_ts(&self) -> &[usize] {
        &self.delta_ts
    }

    /// Effective number of intervals `⌈N/Δt⌉` for grid entry `dt_idx`.
    pub fn n_eff(&self, dt_idx: usize) -> usize {
        self.n_eff[dt_idx]
    }

    pub fn returns(&self) -> &ReturnSeries {
        &self.returns
    }

    pub fn rv(&self, day: usize, dt_idx: usize) -> f64 {
        self.rv[self.idx(day, dt_idx)]
    }

    /// Standardized return, or `None` on an excluded (zero-volatility) day.
    pub fn sr(&self, day: usize, dt_idx: usize) -> Option<f64> {
        if self.valid[self.idx(day, dt_idx)] {
            Some(self.sr[self.idx(day, dt_idx)])
        } else {
            None
        }
    }

    /// Standardized returns of all days at `dt_idx`, in day order, with
    /// `None` for excluded days.
    pub fn sr_series(&self, dt_idx: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.n_days()).map(move |day| self.sr(day, dt_idx))
    }

    /// Valid standardized returns at `dt_idx`, in day order.
    pub fn valid_sr(&self, dt_idx: usize) -> Vec<f64> {
        self.sr_series(dt_idx).flatten().collect()
    }

    /// Number of excluded (zero-volatility) days at `dt_idx`.
    pub fn exclusions(&self, dt_idx: usize) -> usize {
        (0..self.n_days())
            .filter(|&day| !self.valid[self.idx(day, dt_idx)])
            .count()
    }

    /// Build from per-day values; used by both computation paths and by
    /// the CSV reader.
    pub(crate) fn from_parts(
        n_sites: usize,
        delta_ts: Vec<usize>,
        returns: ReturnSeries,
        rv: Vec<f64>,
    ) -> Result<Self> {
        if returns.len() * delta_ts.len() != rv.len() {
            return Err(Error::Internal(format!(
                "rv table shape mismatch: {} days × {} intervals != {} values",
                returns.len(),
                delta_ts.len(),
                rv.len()
            )));
        }
        let n_eff = delta_ts.iter().map(|&dt| n_intervals(n_sites, dt)).collect();
        let mut sr = Vec::with_capacity(rv.len());
        let mut valid = Vec::with_capacity(rv.len());
        for day in 0..returns.len() {
            let r = returns.daily_return(day);
            for dt_idx in 0..delta_ts.len() {
                match standardized_return(r, rv[day * delta_ts.len() + dt_idx])? {
                    Some(x) => {
                        sr.push(x);
                        valid.push(true);
                    }
                    None => {
                        sr.push(f64::NAN);
                        valid.push(false);
                    }
                }
            }
        }
        Ok(RvTable {
            n_sites,
            delta_ts,
            n_eff,
            returns,
            rv,
            sr,
            valid,
        })
    }
}

/// Streaming tick sink computing the full realized-volatility table with
/// bounded memory: one [`DtState`] per grid entry, no tick buffering.
pub struct RvAccumulator {
    n_sites: usize,
    delta_ts: Vec<usize>,
    open_sum: i64,
    tick_in_day: usize,
    ticks_seen: u64,
    states: Vec<DtState>,
    rv_rows: Vec<f64>,
    returns: ReturnSeries,
}

impl RvAccumulator {
    /// `initial_sum` is the spin sum immediately before the first
    /// measurement update. The grid must be non-empty, sorted, free of
    /// duplicates, and within `[1, n_sites]`.
    pub fn new(n_sites: usize, delta_ts: &[usize], initial_sum: i64) -> Result<Self> {
        if delta_ts.is_empty() {
            return Err(Error::InvalidConfig("delta_t_grid must not be empty".into()));
        }
        for pair in delta_ts.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidConfig(format!(
                    "delta_t_grid must be strictly increasing, got {} before {}",
                    pair[0], pair[1]
                )));
            }
        }
        let states = delta_ts
            .iter()
            .map(|&dt| {
                if dt == 0 || dt > n_sites {
                    return Err(Error::InvalidConfig(format!(
                        "delta_t_grid entries must lie in [1, {n_sites}], got {dt}"
                    )));
                }
                Ok(DtState {
                    delta_t: dt,
                    next_boundary: dt,
                    last_sum: initial_sum,
                    acc: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RvAccumulator {
            n_sites,
            delta_ts: delta_ts.to_vec(),
            open_sum: initial_sum,
            tick_in_day: 0,
            ticks_seen: 0,
            states,
            rv_rows: Vec::new(),
            returns: ReturnSeries::new(n_sites),
        })
    }

    /// Number of fully accumulated days.
    pub fn days_completed(&self) -> usize {
        self.returns.len()
    }

    /// Finalize into an [`RvTable`]. Errors if the stream stopped mid-day.
    pub fn finish(self) -> Result<RvTable> {
        if self.tick_in_day != 0 {
            return Err(Error::TruncatedDay {
                day: self.returns.len(),
                got: self.tick_in_day,
                expected: self.n_sites,
            });
        }
        RvTable::from_parts(self.n_sites, self.delta_ts, self.returns, self.rv_rows)
    }
}

impl TickSink for RvAccumulator {
    #[inline]
    fn on_tick(&mut self, tick: TickEvent) -> Result<()> {
        self.ticks_seen += 1;
        debug_assert_eq!(
            tick.update_index, self.ticks_seen,
            "tick stream must be contiguous from the measurement start"
        );
        self.tick_in_day += 1;
        let t = self.tick_in_day;
        let s = tick.spin_sum;
        for st in &mut self.states {
            if t == st.next_boundary {
                let r = intraday_return(st.last_sum, s, self.n_sites);
                st.acc += r * r;
                st.last_sum = s;
                st.next_boundary = (st.next_boundary + st.delta_t).min(self.n_sites);
            }
        }
        if t == self.n_sites {
            for st in &mut self.states {
                debug_assert_eq!(st.last_sum, s, "every grid entry closes at the day close");
                self.rv_rows.push(st.acc);
                st.acc = 0.0;
                st.next_boundary = st.delta_t;
            }
            self.returns.push_day(self.open_sum, s)?;
            self.open_sum = s;
            self.tick_in_day = 0;
        }
        Ok(())
    }
}

/// Buffered reference path: realized-volatility table from complete
/// [`DayRecord`]s. Produces bit-identical results to the streaming path.
pub fn rv_grid(days: &[DayRecord], delta_ts: &[usize]) -> Result<RvTable> {
    let Some(first) = days.first() else {
        return Err(Error::InsufficientData(
            "realized volatility needs at least one complete day".into(),
        ));
    };
    let n_sites = first.ticks.len();
    let mut returns = ReturnSeries::new(n_sites);
    let mut rv = Vec::with_capacity(days.len() * delta_ts.len());
    for day in days {
        if day.ticks.len() != n_sites {
            return Err(Error::Internal(format!(
                "day {} has {} ticks, expected {n_sites}",
                day.day_index,
                day.ticks.len()
            )));
        }
        for &dt in delta_ts {
            rv.push(rv_day(day, dt)?);
        }
        returns.push_day(day.open_sum, day.close_sum())?;
    }
    RvTable::from_parts(n_sites, delta_ts.to_vec(), returns, rv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitMode;
    use crate::lattice::{ModelParams, SpinLattice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn day(open: i64, ticks: Vec<i64>) -> DayRecord {
        DayRecord {
            day_index: 0,
            open_sum: open,
            ticks,
        }
    }

    #[test]
    fn rv_day_matches_hand_computation() {
        // N = 4 sites, path 4 → 2 → 2 → 0 → -2.
        let d = day(4, vec![2, 2, 0, -2]);
        // Δt = 1: diffs -2, 0, -2, -2 over 2N = 8.
        let expected1 = (0.25f64 * 0.25) * 3.0;
        assert_eq!(rv_day(&d, 1).unwrap(), expected1);
        // Δt = 3: boundaries 4, 0 (t=3), -2 (close): diffs -4, -2.
        let expected3 = 0.5f64 * 0.5 + 0.25 * 0.25;
        assert_eq!(rv_day(&d, 3).unwrap(), expected3);
        // Δt = N: single squared daily return.
        let r = d.daily_return(4);
        assert_eq!(rv_day(&d, 4).unwrap(), r * r);
    }

    #[test]
    fn standardized_return_handles_zero_volatility() {
        assert_eq!(standardized_return(0.5, 0.25).unwrap(), Some(1.0));
        assert_eq!(standardized_return(0.0, 0.0).unwrap(), None);
        assert!(standardized_return(0.1, -1.0).is_err());
        assert!(standardized_return(0.1, f64::NAN).is_err());
    }

    #[test]
    fn frozen_day_yields_zero_rv_and_exclusion() {
        // A day where no update flips anything: spin sum constant.
        let d = day(4, vec![4; 4]);
        assert_eq!(rv_day(&d, 1).unwrap(), 0.0);
        let table = rv_grid(&[d], &[1, 2, 4]).unwrap();
        for dt_idx in 0..3 {
            assert_eq!(table.rv(0, dt_idx), 0.0);
            assert_eq!(table.sr(0, dt_idx), None);
            assert_eq!(table.exclusions(dt_idx), 1);
        }
        assert!(table.valid_sr(0).is_empty());
    }

    #[test]
    fn standardized_return_is_bounded_by_sqrt_n_eff() {
        // |SR| ≤ √n_eff by Cauchy–Schwarz: R = Σ r_i over n intervals,
        // RV = Σ r_i², so R² ≤ n·RV.
        let d = day(6, vec![4, 2, 4, 6, 4, 2]);
        for dt in 1..=6 {
            let rv = rv_day(&d, dt).unwrap();
            let sr = standardized_return(d.daily_return(6), rv)
                .unwrap()
                .unwrap();
            let n = n_intervals(6, dt) as f64;
            assert!(
                sr.abs() <= n.sqrt() + 1e-12,
                "dt={dt}: |{sr}| > sqrt({n})"
            );
        }
    }

    #[test]
    fn single_interval_day_standardizes_to_sign() {
        // Δt = N: RV = R², so SR = R/|R| = ±1.
        let d = day(6, vec![4, 2, 4, 6, 4, 2]);
        let rv = rv_day(&d, 6).unwrap();
        let sr = standardized_return(d.daily_return(6), rv)
            .unwrap()
            .unwrap();
        // Up to one rounding in sqrt(r²).
        assert!((sr + 1.0).abs() < 1e-15, "sr = {sr}");
    }

    #[test]
    fn streaming_matches_buffered_bit_for_bit() {
        // Drive both paths with the same simulated tick stream.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = ModelParams {
            beta: 1.8,
            alpha: 22.0,
            coupling: 1.0,
        };
        let mut lat = SpinLattice::new(10, InitMode::Random, &mut rng).unwrap();
        let grid = [1, 3, 7, 25, 100];
        let mut acc = RvAccumulator::new(100, &grid, lat.spin_sum()).unwrap();
        let mut rec = crate::price::DayRecorder::new(100, lat.spin_sum());

        struct Tee<'a>(&'a mut RvAccumulator, &'a mut crate::price::DayRecorder);
        impl TickSink for Tee<'_> {
            fn on_tick(&mut self, tick: TickEvent) -> Result<()> {
                self.0.on_tick(tick)?;
                self.1.on_tick(tick)
            }
        }

        for _ in 0..40 {
            lat.sweep(&params, &mut rng, &mut Tee(&mut acc, &mut rec))
                .unwrap();
        }
        let streamed = acc.finish().unwrap();
        let days = rec.finish().unwrap();
        let buffered = rv_grid(&days, &grid).unwrap();

        assert_eq!(streamed.n_days(), 40);
        assert_eq!(streamed.delta_ts, buffered.delta_ts);
        assert_eq!(streamed.n_eff, buffered.n_eff);
        assert_eq!(streamed.returns, buffered.returns);
        assert_eq!(streamed.valid, buffered.valid);
        // Bit-level equality (NaN-safe) of every volatility and SR value.
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&streamed.rv), bits(&buffered.rv));
        assert_eq!(bits(&streamed.sr), bits(&buffered.sr));
    }

    #[test]
    fn accumulator_reports_truncated_streams() {
        let mut acc = RvAccumulator::new(4, &[1, 2], 4).unwrap();
        for i in 1..=6u64 {
            acc.on_tick(TickEvent {
                update_index: i,
                spin_sum: 4 - 2 * (i as i64 % 2),
            })
            .unwrap();
        }
        match acc.finish() {
            Err(Error::TruncatedDay { day, got, expected }) => {
                assert_eq!((day, got, expected), (1, 2, 4));
            }
            other => panic!("expected TruncatedDay, got {other:?}"),
        }
    }

    #[test]
    fn accumulator_rejects_bad_grids() {
        assert!(RvAccumulator::new(100, &[], 0).is_err());
        assert!(RvAccumulator::new(100, &[2, 1], 0).is_err());
        assert!(RvAccumulator::new(100, &[1, 1], 0).is_err());
        assert!(RvAccumulator::new(100, &[0], 0).is_err());
        assert!(RvAccumulator::new(100, &[101], 0).is_err());
    }

    #[test]
    fn partial_tail_interval_is_included() {
        // N = 5, Δt = 2: boundaries at t = 0, 2, 4, 5; n_eff = 3.
        let d = day(0, vec![1, 2, 3, 4, 5]);
        let table = rv_grid(&[d.clone()], &[2]).unwrap();
        assert_eq!(table.n_eff(0), 3);
        let expect = {
            let r1 = intraday_return(0, 2, 5);
            let r2 = intraday_return(2, 4, 5);
            let r3 = intraday_return(4, 5, 5);
            r1 * r1 + r2 * r2 + r3 * r3
        };
        assert_eq!(table.rv(0, 0), expect);
        assert_eq!(rv_day(&d, 2).unwrap(), expect);
    }
}
