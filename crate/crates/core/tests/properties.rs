//! Property-based tests of the arithmetic core: exact telescoping,
//! standardization bounds, streaming/buffered agreement, and round trips.

use proptest::collection::vec;
use proptest::prelude::*;

use spinmarket::io;
use spinmarket::lattice::{heat_bath_prob, TickEvent, TickSink};
use spinmarket::moments::jackknife_error;
use spinmarket::price::{n_intervals, partition_day, DayRecord};
use spinmarket::rv::{rv_grid, RvAccumulator};
use spinmarket::theory::{fit_shape, theoretical_moment, FiniteSampleLaw};

/// A synthetic multi-day tick path: per-update spin-sum jumps are 0 or ±2,
/// exactly like a single-flip heat-bath chain.
fn day_paths(
    n_sites: usize,
    max_days: usize,
) -> impl Strategy<Value = (i64, Vec<Vec<i64>>)> {
    let day = vec(prop_oneof![Just(-2i64), Just(0i64), Just(2i64)], n_sites);
    (
        (-(n_sites as i64)..=n_sites as i64),
        vec(day, 1..=max_days),
    )
        .prop_map(move |(open, jump_days)| {
            let mut sum = open;
            let days: Vec<Vec<i64>> = jump_days
                .into_iter()
                .map(|jumps| {
                    jumps
                        .into_iter()
                        .map(|j| {
                            // Keep the walk inside the physical range.
                            let next = (sum + j).clamp(-(n_sites as i64), n_sites as i64);
                            sum = next;
                            next
                        })
                        .collect()
                })
                .collect();
            (open, days)
        })
}

fn to_records(open: i64, days: &[Vec<i64>]) -> Vec<DayRecord> {
    let mut records = Vec::new();
    let mut open_sum = open;
    for (day_index, ticks) in days.iter().enumerate() {
        records.push(DayRecord {
            day_index,
            open_sum,
            ticks: ticks.clone(),
        });
        open_sum = *ticks.last().unwrap();
    }
    records
}

proptest! {
    /// Interval boundaries partition the day: the integer spin-sum
    /// differences of consecutive boundaries telescope exactly to the
    /// close-minus-open difference, for every interval length.
    #[test]
    fn interval_boundaries_telescope_exactly(
        (open, days) in day_paths(24, 3),
        delta_t in 1usize..=24,
    ) {
        for rec in to_records(open, &days) {
            let bounds = partition_day(rec.open_sum, &rec.ticks, delta_t).unwrap();
            prop_assert_eq!(bounds.len(), n_intervals(rec.ticks.len(), delta_t) + 1);
            prop_assert_eq!(bounds[0], rec.open_sum);
            prop_assert_eq!(*bounds.last().unwrap(), rec.close_sum());
            let total: i64 = bounds.windows(2).map(|w| w[1] - w[0]).sum();
            prop_assert_eq!(total, rec.close_sum() - rec.open_sum);
            // Interior boundaries sit exactly on the sampled ticks.
            for (j, w) in bounds.windows(2).enumerate() {
                let t = ((j + 1) * delta_t).min(rec.ticks.len());
                prop_assert_eq!(w[1], rec.ticks[t - 1]);
            }
        }
    }

    /// A return standardized by its own realized volatility is bounded by
    /// √n_eff (Cauchy–Schwarz), up to accumulated rounding.
    #[test]
    fn standardized_returns_are_bounded(
        (open, days) in day_paths(16, 4),
        delta_t in 1usize..=16,
    ) {
        let records = to_records(open, &days);
        let table = rv_grid(&records, &[delta_t]).unwrap();
        let bound = (table.n_eff(0) as f64).sqrt() * (1.0 + 1e-12);
        for day in 0..table.n_days() {
            if let Some(sr) = table.sr(day, 0) {
                prop_assert!(sr.abs() <= bound, "sr = {sr}, bound = {bound}");
            } else {
                // Excluded days are exactly the frozen ones.
                prop_assert_eq!(table.rv(day, 0), 0.0);
            }
        }
    }

    /// Streaming accumulation over ticks gives bit-identical tables to the
    /// buffered per-day computation.
    #[test]
    fn streaming_equals_buffered(
        (open, days) in day_paths(12, 4),
        grid_mask in 1u16..(1 << 12),
    ) {
        let grid: Vec<usize> = (0..12)
            .filter(|b| grid_mask & (1 << b) != 0)
            .map(|b| b + 1)
            .collect();
        let records = to_records(open, &days);
        let buffered = rv_grid(&records, &grid).unwrap();

        let mut acc = RvAccumulator::new(12, &grid, open).unwrap();
        let mut index = 0u64;
        for rec in &records {
            for &s in &rec.ticks {
                index += 1;
                acc.on_tick(TickEvent { update_index: index, spin_sum: s }).unwrap();
            }
        }
        let streamed = acc.finish().unwrap();
        prop_assert_eq!(streamed.returns(), buffered.returns());
        for day in 0..buffered.n_days() {
            for dt_idx in 0..grid.len() {
                prop_assert_eq!(
                    streamed.rv(day, dt_idx).to_bits(),
                    buffered.rv(day, dt_idx).to_bits()
                );
                prop_assert_eq!(
                    streamed.sr(day, dt_idx).map(f64::to_bits),
                    buffered.sr(day, dt_idx).map(f64::to_bits)
                );
            }
        }
    }

    /// The CSV round trip reproduces the full table bit for bit.
    #[test]
    fn csv_round_trip_is_bitwise(
        (open, days) in day_paths(10, 3),
    ) {
        let records = to_records(open, &days);
        let grid = [1usize, 3, 10];
        let table = rv_grid(&records, &grid).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let daily_path = tmp.path().join("daily.csv");
        let rv_path = tmp.path().join("rv.csv");
        io::atomic_write(&daily_path, &io::daily_returns_csv(table.returns())).unwrap();
        io::atomic_write(&rv_path, &io::rv_table_csv(&table)).unwrap();
        let returns = io::read_daily_returns(&daily_path, 10).unwrap();
        let back = io::read_rv_table(&rv_path, returns).unwrap();
        prop_assert_eq!(back.returns(), table.returns());
        for day in 0..table.n_days() {
            for dt_idx in 0..grid.len() {
                prop_assert_eq!(
                    back.rv(day, dt_idx).to_bits(),
                    table.rv(day, dt_idx).to_bits()
                );
                prop_assert_eq!(
                    back.sr(day, dt_idx).map(f64::to_bits),
                    table.sr(day, dt_idx).map(f64::to_bits)
                );
            }
        }
    }

    /// Flip probabilities complement: P(+1|h) + P(+1|−h) = 1.
    #[test]
    fn heat_bath_prob_complements_and_is_monotone(
        beta in 0.01f64..5.0,
        h1 in -50.0f64..50.0,
        h2 in -50.0f64..50.0,
    ) {
        let p1 = heat_bath_prob(beta, h1);
        let q1 = heat_bath_prob(beta, -h1);
        prop_assert!((p1 + q1 - 1.0).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&p1));
        let p2 = heat_bath_prob(beta, h2);
        if h1 <= h2 {
            prop_assert!(p1 <= p2);
        } else {
            prop_assert!(p2 <= p1);
        }
    }

    /// Jackknife error: zero on constant data, sign-invariant, and
    /// scale-equivariant under exact binary scaling.
    #[test]
    fn jackknife_symmetries(
        values in vec(-100.0f64..100.0, 8..64),
        block in 1usize..8,
    ) {
        prop_assume!(values.len() / block >= 2);
        let se = jackknife_error(&values, block).unwrap();
        prop_assert!(se >= 0.0 && se.is_finite());
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        prop_assert_eq!(jackknife_error(&negated, block).unwrap().to_bits(), se.to_bits());
        let doubled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
        prop_assert_eq!(jackknife_error(&doubled, block).unwrap().to_bits(), (2.0 * se).to_bits());
        // Constant data: zero up to rounding of the leave-out means (the
        // remainder block and the mean-of-replicas each round at ulp level).
        let constant = vec![values[0]; values.len()];
        let se_const = jackknife_error(&constant, block).unwrap();
        prop_assert!(se_const <= values[0].abs() * 1e-12 + 1e-18, "{se_const}");
    }

    /// Closed-form moments: positive, below the Gaussian limit, increasing
    /// in n, and consistent with the fit-shape factorization.
    #[test]
    fn moment_curves_are_monotone_and_consistent(
        n in 2u64..100_000,
        k in 2u32..=5,
    ) {
        let m = theoretical_moment(n, k);
        let gaussian: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
        prop_assert!(m > 0.0 && m < gaussian);
        prop_assert!(theoretical_moment(n + 1, k) > m);
        let via_shape = gaussian * fit_shape(n, k);
        prop_assert!((via_shape / m - 1.0).abs() < 1e-13);
    }

    /// Quadrature of the density agrees with the closed forms across the
    /// full n range, including the edge-divergent n = 2..3 region.
    #[test]
    fn quadrature_matches_closed_form(n in 2u64..2000, k in 1u32..=5) {
        let law = FiniteSampleLaw::new(n).unwrap();
        let exact = law.moment(k);
        let quadr = law.moment_by_quadrature(k);
        prop_assert!(
            (quadr / exact - 1.0).abs() < 1e-8,
            "n={n} k={k}: {quadr} vs {exact}"
        );
    }
}
