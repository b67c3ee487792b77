//! Sample moments, blocked-jackknife errors, and one-parameter fits of the
//! moment-vs-interval curves.
//!
//! Moments are *raw* even moments `⟨x^{2k}⟩` of the standardized returns
//! (not centered — the theoretical curves are for raw moments and the mean
//! of a standardized return is zero by symmetry). Errors come from a
//! delete-one-block jackknife over contiguous blocks of days, which absorbs
//! the day-to-day autocorrelation of the underlying lattice.
//!
//! The fit model is `y(Δt) = C · g_k(n_eff(Δt))`, where
//! [`crate::theory::fit_shape`] normalizes the finite-sample moment curve
//! to 1 in the `n → ∞` limit. The amplitude `C` is therefore directly the
//! `Δt → 0` extrapolated moment, to be compared with the Gaussian values
//! `(2k−1)!!`. Linear least squares in a single amplitude has the closed
//! form `C = Σ w·g·y / Σ w·g²` with variance `(Σ w·g²)^{−1}`.

use serde::{Deserialize, Serialize};

use crate::theory::fit_shape;
use crate::{Error, Result};

/// One measured moment at one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub delta_t: usize,
    /// Effective number of intervals per day at this `Δt`.
    pub n_eff: usize,
    /// Moment order: the estimate is of `⟨x^{2k}⟩`.
    pub k: u32,
    pub value: f64,
    /// Blocked-jackknife standard error.
    pub stderr: f64,
    /// Days entering the estimate (zero-volatility days excluded).
    pub n_days: usize,
}

/// Amplitude fit of one moment curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub k: u32,
    /// Fitted `Δt → 0` moment (amplitude against the unit-limit shape).
    #[serde(rename = "C")]
    pub amplitude: f64,
    /// Standard error from the weighted-least-squares covariance.
    #[serde(rename = "C_err")]
    pub amplitude_err: f64,
    /// Alternative error from a delete-one-block jackknife refit (fixed
    /// weights); `None` when there are too few blocks.
    #[serde(rename = "C_err_jackknife")]
    pub amplitude_err_jackknife: Option<f64>,
    pub chi2: f64,
    /// Fit points minus the one parameter.
    pub dof: usize,
    pub n_points: usize,
    /// Inclusive `Δt` interval the points were taken from.
    pub fit_range: (usize, usize),
    /// False when stderr-based weights were unusable and the fit fell back
    /// to equal weights.
    pub weighted: bool,
}

/// Raw even sample moment `⟨x^{2k}⟩` of `values`.
pub fn sample_even_moment(values: &[f64], k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::UnsupportedParameter(
            "moment order k must be >= 1".into(),
        ));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData(
            "cannot estimate a moment from an empty sample".into(),
        ));
    }
    let p = 2 * k as i32;
    Ok(values.iter().map(|&x| x.powi(p)).sum::<f64>() / values.len() as f64)
}

/// Standard error of the mean of `values` from a delete-one-block
/// jackknife over contiguous blocks of `block_len` values; the last block
/// absorbs any remainder. Needs at least two blocks.
pub fn jackknife_error(values: &[f64], block_len: usize) -> Result<f64> {
    if block_len == 0 {
        return Err(Error::InvalidConfig(
            "jackknife block length must be at least 1".into(),
        ));
    }
    let n_blocks = values.len() / block_len;
    if n_blocks < 2 {
        return Err(Error::InsufficientData(format!(
            "jackknife needs at least 2 complete blocks, got {} values with block length {}",
            values.len(),
            block_len
        )));
    }
    let total: f64 = values.iter().sum();
    let n = values.len() as f64;
    let mut leave_outs = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let start = b * block_len;
        let end = if b + 1 == n_blocks {
            values.len()
        } else {
            start + block_len
        };
        let block_sum: f64 = values[start..end].iter().sum();
        let block_n = (end - start) as f64;
        leave_outs.push((total - block_sum) / (n - block_n));
    }
    let mean = leave_outs.iter().sum::<f64>() / n_blocks as f64;
    let ss: f64 = leave_outs.iter().map(|t| (t - mean) * (t - mean)).sum();
    let b = n_blocks as f64;
    Ok(((b - 1.0) / b * ss).sqrt())
}

/// Weighted least squares for the single-amplitude model `y ≈ C·g`.
/// Returns `(C, C_err, chi2)`. Weights must be positive and finite.
pub fn weighted_amplitude_fit(g: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64)> {
    if g.len() != y.len() || g.len() != w.len() {
        return Err(Error::Internal(format!(
            "fit arrays must have equal lengths, got {}, {}, {}",
            g.len(),
            y.len(),
            w.len()
        )));
    }
    if g.is_empty() {
        return Err(Error::InsufficientData(
            "amplitude fit needs at least one point".into(),
        ));
    }
    let mut s_gy = 0.0;
    let mut s_gg = 0.0;
    for i in 0..g.len() {
        if !g[i].is_finite() || !y[i].is_finite() || !w[i].is_finite() || w[i] <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "fit point {i} is unusable: g={}, y={}, w={}",
                g[i], y[i], w[i]
            )));
        }
        s_gy += w[i] * g[i] * y[i];
        s_gg += w[i] * g[i] * g[i];
    }
    if s_gg <= 0.0 {
        return Err(Error::InsufficientData(
            "fit regressors are all zero".into(),
        ));
    }
    let c = s_gy / s_gg;
    let c_err = 1.0 / s_gg.sqrt();
    let chi2 = g
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&gi, &yi), &wi)| {
            let r = yi - c * gi;
            wi * r * r
        })
        .sum();
    Ok((c, c_err, chi2))
}

/// Fit the moment curve of order `k` through the estimates whose `Δt` lies
/// in the inclusive `fit_range`, using `1/stderr²` weights. If any selected
/// stderr is non-positive or non-finite the fit falls back to equal unit
/// weights (flagged via [`FitResult::weighted`]; `C_err` and `chi2` then
/// assume unit errors on every point).
pub fn fit_moment_curve(
    points: &[MomentEstimate],
    k: u32,
    fit_range: (usize, usize),
) -> Result<FitResult> {
    let selected: Vec<&MomentEstimate> = points
        .iter()
        .filter(|p| p.k == k && p.delta_t >= fit_range.0 && p.delta_t <= fit_range.1)
        .collect();
    if selected.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moment-curve fit for k={k} needs at least 2 points in delta_t range [{}, {}], got {}",
            fit_range.0,
            fit_range.1,
            selected.len()
        )));
    }
    let g: Vec<f64> = selected
        .iter()
        .map(|p| fit_shape(p.n_eff as u64, k))
        .collect();
    let y: Vec<f64> = selected.iter().map(|p| p.value).collect();
    let weighted = selected
        .iter()
        .all(|p| p.stderr.is_finite() && p.stderr > 0.0);
    let w: Vec<f64> = if weighted {
        selected.iter().map(|p| 1.0 / (p.stderr * p.stderr)).collect()
    } else {
        vec![1.0; selected.len()]
    };
    let (amplitude, amplitude_err, chi2) = weighted_amplitude_fit(&g, &y, &w)?;
    Ok(FitResult {
        k,
        amplitude,
        amplitude_err,
        amplitude_err_jackknife: None,
        chi2,
        dof: selected.len() - 1,
        n_points: selected.len(),
        fit_range,
        weighted,
    })
}

/// Delete-one-block jackknife error of the fitted amplitude.
///
/// `day_powers[i][d]` holds `x_d^{2k}` for fit point `i` on day `d`
/// (`None` on excluded days); `g` and `w` are the fixed regressors and
/// weights of the full fit. Each leave-one-block-out replica recomputes
/// every point's moment without that block of days and refits the
/// amplitude with the *same* weights, so the jackknife measures the
/// sampling variability of the data, not of the weighting scheme.
/// Returns `None` when fewer than two blocks are available or some replica
/// loses all data for a point.
pub fn fit_amplitude_jackknife(
    day_powers: &[Vec<Option<f64>>],
    g: &[f64],
    w: &[f64],
    block_len: usize,
) -> Option<f64> {
    let n_days = day_powers.first()?.len();
    if block_len == 0 {
        return None;
    }
    let n_blocks = n_days / block_len;
    if n_blocks < 2 {
        return None;
    }
    let n_points = day_powers.len();
    debug_assert!(day_powers.iter().all(|p| p.len() == n_days));
    debug_assert_eq!(g.len(), n_points);
    debug_assert_eq!(w.len(), n_points);

    // Per point: total sum and count over valid days.
    let totals: Vec<(f64, usize)> = day_powers
        .iter()
        .map(|p| {
            let sum: f64 = p.iter().flatten().sum();
            let count = p.iter().flatten().count();
            (sum, count)
        })
        .collect();

    let mut replicas = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let start = b * block_len;
        let end = if b + 1 == n_blocks { n_days } else { start + block_len };
        let mut s_gy = 0.0;
        let mut s_gg = 0.0;
        for i in 0..n_points {
            let block_sum: f64 = day_powers[i][start..end].iter().flatten().sum();
            let block_count = day_powers[i][start..end].iter().flatten().count();
            let count = totals[i].1.checked_sub(block_count)?;
            if count == 0 {
                return None;
            }
            let y = (totals[i].0 - block_sum) / count as f64;
            s_gy += w[i] * g[i] * y;
            s_gg += w[i] * g[i] * g[i];
        }
        replicas.push(s_gy / s_gg);
    }
    let mean = replicas.iter().sum::<f64>() / n_blocks as f64;
    let ss: f64 = replicas.iter().map(|c| (c - mean) * (c - mean)).sum();
    let b = n_blocks as f64;
    Some(((b - 1.0) / b * ss).sqrt())
}

/// Entry of the summary table: a measured value with its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub value: f64,
    #[serde(deserialize_with = "crate::io::f64_or_null")]
    pub err: f64,
}

/// Side-by-side comparison of the Gaussian limits `(2k−1)!!` with the
/// measured `Δt → 0` values for `k = 1..5`. Row `k = 1` is the directly
/// measured variance at the finest sampling interval; rows `k = 2..5` are
/// fitted amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    /// `[1, 3, 15, 105, 945]`.
    pub theory: Vec<f64>,
    /// Index `k−1`; `None` where the run produced no estimate.
    pub measured: Vec<Option<TableEntry>>,
}

/// Assemble the summary table from the variance at the finest interval and
/// the fitted amplitudes for `k = 2..5`.
pub fn moment_table(variance_dt1: Option<(f64, f64)>, fits: &[FitResult]) -> MomentTable {
    let theory: Vec<f64> = (1..=5).map(crate::theory::gaussian_limit_moment).collect();
    let mut measured: Vec<Option<TableEntry>> = vec![None; 5];
    if let Some((value, err)) = variance_dt1 {
        measured[0] = Some(TableEntry { value, err });
    }
    for fit in fits {
        if (2..=5).contains(&fit.k) {
            measured[fit.k as usize - 1] = Some(TableEntry {
                value: fit.amplitude,
                err: fit.amplitude_err,
            });
        }
    }
    MomentTable { theory, measured }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sample_even_moment_on_hand_values() {
        let v = [1.0, -2.0, 3.0];
        assert_relative_eq!(
            sample_even_moment(&v, 1).unwrap(),
            14.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            sample_even_moment(&v, 2).unwrap(),
            98.0 / 3.0,
            max_relative = 1e-15
        );
        assert!(sample_even_moment(&[], 1).is_err());
        assert!(sample_even_moment(&v, 0).is_err());
    }

    #[test]
    fn jackknife_error_on_hand_values() {
        // Two blocks of two: leave-outs 3.5 and 1.5 → SE = 1.
        assert_eq!(jackknife_error(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), 1.0);
        // Remainder absorbed by the last block: blocks {1,2} and {3,4,5},
        // leave-outs 4 and 1.5 → SE = 1.25.
        assert_eq!(
            jackknife_error(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap(),
            1.25
        );
    }

    #[test]
    fn jackknife_error_vanishes_on_constant_series() {
        let v = vec![2.5; 64];
        assert_eq!(jackknife_error(&v, 8).unwrap(), 0.0);
    }

    #[test]
    fn jackknife_error_matches_iid_formula_for_block_one() {
        // With block length 1, the delete-1 jackknife of the mean equals
        // s/√n with the unbiased variance s².
        let v: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var =
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() as f64 - 1.0);
        let classic = (var / v.len() as f64).sqrt();
        assert_relative_eq!(
            jackknife_error(&v, 1).unwrap(),
            classic,
            max_relative = 1e-12
        );
    }

    #[test]
    fn jackknife_error_needs_two_blocks() {
        assert!(jackknife_error(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(jackknife_error(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(jackknife_error(&[1.0], 0).is_err());
    }

    #[test]
    fn weighted_amplitude_fit_on_hand_values() {
        // Equal weights: C = Σgy/Σg² = 3, chi2 = 2.
        let (c, c_err, chi2) =
            weighted_amplitude_fit(&[1.0, 1.0], &[2.0, 4.0], &[1.0, 1.0]).unwrap();
        assert_eq!(c, 3.0);
        assert_relative_eq!(c_err, 1.0 / 2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(chi2, 2.0);
        // Unequal weights, exact fit: C = 1, chi2 = 0.
        let (c, c_err, chi2) =
            weighted_amplitude_fit(&[1.0, 2.0], &[1.0, 2.0], &[4.0, 1.0]).unwrap();
        assert_eq!(c, 1.0);
        assert_relative_eq!(c_err, 1.0 / 8f64.sqrt(), max_relative = 1e-15);
        assert_eq!(chi2, 0.0);
    }

    #[test]
    fn weighted_amplitude_fit_rejects_bad_points() {
        assert!(weighted_amplitude_fit(&[], &[], &[]).is_err());
        assert!(weighted_amplitude_fit(&[1.0], &[1.0], &[0.0]).is_err());
        assert!(weighted_amplitude_fit(&[1.0], &[f64::NAN], &[1.0]).is_err());
        assert!(weighted_amplitude_fit(&[1.0, 2.0], &[1.0], &[1.0, 1.0]).is_err());
        assert!(weighted_amplitude_fit(&[0.0], &[1.0], &[1.0]).is_err());
    }

    fn estimate(delta_t: usize, n_eff: usize, k: u32, value: f64, stderr: f64) -> MomentEstimate {
        MomentEstimate {
            delta_t,
            n_eff,
            k,
            value,
            stderr,
            n_days: 1000,
        }
    }

    #[test]
    fn fit_recovers_a_known_amplitude_exactly() {
        // Data generated exactly on the curve y = 2.5·g₂(n_eff).
        let points: Vec<MomentEstimate> = [(1usize, 1000usize), (10, 100), (100, 10), (500, 2)]
            .iter()
            .map(|&(dt, n)| {
                estimate(dt, n, 2, 2.5 * fit_shape(n as u64, 2), 0.05)
            })
            .collect();
        let fit = fit_moment_curve(&points, 2, (1, 1000)).unwrap();
        assert_relative_eq!(fit.amplitude, 2.5, max_relative = 1e-14);
        assert!(fit.chi2 < 1e-20);
        assert_eq!(fit.n_points, 4);
        assert_eq!(fit.dof, 3);
        assert!(fit.weighted);
        // Known WLS error: all σ = 0.05 → C_err = 0.05/√(Σg²).
        let sgg: f64 = points
            .iter()
            .map(|p| fit_shape(p.n_eff as u64, 2).powi(2))
            .sum();
        assert_relative_eq!(fit.amplitude_err, 0.05 / sgg.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn fit_selects_by_order_and_range() {
        let points = vec![
            estimate(1, 1000, 2, 3.0, 0.1),
            estimate(10, 100, 2, 2.9, 0.1),
            estimate(4000, 4, 2, 1.9, 0.1),   // outside range
            estimate(1, 1000, 3, 15.0, 0.1),  // different order
        ];
        let fit = fit_moment_curve(&points, 2, (1, 2000)).unwrap();
        assert_eq!(fit.n_points, 2);
        assert_eq!(fit.fit_range, (1, 2000));
        // Too few points once the range excludes everything else.
        assert!(fit_moment_curve(&points, 3, (1, 2000)).is_err());
    }

    #[test]
    fn fit_falls_back_to_equal_weights_when_errors_are_degenerate() {
        let points = vec![
            estimate(1, 100, 2, 2.0, 0.0), // zero stderr would give infinite weight
            estimate(2, 50, 2, 2.0, 0.1),
            estimate(4, 25, 2, 2.0, 0.1),
        ];
        let fit = fit_moment_curve(&points, 2, (1, 10)).unwrap();
        assert!(!fit.weighted);
        // With y constant and g varying, C is the g-weighted ratio.
        let g: Vec<f64> = [100u64, 50, 25]
            .iter()
            .map(|&n| fit_shape(n, 2))
            .collect();
        let expect = g.iter().map(|gi| 2.0 * gi).sum::<f64>() / g.iter().map(|gi| gi * gi).sum::<f64>();
        assert_relative_eq!(fit.amplitude, expect, max_relative = 1e-14);
    }

    #[test]
    fn fit_jackknife_vanishes_for_constant_days_and_handles_gaps() {
        // Two fit points, 10 days, block 5, constant powers → SE = 0.
        let day_powers = vec![vec![Some(2.0); 10], vec![Some(1.5); 10]];
        let g = [1.0, 0.8];
        let w = [1.0, 1.0];
        let se = fit_amplitude_jackknife(&day_powers, &g, &w, 5).unwrap();
        assert!(se.abs() < 1e-15);
        // A single excluded day changes nothing structurally.
        let mut with_gap = day_powers.clone();
        with_gap[0][3] = None;
        assert!(fit_amplitude_jackknife(&with_gap, &g, &w, 5).is_some());
        // Fewer than two blocks → None.
        assert!(fit_amplitude_jackknife(&day_powers, &g, &w, 10).is_none());
    }

    #[test]
    fn fit_jackknife_agrees_with_scalar_jackknife_for_one_point() {
        // With a single fit point and g = w = 1, the amplitude is the mean,
        // so the fit jackknife must reduce to the plain blocked jackknife.
        let values: Vec<f64> = (0..30).map(|i| ((i * 31) % 7) as f64).collect();
        let day_powers = vec![values.iter().map(|&v| Some(v)).collect::<Vec<_>>()];
        let direct = jackknife_error(&values, 6).unwrap();
        let via_fit = fit_amplitude_jackknife(&day_powers, &[1.0], &[1.0], 6).unwrap();
        assert_relative_eq!(via_fit, direct, max_relative = 1e-12);
    }

    #[test]
    fn moment_table_slots_values_by_order() {
        let fits = vec![
            FitResult {
                k: 2,
                amplitude: 2.96,
                amplitude_err: 0.03,
                amplitude_err_jackknife: None,
                chi2: 10.0,
                dof: 11,
                n_points: 12,
                fit_range: (1, 2000),
                weighted: true,
            },
            FitResult {
                k: 5,
                amplitude: 926.0,
                amplitude_err: 5.0,
                amplitude_err_jackknife: None,
                chi2: 12.0,
                dof: 11,
                n_points: 12,
                fit_range: (1, 2000),
                weighted: true,
            },
        ];
        let table = moment_table(Some((1.002, 0.009)), &fits);
        assert_eq!(table.theory, vec![1.0, 3.0, 15.0, 105.0, 945.0]);
        assert_eq!(
            table.measured[0],
            Some(TableEntry {
                value: 1.002,
                err: 0.009
            })
        );
        assert_eq!(table.measured[1].unwrap().value, 2.96);
        assert_eq!(table.measured[2], None);
        assert_eq!(table.measured[3], None);
        assert_eq!(table.measured[4].unwrap().value, 926.0);
    }
}
