//! Python bindings: the exact finite-sample law, the moment/fit toolkit,
//! and an interactive simulator handle.
//!
//! Usage errors (bad parameters, malformed input) raise `ValueError`;
//! failures inside an otherwise valid computation raise `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spinmarket::config::InitMode;
use spinmarket::lattice::{ModelParams, SpinLattice};
use spinmarket::moments;
use spinmarket::rv::{RvAccumulator, RvTable};
use spinmarket::theory;

fn to_py_err(err: spinmarket::Error) -> PyErr {
    if err.is_usage() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

/// Probability that a heat-bath update sets a spin to +1 in local field `h`
/// at inverse temperature `beta`.
#[pyfunction]
fn heat_bath_prob(beta: f64, h: f64) -> f64 {
    spinmarket::heat_bath_prob(beta, h)
}

/// Exact density of the standardized return built from `n` Gaussian
/// intraday returns, evaluated at `x`.
#[pyfunction]
fn sr_density(x: f64, n: u64) -> PyResult<f64> {
    theory::sr_density(x, n).map_err(to_py_err)
}

/// Closed-form even moment `E[x^(2k)]` of the finite-sample law.
#[pyfunction]
fn theoretical_moment(n: u64, k: u32) -> PyResult<f64> {
    if n < 1 || k < 1 {
        return Err(PyValueError::new_err(format!(
            "theoretical_moment needs n >= 1 and k >= 1, got n={n}, k={k}"
        )));
    }
    Ok(theory::theoretical_moment(n, k))
}

/// Gaussian limit `(2k-1)!!` of the even moment of order `2k`.
#[pyfunction]
fn gaussian_limit_moment(k: u32) -> PyResult<f64> {
    if k < 1 {
        return Err(PyValueError::new_err("k must be >= 1"));
    }
    Ok(theory::gaussian_limit_moment(k))
}

/// Moment curve normalized to 1 at `n = infinity`; the one-parameter fit
/// model is `C * fit_shape(n, k)`.
#[pyfunction]
fn fit_shape(n: u64, k: u32) -> PyResult<f64> {
    if n < 1 || k < 1 {
        return Err(PyValueError::new_err(format!(
            "fit_shape needs n >= 1 and k >= 1, got n={n}, k={k}"
        )));
    }
    Ok(theory::fit_shape(n, k))
}

/// Even moment of the finite-sample density by adaptive quadrature
/// (an independent cross-check of the closed form).
#[pyfunction]
fn moment_by_quadrature(n: u64, k: u32) -> PyResult<f64> {
    if k < 1 {
        return Err(PyValueError::new_err("k must be >= 1"));
    }
    Ok(theory::FiniteSampleLaw::new(n)
        .map_err(to_py_err)?
        .moment_by_quadrature(k))
}

/// Draw `days` standardized returns from the exact Gaussian null with `n`
/// intervals per day, seeded and reproducible.
#[pyfunction]
#[pyo3(signature = (n, days, sigma=1.0, seed=0))]
fn synthetic_gaussian_sr(n: u64, days: usize, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    theory::synthetic_gaussian_sr(n, days, sigma, &mut rng).map_err(to_py_err)
}

/// Raw even sample moment `mean(x^(2k))`.
#[pyfunction]
fn sample_even_moment(values: Vec<f64>, k: u32) -> PyResult<f64> {
    moments::sample_even_moment(&values, k).map_err(to_py_err)
}

/// Delete-one-block jackknife standard error of the mean of `values`.
#[pyfunction]
fn jackknife_error(values: Vec<f64>, block: usize) -> PyResult<f64> {
    moments::jackknife_error(&values, block).map_err(to_py_err)
}

/// Weighted single-amplitude fit of moment estimates against the
/// finite-sample curve: returns `(C, C_err, chi2, dof)` for the model
/// `value = C * fit_shape(n_eff, k)` with weights `1 / stderr^2`.
#[pyfunction]
fn fit_amplitude(
    n_effs: Vec<u64>,
    values: Vec<f64>,
    stderrs: Vec<f64>,
    k: u32,
) -> PyResult<(f64, f64, f64, usize)> {
    if k < 1 {
        return Err(PyValueError::new_err("k must be >= 1"));
    }
    if n_effs.len() != values.len() || values.len() != stderrs.len() {
        return Err(PyValueError::new_err(format!(
            "n_effs, values and stderrs must have equal lengths, got {}, {}, {}",
            n_effs.len(),
            values.len(),
            stderrs.len()
        )));
    }
    if values.len() < 2 {
        return Err(PyValueError::new_err("the fit needs at least 2 points"));
    }
    let mut g = Vec::with_capacity(n_effs.len());
    for &n in &n_effs {
        if n < 1 {
            return Err(PyValueError::new_err("every n_eff must be >= 1"));
        }
        g.push(theory::fit_shape(n, k));
    }
    let mut w = Vec::with_capacity(stderrs.len());
    for &s in &stderrs {
        if !(s.is_finite() && s > 0.0) {
            return Err(PyValueError::new_err(format!(
                "every stderr must be finite and > 0, got {s}"
            )));
        }
        w.push(1.0 / (s * s));
    }
    let (c, c_err, chi2) = moments::weighted_amplitude_fit(&g, &values, &w).map_err(to_py_err)?;
    Ok((c, c_err, chi2, values.len() - 1))
}

/// Realized-volatility table from one measurement phase.
#[pyclass]
struct RvResult {
    table: RvTable,
}

impl RvResult {
    fn dt_index(&self, delta_t: usize) -> PyResult<usize> {
        self.table
            .delta_ts()
            .iter()
            .position(|&dt| dt == delta_t)
            .ok_or_else(|| {
                PyValueError::new_err(format!(
                    "delta_t = {delta_t} is not in the sampled grid {:?}",
                    self.table.delta_ts()
                ))
            })
    }
}

#[pymethods]
impl RvResult {
    /// Number of measured days.
    #[getter]
    fn n_days(&self) -> usize {
        self.table.n_days()
    }

    /// The sampled intervals, ascending.
    #[getter]
    fn delta_ts(&self) -> Vec<usize> {
        self.table.delta_ts().to_vec()
    }

    /// Intervals per day at this sampling interval (ceil(N / delta_t)).
    fn n_eff(&self, delta_t: usize) -> PyResult<usize> {
        Ok(self.table.n_eff(self.dt_index(delta_t)?))
    }

    /// One return per day, in day order.
    fn daily_returns(&self) -> Vec<f64> {
        self.table.returns().returns().collect()
    }

    /// Realized volatility per day at `delta_t`.
    fn rv(&self, delta_t: usize) -> PyResult<Vec<f64>> {
        let idx = self.dt_index(delta_t)?;
        Ok((0..self.table.n_days())
            .map(|d| self.table.rv(d, idx))
            .collect())
    }

    /// Standardized return per day at `delta_t`; `None` marks days with
    /// zero realized volatility.
    fn sr(&self, delta_t: usize) -> PyResult<Vec<Option<f64>>> {
        let idx = self.dt_index(delta_t)?;
        Ok(self.table.sr_series(idx).collect())
    }

    /// Standardized returns with the zero-volatility days dropped.
    fn valid_sr(&self, delta_t: usize) -> PyResult<Vec<f64>> {
        Ok(self.table.valid_sr(self.dt_index(delta_t)?))
    }

    /// Number of zero-volatility days excluded at `delta_t`.
    fn exclusions(&self, delta_t: usize) -> PyResult<usize> {
        Ok(self.table.exclusions(self.dt_index(delta_t)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "RvResult(n_days={}, delta_ts={:?})",
            self.table.n_days(),
            self.table.delta_ts()
        )
    }
}

/// Seeded spin-market simulator on an `side x side` lattice.
///
/// The tick clock is the spin update; one sweep of `side * side` updates
/// is one trading day.
#[pyclass]
struct MarketSim {
    lattice: SpinLattice,
    params: ModelParams,
    rng: ChaCha8Rng,
}

#[pymethods]
impl MarketSim {
    #[new]
    #[pyo3(signature = (side, beta=1.8, alpha=22.0, coupling=1.0, seed=1, init_mode="ordered"))]
    fn new(
        side: usize,
        beta: f64,
        alpha: f64,
        coupling: f64,
        seed: u64,
        init_mode: &str,
    ) -> PyResult<Self> {
        let mode: InitMode = init_mode.parse().map_err(to_py_err)?;
        let params = ModelParams {
            beta,
            alpha,
            coupling,
        };
        params.validate().map_err(to_py_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lattice = SpinLattice::new(side, mode, &mut rng).map_err(to_py_err)?;
        Ok(MarketSim {
            lattice,
            params,
            rng,
        })
    }

    /// Run `sweeps` full sweeps without recording anything.
    fn thermalize(&mut self, sweeps: usize) -> PyResult<()> {
        self.lattice
            .thermalize(&self.params, &mut self.rng, sweeps)
            .map_err(to_py_err)
    }

    /// Record `sweeps` days and return their realized-volatility table over
    /// the given sampling intervals (in ticks).
    fn measure(&mut self, sweeps: usize, delta_ts: Vec<usize>) -> PyResult<RvResult> {
        if sweeps == 0 {
            return Err(PyValueError::new_err("measure needs at least 1 sweep"));
        }
        let mut grid = delta_ts;
        grid.sort_unstable();
        grid.dedup();
        self.lattice.reset_update_counter();
        let mut acc = RvAccumulator::new(self.lattice.num_sites(), &grid, self.lattice.spin_sum())
            .map_err(to_py_err)?;
        for _ in 0..sweeps {
            self.lattice
                .sweep(&self.params, &mut self.rng, &mut acc)
                .map_err(to_py_err)?;
        }
        Ok(RvResult {
            table: acc.finish().map_err(to_py_err)?,
        })
    }

    /// Current magnetization `M = spin_sum / N`.
    fn magnetization(&self) -> f64 {
        self.lattice.magnetization()
    }

    /// Current sum of all spins.
    fn spin_sum(&self) -> i64 {
        self.lattice.spin_sum()
    }

    #[getter]
    fn side(&self) -> usize {
        self.lattice.side()
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketSim(side={}, beta={}, alpha={}, coupling={})",
            self.lattice.side(),
            self.params.beta,
            self.params.alpha,
            self.params.coupling
        )
    }
}

#[pymodule]
fn spinmarket_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(heat_bath_prob, m)?)?;
    m.add_function(wrap_pyfunction!(sr_density, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_moment, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_limit_moment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_shape, m)?)?;
    m.add_function(wrap_pyfunction!(moment_by_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_gaussian_sr, m)?)?;
    m.add_function(wrap_pyfunction!(sample_even_moment, m)?)?;
    m.add_function(wrap_pyfunction!(jackknife_error, m)?)?;
    m.add_function(wrap_pyfunction!(fit_amplitude, m)?)?;
    m.add_class::<MarketSim>()?;
    m.add_class::<RvResult>()?;
    Ok(())
}
