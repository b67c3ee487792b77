//! Run configuration: a flat TOML file with defaults for every key.
//!
//! The defaults reproduce the reference protocol (125×125 lattice,
//! β = 1.8, α = 22, J = 1, ordered start, 5·10³ thermalization and 3·10⁴
//! measurement sweeps). Unknown keys are rejected so typos fail loudly
//! instead of silently running the default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Environment variable that overrides `output_dir` (and only that key).
pub const OUTPUT_DIR_ENV: &str = "SPINMARKET_OUTPUT_DIR";

/// Intraday sampling intervals used when the config does not list its own.
pub const DEFAULT_DELTA_T_GRID: [usize; 14] = [
    1, 2, 5, 10, 25, 50, 125, 250, 625, 1000, 1563, 2000, 3125, 4000,
];

/// Default grid restricted to intervals that fit into one day of `n_sites`
/// ticks. Useful for small lattices where the largest defaults are longer
/// than a whole day.
pub fn default_grid_clipped(n_sites: usize) -> Vec<usize> {
    DEFAULT_DELTA_T_GRID
        .iter()
        .copied()
        .filter(|&dt| dt <= n_sites)
        .collect()
}

/// Initial spin configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// All spins `+1`.
    Ordered,
    /// Independent fair coin per site.
    Random,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::Ordered => write!(f, "ordered"),
            InitMode::Random => write!(f, "random"),
        }
    }
}

impl FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(InitMode::Ordered),
            "random" => Ok(InitMode::Random),
            other => Err(Error::InvalidConfig(format!(
                "init_mode must be \"ordered\" or \"random\", got \"{other}\""
            ))),
        }
    }
}

/// Selectable random number generator family. All are counter-based
/// ChaCha variants; they differ only in round count (speed vs margin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RngId {
    ChaCha8,
    ChaCha12,
    ChaCha20,
}

impl fmt::Display for RngId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RngId::ChaCha8 => write!(f, "chacha8"),
            RngId::ChaCha12 => write!(f, "chacha12"),
            RngId::ChaCha20 => write!(f, "chacha20"),
        }
    }
}

impl FromStr for RngId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chacha8" => Ok(RngId::ChaCha8),
            "chacha12" => Ok(RngId::ChaCha12),
            "chacha20" => Ok(RngId::ChaCha20),
            other => Err(Error::InvalidConfig(format!(
                "rng_id must be one of \"chacha8\", \"chacha12\", \"chacha20\", got \"{other}\""
            ))),
        }
    }
}

/// Complete description of one simulation + analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Lattice side length; the lattice has `L × L` sites.
    #[serde(rename = "L")]
    pub side: usize,
    /// Inverse temperature β.
    pub beta: f64,
    /// Global feedback strength α.
    pub alpha: f64,
    /// Nearest-neighbor coupling J.
    #[serde(rename = "J")]
    pub coupling: f64,
    /// Log-price scale: `ln p = λ · M`.
    pub lambda: f64,
    pub init_mode: InitMode,
    pub seed: u64,
    pub rng_id: RngId,
    pub thermalization_sweeps: usize,
    pub measurement_sweeps: usize,
    /// Intraday sampling intervals, in ticks. Sorted and deduplicated on
    /// validation; each must lie in `[1, L²]`.
    pub delta_t_grid: Vec<usize>,
    /// Inclusive `[lo, hi]` interval of sampling intervals used by the
    /// moment-curve fits.
    pub fit_range: (usize, usize),
    /// Days per jackknife block.
    pub jackknife_block: usize,
    pub output_dir: PathBuf,
    /// Also write the raw per-update spin sums as little-endian `i16`.
    pub tick_dump: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            side: 125,
            beta: 1.8,
            alpha: 22.0,
            coupling: 1.0,
            lambda: 0.5,
            init_mode: InitMode::Ordered,
            seed: 1,
            rng_id: RngId::ChaCha8,
            thermalization_sweeps: 5_000,
            measurement_sweeps: 30_000,
            delta_t_grid: DEFAULT_DELTA_T_GRID.to_vec(),
            fit_range: (1, 2_000),
            jackknife_block: 100,
            output_dir: PathBuf::from("out"),
            tick_dump: false,
        }
    }
}

impl RunConfig {
    /// Number of lattice sites (= ticks per day).
    pub fn num_sites(&self) -> usize {
        self.side * self.side
    }

    /// Model couplings as consumed by the lattice.
    pub fn model_params(&self) -> crate::lattice::ModelParams {
        crate::lattice::ModelParams {
            beta: self.beta,
            alpha: self.alpha,
            coupling: self.coupling,
        }
    }

    /// Parse from TOML text, then validate and normalize.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a TOML config file, then validate and normalize.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Replace `output_dir` with the [`OUTPUT_DIR_ENV`] value, if set.
    /// No other key can be overridden from the environment.
    pub fn apply_env_override(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    /// Check every key and normalize the sampling grid (sort + dedup).
    /// Error messages name the offending key.
    pub fn validate(&mut self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::InvalidConfig(format!(
                "L must be at least 2, got {}",
                self.side
            )));
        }
        if self.side > 46_340 {
            // L² must fit comfortably in usize/i64 tick arithmetic.
            return Err(Error::InvalidConfig(format!(
                "L = {} is too large (max 46340)",
                self.side
            )));
        }
        crate::lattice::ModelParams {
            beta: self.beta,
            alpha: self.alpha,
            coupling: self.coupling,
        }
        .validate()?;
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if self.measurement_sweeps == 0 {
            return Err(Error::InvalidConfig(
                "measurement_sweeps must be at least 1".into(),
            ));
        }
        let n = self.num_sites();
        if self.delta_t_grid.is_empty() {
            return Err(Error::InvalidConfig("delta_t_grid must not be empty".into()));
        }
        self.delta_t_grid.sort_unstable();
        self.delta_t_grid.dedup();
        for &dt in &self.delta_t_grid {
            if dt == 0 || dt > n {
                return Err(Error::InvalidConfig(format!(
                    "delta_t_grid entries must lie in [1, L² = {n}], got {dt}"
                )));
            }
        }
        if self.fit_range.0 == 0 || self.fit_range.0 > self.fit_range.1 {
            return Err(Error::InvalidConfig(format!(
                "fit_range must satisfy 1 <= lo <= hi, got [{}, {}]",
                self.fit_range.0, self.fit_range.1
            )));
        }
        if self.jackknife_block == 0 {
            return Err(Error::InvalidConfig(
                "jackknife_block must be at least 1".into(),
            ));
        }
        if self.tick_dump && n > i16::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "tick_dump stores spin sums as i16, which requires L² <= {}, got {n}",
                i16::MAX
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("output_dir must not be empty".into()));
        }
        Ok(())
    }
}
