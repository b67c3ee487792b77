//! Simulation and analysis toolkit for a spin-based market model.
//!
//! The crate covers the full pipeline:
//!
//! * [`lattice`] — heat-bath dynamics on a square lattice of ±1 spins with a
//!   global-coupling feedback term; emits one tick per spin update.
//! * [`price`] — maps lattice magnetization to log-prices and returns, and
//!   groups ticks into trading days (one sweep = one day).
//! * [`rv`] — realized volatility over configurable intraday sampling
//!   intervals, and returns standardized by realized volatility.
//! * [`theory`] — the exact finite-sample density and moments of a Gaussian
//!   return standardized by its own realized volatility, plus a synthetic
//!   Gaussian generator used as an end-to-end oracle.
//! * [`moments`] — sample moment estimation with blocked-jackknife errors and
//!   one-parameter amplitude fits against the finite-sample moment curves.
//! * [`pipeline`] — batch runner tying everything together: config handling,
//!   CSV/JSON outputs, and reproducibility manifests.
//!
//! All randomness flows through a seeded counter-based generator selected in
//! the run configuration, so every artifact is bit-for-bit reproducible.

pub mod config;
pub mod io;
pub mod lattice;
pub mod moments;
pub mod pipeline;
pub mod price;
pub mod quad;
pub mod rv;
pub mod theory;

pub use config::{InitMode, RngId, RunConfig};
pub use lattice::{heat_bath_prob, ModelParams, SpinLattice, TickEvent, TickSink};
pub use moments::{FitResult, MomentEstimate, MomentTable};
pub use price::{DayRecord, ReturnSeries};
pub use rv::{RvAccumulator, RvTable};
pub use theory::{synthetic_gaussian_sr, theoretical_moment, FiniteSampleLaw};

/// Unified error type for the whole toolkit.
///
/// The split between variants mirrors the process exit codes of the command
/// line tool: configuration/usage problems ([`Error::InvalidConfig`],
/// [`Error::UnsupportedParameter`], [`Error::InsufficientData`],
/// [`Error::DataFormat`]) map to exit code 1, while runtime failures
/// ([`Error::TruncatedDay`], [`Error::Io`], [`Error::Internal`]) map to 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A parameter is outside the domain the formulas are defined on.
    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    /// Not enough data to carry out an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An input file does not match the expected schema.
    #[error("malformed data in {path}: {detail}")]
    DataFormat { path: String, detail: String },

    /// A tick stream ended mid-day.
    #[error("day {day} is truncated: got {got} ticks, expected {expected}")]
    TruncatedDay {
        day: usize,
        got: usize,
        expected: usize,
    },

    /// An internal invariant was violated (a bug, not a user error).
    #[error("internal error: {0}")]
    Internal(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, CLI, input files)
    /// rather than by a failure during an otherwise valid run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::UnsupportedParameter(_)
                | Error::InsufficientData(_)
                | Error::DataFormat { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
