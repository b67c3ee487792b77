//! End-to-end runs: simulate → tables on disk → moment analysis → summary.
//!
//! Output layout of a simulation directory:
//!
//! * `daily_returns.csv` — day, open/close spin sums, daily return.
//! * `rv_table.csv` — per day × sampling interval: realized volatility,
//!   standardized return, validity flag.
//! * `ticks.bin` — optional raw spin sums, one little-endian `i16` per
//!   update (requires `L² ≤ 32767`).
//! * `run_manifest.json` — config, warnings, timings, and SHA-256 digests
//!   of every data file. The manifest is written last: outputs in a
//!   directory without a manifest whose `status` is `"complete"` must be
//!   treated as invalid.
//!
//! Analysis adds `moments.csv`, `summary.json` and `analysis_manifest.json`.
//! Every data artifact (CSV/JSON except the manifests, which carry wall
//! times) is byte-identical across reruns with the same config and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha12Rng, ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::config::{RngId, RunConfig};
use crate::io::{self, OracleMomentRow};
use crate::lattice::{SpinLattice, TickEvent, TickSink};
use crate::moments::{
    fit_amplitude_jackknife, fit_moment_curve, jackknife_error, moment_table, sample_even_moment,
    FitResult, MomentEstimate, MomentTable, TableEntry,
};
use crate::rv::{RvAccumulator, RvTable};
use crate::theory::{
    fit_shape, gaussian_limit_moment, synthetic_gaussian_sr, theoretical_moment, FiniteSampleLaw,
};
use crate::{Error, Result};

/// Zero-volatility exclusion count at one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCount {
    pub delta_t: usize,
    pub excluded_days: usize,
}

/// Digest of one output file, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Reproducibility record written next to every batch of outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// `"simulate"`, `"analyze"`, `"theory"` or `"oracle"`.
    pub kind: String,
    /// `"complete"` when the batch finished; outputs are only valid then.
    pub status: String,
    pub config: Option<RunConfig>,
    pub n_days: Option<usize>,
    pub zero_rv_exclusions: Vec<ExclusionCount>,
    pub warnings: Vec<String>,
    /// Wall-clock timings. The only non-deterministic content in any
    /// output, which is why it lives here and not in `summary.json`.
    pub timings_secs: BTreeMap<String, f64>,
    pub outputs: Vec<FileDigest>,
}

/// A measured value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueErr {
    pub value: f64,
    #[serde(deserialize_with = "crate::io::f64_or_null")]
    pub stderr: f64,
}

/// Deterministic provenance subset embedded in `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryProvenance {
    pub tool_version: String,
    pub rng_id: String,
    pub seed: u64,
    pub n_days: usize,
    pub zero_rv_exclusions: Vec<ExclusionCount>,
    pub warnings: Vec<String>,
}

/// Machine-readable analysis summary (`summary.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: RunConfig,
    pub manifest: SummaryProvenance,
    /// Directly measured variance of the standardized return at `Δt = 1`,
    /// absent when 1 is not in the sampling grid.
    pub variance_dt1: Option<ValueErr>,
    pub fits: Vec<FitResult>,
    pub table: MomentTable,
}

/// In-memory analysis products.
#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub estimates: Vec<MomentEstimate>,
    pub fits: Vec<FitResult>,
    pub variance_dt1: Option<(f64, f64)>,
    pub table: MomentTable,
    pub exclusions: Vec<ExclusionCount>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct SimulatedRun {
    pub table: RvTable,
    pub manifest: RunManifest,
}

#[derive(Debug)]
pub struct AnalyzedRun {
    pub analysis: AnalysisResult,
    pub summary: Summary,
    pub manifest: RunManifest,
}

/// Overrides applied on top of the stored run config by `analyze`.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub fit_range: Option<(usize, usize)>,
    pub jackknife_block: Option<usize>,
    /// Defaults to the input directory.
    pub output_dir: Option<PathBuf>,
}

const SCHEMA_VERSION: u32 = 1;

fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Tick sink feeding the streaming accumulator, optionally teeing raw spin
/// sums into a binary dump.
struct MeasureSink<'a> {
    acc: RvAccumulator,
    dump: Option<&'a mut dyn Write>,
}

impl TickSink for MeasureSink<'_> {
    #[inline]
    fn on_tick(&mut self, tick: TickEvent) -> Result<()> {
        if let Some(w) = &mut self.dump {
            let v = i16::try_from(tick.spin_sum).map_err(|_| {
                Error::Internal(format!(
                    "spin sum {} does not fit the i16 tick dump",
                    tick.spin_sum
                ))
            })?;
            w.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io("ticks.bin", e))?;
        }
        self.acc.on_tick(tick)
    }
}

/// Run the full simulation in memory and return the realized-volatility
/// table (which includes the daily return series).
pub fn simulate(config: &RunConfig) -> Result<RvTable> {
    let mut cfg = config.clone();
    cfg.validate()?;
    Ok(dispatch_simulation(&cfg, None)?.0)
}

fn dispatch_simulation(
    cfg: &RunConfig,
    dump: Option<&mut dyn Write>,
) -> Result<(RvTable, BTreeMap<String, f64>)> {
    match cfg.rng_id {
        RngId::ChaCha8 => run_simulation::<ChaCha8Rng>(cfg, dump),
        RngId::ChaCha12 => run_simulation::<ChaCha12Rng>(cfg, dump),
        RngId::ChaCha20 => run_simulation::<ChaCha20Rng>(cfg, dump),
    }
}

fn run_simulation<R: Rng + SeedableRng>(
    cfg: &RunConfig,
    dump: Option<&mut dyn Write>,
) -> Result<(RvTable, BTreeMap<String, f64>)> {
    let params = cfg.model_params();
    let mut timings = BTreeMap::new();
    let mut rng = R::seed_from_u64(cfg.seed);
    let mut lattice = SpinLattice::new(cfg.side, cfg.init_mode, &mut rng)?;

    let t0 = Instant::now();
    lattice.thermalize(&params, &mut rng, cfg.thermalization_sweeps)?;
    timings.insert("thermalization".into(), t0.elapsed().as_secs_f64());

    lattice.reset_update_counter();
    let t1 = Instant::now();
    let mut sink = MeasureSink {
        acc: RvAccumulator::new(cfg.num_sites(), &cfg.delta_t_grid, lattice.spin_sum())?,
        dump,
    };
    for _ in 0..cfg.measurement_sweeps {
        lattice.sweep(&params, &mut rng, &mut sink)?;
    }
    let table = sink.acc.finish()?;
    timings.insert("measurement".into(), t1.elapsed().as_secs_f64());

    // Audit the incremental bookkeeping once per run.
    if lattice.spin_sum() != lattice.recount_spin_sum() {
        return Err(Error::Internal(
            "incremental spin sum drifted from a full recount".into(),
        ));
    }
    Ok((table, timings))
}

/// Run the simulation and write `daily_returns.csv`, `rv_table.csv`,
/// optionally `ticks.bin`, and finally `run_manifest.json` into
/// `config.output_dir`.
pub fn simulate_to_dir(config: &RunConfig) -> Result<SimulatedRun> {
    let mut cfg = config.clone();
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let total = Instant::now();
    let tick_path = dir.join("ticks.bin");
    let (table, mut timings) = if cfg.tick_dump {
        let tmp = dir.join("ticks.bin.tmp");
        let file =
            fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        let mut writer = BufWriter::new(file);
        let result = dispatch_simulation(&cfg, Some(&mut writer))?;
        writer
            .into_inner()
            .map_err(|e| Error::io(tmp.display().to_string(), e.into_error()))?
            .sync_all()
            .map_err(|e| Error::io(tmp.display().to_string(), e))?;
        fs::rename(&tmp, &tick_path)
            .map_err(|e| Error::io(tick_path.display().to_string(), e))?;
        result
    } else {
        dispatch_simulation(&cfg, None)?
    };

    let t_io = Instant::now();
    let daily = io::daily_returns_csv(table.returns());
    let rv_csv = io::rv_table_csv(&table);
    io::atomic_write(&dir.join("daily_returns.csv"), &daily)?;
    io::atomic_write(&dir.join("rv_table.csv"), &rv_csv)?;
    let mut outputs = vec![
        FileDigest {
            path: "daily_returns.csv".into(),
            bytes: daily.len() as u64,
            sha256: io::sha256_hex(&daily),
        },
        FileDigest {
            path: "rv_table.csv".into(),
            bytes: rv_csv.len() as u64,
            sha256: io::sha256_hex(&rv_csv),
        },
    ];
    if cfg.tick_dump {
        let bytes = fs::metadata(&tick_path)
            .map_err(|e| Error::io(tick_path.display().to_string(), e))?
            .len();
        outputs.push(FileDigest {
            path: "ticks.bin".into(),
            bytes,
            sha256: io::sha256_hex_of_file(&tick_path)?,
        });
    }
    timings.insert("io".into(), t_io.elapsed().as_secs_f64());
    timings.insert("total".into(), total.elapsed().as_secs_f64());

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: tool_version(),
        kind: "simulate".into(),
        status: "complete".into(),
        config: Some(cfg),
        n_days: Some(table.n_days()),
        zero_rv_exclusions: exclusion_counts(&table),
        warnings: Vec::new(),
        timings_secs: timings,
        outputs,
    };
    write_manifest(&dir.join("run_manifest.json"), &manifest)?;
    Ok(SimulatedRun { table, manifest })
}

fn exclusion_counts(table: &RvTable) -> Vec<ExclusionCount> {
    table
        .delta_ts()
        .iter()
        .enumerate()
        .map(|(dt_idx, &delta_t)| ExclusionCount {
            delta_t,
            excluded_days: table.exclusions(dt_idx),
        })
        .collect()
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)
        .map_err(|e| Error::Internal(format!("manifest serialization failed: {e}")))?;
    bytes.push(b'\n');
    io::atomic_write(path, &bytes)
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::InvalidConfig(format!(
                "{} not found — point --input-dir at a completed simulation",
                path.display()
            ))
        } else {
            Error::io(path.display().to_string(), e)
        }
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::DataFormat {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Moment analysis of a realized-volatility table: raw even moments of the
/// standardized returns per sampling interval with blocked-jackknife
/// errors, and amplitude fits of the moment curves for `k = 2..5`.
pub fn analyze(
    table: &RvTable,
    fit_range: (usize, usize),
    jackknife_block: usize,
) -> Result<AnalysisResult> {
    if jackknife_block == 0 {
        return Err(Error::InvalidConfig(
            "jackknife_block must be at least 1".into(),
        ));
    }
    let n_days = table.n_days();
    let n_dts = table.delta_ts().len();
    let mut warnings = Vec::new();
    let mut estimates = Vec::new();
    let exclusions = exclusion_counts(table);

    // Day-ordered standardized returns per interval (None = excluded day).
    let sr_series: Vec<Vec<Option<f64>>> = (0..n_dts)
        .map(|dt_idx| table.sr_series(dt_idx).collect())
        .collect();

    for (dt_idx, &delta_t) in table.delta_ts().iter().enumerate() {
        let excluded = exclusions[dt_idx].excluded_days;
        if excluded * 10 > n_days {
            warnings.push(format!(
                "delta_t = {delta_t}: {excluded} of {n_days} days excluded (zero realized volatility)"
            ));
        }
        let valid: Vec<f64> = sr_series[dt_idx].iter().flatten().copied().collect();
        if valid.is_empty() {
            warnings.push(format!(
                "delta_t = {delta_t}: no valid days, skipping moment estimates"
            ));
            continue;
        }
        for k in 1..=5u32 {
            let value = sample_even_moment(&valid, k)?;
            let powers: Vec<f64> = valid.iter().map(|x| x.powi(2 * k as i32)).collect();
            let stderr = match jackknife_error(&powers, jackknife_block) {
                Ok(s) => s,
                Err(Error::InsufficientData(msg)) => {
                    warnings.push(format!("delta_t = {delta_t}, k = {k}: no error bar ({msg})"));
                    f64::NAN
                }
                Err(e) => return Err(e),
            };
            estimates.push(MomentEstimate {
                delta_t,
                n_eff: table.n_eff(dt_idx),
                k,
                value,
                stderr,
                n_days: valid.len(),
            });
        }
    }

    let variance_dt1 = estimates
        .iter()
        .find(|e| e.delta_t == 1 && e.k == 1)
        .map(|e| (e.value, e.stderr));
    if variance_dt1.is_none() {
        warnings.push("delta_t = 1 is not in the grid: no direct variance benchmark".into());
    }

    let mut fits = Vec::new();
    for k in 2..=5u32 {
        match fit_moment_curve(&estimates, k, fit_range) {
            Ok(mut fit) => {
                // Delete-one-block jackknife of the amplitude, with the fit's
                // weights held fixed.
                let selected: Vec<&MomentEstimate> = estimates
                    .iter()
                    .filter(|e| e.k == k && e.delta_t >= fit_range.0 && e.delta_t <= fit_range.1)
                    .collect();
                debug_assert_eq!(selected.len(), fit.n_points);
                let day_powers: Vec<Vec<Option<f64>>> = selected
                    .iter()
                    .map(|e| {
                        let dt_idx = table
                            .delta_ts()
                            .iter()
                            .position(|&d| d == e.delta_t)
                            .expect("estimate refers to a grid entry");
                        sr_series[dt_idx]
                            .iter()
                            .map(|o| o.map(|x| x.powi(2 * k as i32)))
                            .collect()
                    })
                    .collect();
                let g: Vec<f64> = selected
                    .iter()
                    .map(|e| fit_shape(e.n_eff as u64, k))
                    .collect();
                let w: Vec<f64> = if fit.weighted {
                    selected.iter().map(|e| 1.0 / (e.stderr * e.stderr)).collect()
                } else {
                    vec![1.0; selected.len()]
                };
                fit.amplitude_err_jackknife =
                    fit_amplitude_jackknife(&day_powers, &g, &w, jackknife_block);
                fits.push(fit);
            }
            Err(Error::InsufficientData(msg)) => {
                warnings.push(format!("k = {k}: moment-curve fit skipped ({msg})"));
            }
            Err(e) => return Err(e),
        }
    }

    let table_summary = moment_table(variance_dt1, &fits);
    Ok(AnalysisResult {
        estimates,
        fits,
        variance_dt1,
        table: table_summary,
        exclusions,
        warnings,
    })
}

/// Read a completed simulation directory, analyze it, and write
/// `moments.csv`, `summary.json` and `analysis_manifest.json`.
pub fn analyze_to_dir(input_dir: &Path, opts: &AnalyzeOptions) -> Result<AnalyzedRun> {
    let total = Instant::now();
    let manifest_path = input_dir.join("run_manifest.json");
    let run_manifest = read_manifest(&manifest_path)?;
    if run_manifest.status != "complete" {
        return Err(Error::DataFormat {
            path: manifest_path.display().to_string(),
            detail: format!(
                "run status is \"{}\"; outputs are not valid for analysis",
                run_manifest.status
            ),
        });
    }
    let Some(mut cfg) = run_manifest.config else {
        return Err(Error::DataFormat {
            path: manifest_path.display().to_string(),
            detail: "manifest carries no run config".into(),
        });
    };
    if let Some(fr) = opts.fit_range {
        cfg.fit_range = fr;
    }
    if let Some(b) = opts.jackknife_block {
        cfg.jackknife_block = b;
    }
    let out_dir = opts
        .output_dir
        .clone()
        .unwrap_or_else(|| input_dir.to_path_buf());
    cfg.output_dir = out_dir.clone();
    cfg.validate()?;

    let returns = io::read_daily_returns(&input_dir.join("daily_returns.csv"), cfg.num_sites())?;
    let table = io::read_rv_table(&input_dir.join("rv_table.csv"), returns)?;
    if table.delta_ts() != cfg.delta_t_grid.as_slice() {
        return Err(Error::DataFormat {
            path: input_dir.join("rv_table.csv").display().to_string(),
            detail: format!(
                "table grid {:?} does not match the manifest grid {:?}",
                table.delta_ts(),
                cfg.delta_t_grid
            ),
        });
    }

    let t_analysis = Instant::now();
    let analysis = analyze(&table, cfg.fit_range, cfg.jackknife_block)?;
    let mut timings = BTreeMap::new();
    timings.insert("analysis".into(), t_analysis.elapsed().as_secs_f64());

    fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let moments_bytes = io::moments_csv(&analysis.estimates);
    io::atomic_write(&out_dir.join("moments.csv"), &moments_bytes)?;

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        manifest: SummaryProvenance {
            tool_version: tool_version(),
            rng_id: cfg.rng_id.to_string(),
            seed: cfg.seed,
            n_days: table.n_days(),
            zero_rv_exclusions: analysis.exclusions.clone(),
            warnings: analysis.warnings.clone(),
        },
        variance_dt1: analysis
            .variance_dt1
            .map(|(value, stderr)| ValueErr { value, stderr }),
        fits: analysis.fits.clone(),
        table: analysis.table.clone(),
    };
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)
        .map_err(|e| Error::Internal(format!("summary serialization failed: {e}")))?;
    summary_bytes.push(b'\n');
    io::atomic_write(&out_dir.join("summary.json"), &summary_bytes)?;

    timings.insert("total".into(), total.elapsed().as_secs_f64());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: tool_version(),
        kind: "analyze".into(),
        status: "complete".into(),
        config: Some(cfg),
        n_days: Some(table.n_days()),
        zero_rv_exclusions: analysis.exclusions.clone(),
        warnings: analysis.warnings.clone(),
        timings_secs: timings,
        outputs: vec![
            FileDigest {
                path: "moments.csv".into(),
                bytes: moments_bytes.len() as u64,
                sha256: io::sha256_hex(&moments_bytes),
            },
            FileDigest {
                path: "summary.json".into(),
                bytes: summary_bytes.len() as u64,
                sha256: io::sha256_hex(&summary_bytes),
            },
        ],
    };
    write_manifest(&out_dir.join("analysis_manifest.json"), &manifest)?;
    Ok(AnalyzedRun {
        analysis,
        summary,
        manifest,
    })
}

/// Write the closed-form moment curves and density samples for a set of
/// interval counts: `theory_moments.csv`, `sr_density.csv`, and a manifest.
pub fn theory_to_dir(
    n_values: &[u64],
    k_max: u32,
    density_points: usize,
    out_dir: &Path,
) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::InvalidConfig("n_values must not be empty".into()));
    }
    if !(1..=10).contains(&k_max) {
        return Err(Error::InvalidConfig(format!(
            "k_max must lie in [1, 10], got {k_max}"
        )));
    }
    if density_points < 2 {
        return Err(Error::InvalidConfig(format!(
            "density_points must be at least 2, got {density_points}"
        )));
    }
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let total = Instant::now();
    let mut moment_rows = Vec::new();
    let mut density_rows = Vec::new();
    for &n in &ns {
        let law = FiniteSampleLaw::new(n)?;
        for k in 1..=k_max {
            moment_rows.push(io::TheoryMomentRow {
                n,
                k,
                moment: theoretical_moment(n, k),
                gaussian_limit: gaussian_limit_moment(k),
            });
        }
        let (lo, hi) = law.support();
        let step = (hi - lo) / (density_points - 1) as f64;
        for i in 0..density_points {
            let x = if i + 1 == density_points { hi } else { lo + i as f64 * step };
            density_rows.push(io::DensityRow {
                n,
                x,
                density: law.density(x),
            });
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let moments_bytes = io::theory_moments_csv(&moment_rows);
    let density_bytes = io::density_csv(&density_rows);
    io::atomic_write(&out_dir.join("theory_moments.csv"), &moments_bytes)?;
    io::atomic_write(&out_dir.join("sr_density.csv"), &density_bytes)?;

    let mut timings = BTreeMap::new();
    timings.insert("total".into(), total.elapsed().as_secs_f64());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: tool_version(),
        kind: "theory".into(),
        status: "complete".into(),
        config: None,
        n_days: None,
        zero_rv_exclusions: Vec::new(),
        warnings: Vec::new(),
        timings_secs: timings,
        outputs: vec![
            FileDigest {
                path: "theory_moments.csv".into(),
                bytes: moments_bytes.len() as u64,
                sha256: io::sha256_hex(&moments_bytes),
            },
            FileDigest {
                path: "sr_density.csv".into(),
                bytes: density_bytes.len() as u64,
                sha256: io::sha256_hex(&density_bytes),
            },
        ],
    };
    write_manifest(&out_dir.join("theory_manifest.json"), &manifest)
}

/// Outcome of a synthetic-Gaussian oracle run.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub moments: Vec<OracleMomentRow>,
    /// Across-`n` amplitude fits (k = 2..5); empty with a single `n`.
    pub fits: Vec<FitResult>,
    pub max_abs_deviation_sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OracleSummary {
    schema_version: u32,
    n_values: Vec<u64>,
    days: usize,
    sigma: f64,
    seed: u64,
    jackknife_block: usize,
    moments: Vec<OracleMomentRow>,
    fits: Vec<FitResult>,
    max_abs_deviation_sigma: f64,
}

/// Draw standardized returns from the exact Gaussian null for each `n` and
/// push them through the same estimators used on simulation data. This
/// validates standardization, moment estimation, jackknife errors, and
/// (given several `n`) the amplitude fits, independently of the lattice.
pub fn oracle_moments(
    n_values: &[u64],
    days: usize,
    sigma: f64,
    seed: u64,
    jackknife_block: usize,
) -> Result<OracleOutcome> {
    if n_values.is_empty() {
        return Err(Error::InvalidConfig("n_values must not be empty".into()));
    }
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        if n < 2 {
            return Err(Error::UnsupportedParameter(format!(
                "oracle comparisons need n >= 2 intervals, got {n}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for &n in &ns {
        let sr = synthetic_gaussian_sr(n, days, sigma, &mut rng)?;
        for k in 1..=5u32 {
            let value = sample_even_moment(&sr, k)?;
            let powers: Vec<f64> = sr.iter().map(|x| x.powi(2 * k as i32)).collect();
            let stderr = jackknife_error(&powers, jackknife_block)?;
            let theory = theoretical_moment(n, k);
            rows.push(OracleMomentRow {
                n,
                k,
                moment: value,
                stderr,
                theory,
                deviation_sigma: (value - theory) / stderr,
            });
            // For across-n fits, the interval count plays the role the
            // sampling interval has on simulation data.
            estimates.push(MomentEstimate {
                delta_t: n as usize,
                n_eff: n as usize,
                k,
                value,
                stderr,
                n_days: sr.len(),
            });
        }
    }

    let mut fits = Vec::new();
    if ns.len() >= 2 {
        for k in 2..=5u32 {
            fits.push(fit_moment_curve(&estimates, k, (1, usize::MAX))?);
        }
    }
    let max_abs_deviation_sigma = rows
        .iter()
        .map(|r| r.deviation_sigma.abs())
        .fold(0.0, f64::max);
    Ok(OracleOutcome {
        moments: rows,
        fits,
        max_abs_deviation_sigma,
    })
}

/// Run the Gaussian oracle and write `oracle_moments.csv`,
/// `oracle_summary.json` and a manifest.
pub fn oracle_to_dir(
    n_values: &[u64],
    days: usize,
    sigma: f64,
    seed: u64,
    jackknife_block: usize,
    out_dir: &Path,
) -> Result<OracleOutcome> {
    let total = Instant::now();
    let outcome = oracle_moments(n_values, days, sigma, seed, jackknife_block)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let moments_bytes = io::oracle_moments_csv(&outcome.moments);
    io::atomic_write(&out_dir.join("oracle_moments.csv"), &moments_bytes)?;

    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let summary = OracleSummary {
        schema_version: SCHEMA_VERSION,
        n_values: ns,
        days,
        sigma,
        seed,
        jackknife_block,
        moments: outcome.moments.clone(),
        fits: outcome.fits.clone(),
        max_abs_deviation_sigma: outcome.max_abs_deviation_sigma,
    };
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)
        .map_err(|e| Error::Internal(format!("oracle summary serialization failed: {e}")))?;
    summary_bytes.push(b'\n');
    io::atomic_write(&out_dir.join("oracle_summary.json"), &summary_bytes)?;

    let mut timings = BTreeMap::new();
    timings.insert("total".into(), total.elapsed().as_secs_f64());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: tool_version(),
        kind: "oracle".into(),
        status: "complete".into(),
        config: None,
        n_days: Some(days),
        zero_rv_exclusions: Vec::new(),
        warnings: Vec::new(),
        timings_secs: timings,
        outputs: vec![
            FileDigest {
                path: "oracle_moments.csv".into(),
                bytes: moments_bytes.len() as u64,
                sha256: io::sha256_hex(&moments_bytes),
            },
            FileDigest {
                path: "oracle_summary.json".into(),
                bytes: summary_bytes.len() as u64,
                sha256: io::sha256_hex(&summary_bytes),
            },
        ],
    };
    write_manifest(&out_dir.join("oracle_manifest.json"), &manifest)?;
    Ok(outcome)
}

/// Render a human-readable report from a `summary.json`.
pub fn report(summary_path: &Path) -> Result<String> {
    let bytes = fs::read(summary_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::InvalidConfig(format!("{} not found", summary_path.display()))
        } else {
            Error::io(summary_path.display().to_string(), e)
        }
    })?;
    let summary: Summary = serde_json::from_slice(&bytes).map_err(|e| Error::DataFormat {
        path: summary_path.display().to_string(),
        detail: e.to_string(),
    })?;

    let cfg = &summary.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Standardized-return moments: measured delta_t -> 0 values vs Gaussian"
    );
    let _ = writeln!(
        out,
        "run: L = {} (N = {}), beta = {}, alpha = {}, J = {}, seed = {} ({}), days = {}",
        cfg.side,
        cfg.num_sites(),
        cfg.beta,
        cfg.alpha,
        cfg.coupling,
        cfg.seed,
        summary.manifest.rng_id,
        summary.manifest.n_days
    );
    let _ = writeln!(
        out,
        "fits: delta_t in [{}, {}], jackknife block = {} days",
        cfg.fit_range.0, cfg.fit_range.1, cfg.jackknife_block
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>3}  {:>10}  {:>12}  {:>10}  source",
        "k", "gaussian", "measured", "stderr"
    );
    for (i, theory) in summary.table.theory.iter().enumerate() {
        let k = i + 1;
        let (measured, stderr) = match summary.table.measured[i] {
            Some(TableEntry { value, err }) => (format!("{value:.4}"), format!("{err:.4}")),
            None => ("-".into(), "-".into()),
        };
        let source = if k == 1 {
            "variance at delta_t = 1".to_string()
        } else {
            match summary.fits.iter().find(|f| f.k as usize == k) {
                Some(f) => format!(
                    "fit amplitude ({} pts, chi2/dof = {:.2}{})",
                    f.n_points,
                    f.chi2 / f.dof.max(1) as f64,
                    if f.weighted { "" } else { ", unweighted" }
                ),
                None => "no fit".to_string(),
            }
        };
        let _ = writeln!(
            out,
            "{k:>3}  {theory:>10}  {measured:>12}  {stderr:>10}  {source}"
        );
    }
    if summary.variance_dt1.is_none() {
        let _ = writeln!(out, "\nnote: delta_t = 1 was not in the sampling grid");
    }
    if !summary.manifest.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings:");
        for w in &summary.manifest.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    Ok(out)
}
