//! File formats: CSV tables, atomic writes, and content digests.
//!
//! All tables are plain CSV with headers. Floats are written in shortest
//! round-trip form, so reading a table back reproduces the original values
//! bit for bit; combined with integer open/close sums in the returns file
//! this makes `analyze` on saved outputs identical to an in-memory
//! analysis. Files are written atomically (temp file + rename) so readers
//! never observe a half-written table.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::price::{n_intervals, ReturnSeries};
use crate::rv::RvTable;
use crate::{Error, Result};

/// Write `bytes` to `path` via a temporary sibling file and rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_file_name(format!(
        "{}.tmp",
        path.file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::InvalidConfig(format!("bad file path {}", path.display())))?
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(())
    };
    write().map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex_of_file(path: &Path) -> Result<String> {
    let mut f =
        fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Accept JSON `null` as NaN. JSON has no spelling for non-finite floats;
/// serde_json writes them as `null`, so error fields that may legitimately
/// be NaN (an unavailable jackknife) need this to round-trip.
pub(crate) fn f64_or_null<'de, D>(d: D) -> std::result::Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn data_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::DataFormat {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    data_err(path, e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct DailyReturnRow {
    day: usize,
    open_sum: i64,
    close_sum: i64,
    #[serde(rename = "return")]
    ret: f64,
}

/// Serialize the daily return series (columns: day, open_sum, close_sum,
/// return).
pub fn daily_returns_csv(returns: &ReturnSeries) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for day in 0..returns.len() {
        let (open_sum, close_sum) = returns.open_close(day);
        w.serialize(DailyReturnRow {
            day,
            open_sum,
            close_sum,
            ret: returns.daily_return(day),
        })
        .expect("csv write to memory cannot fail");
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

/// Read a daily return series back, verifying day contiguity, open/close
/// chaining, and that the return column matches the integer sums.
pub fn read_daily_returns(path: &Path, n_sites: usize) -> Result<ReturnSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut series = ReturnSeries::new(n_sites);
    for (i, row) in reader.deserialize::<DailyReturnRow>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if row.day != i {
            return Err(data_err(path, format!("expected day {i}, found {}", row.day)));
        }
        series
            .push_day(row.open_sum, row.close_sum)
            .map_err(|e| data_err(path, e.to_string()))?;
        let expect = series.daily_return(i);
        if row.ret.to_bits() != expect.to_bits() {
            return Err(data_err(
                path,
                format!(
                    "day {i}: return column {} does not match open/close sums (expected {expect})",
                    row.ret
                ),
            ));
        }
    }
    if series.is_empty() {
        return Err(data_err(path, "no days in file"));
    }
    Ok(series)
}

#[derive(Debug, Serialize, Deserialize)]
struct RvRow {
    day: usize,
    delta_t: usize,
    n_eff: usize,
    rv: f64,
    /// Empty cell on excluded (zero-volatility) days.
    sr: Option<f64>,
    valid_flag: u8,
}

/// Serialize the realized-volatility table (columns: day, delta_t, n_eff,
/// rv, sr, valid_flag), day-major.
pub fn rv_table_csv(table: &RvTable) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for day in 0..table.n_days() {
        for (dt_idx, &delta_t) in table.delta_ts().iter().enumerate() {
            let sr = table.sr(day, dt_idx);
            w.serialize(RvRow {
                day,
                delta_t,
                n_eff: table.n_eff(dt_idx),
                rv: table.rv(day, dt_idx),
                sr,
                valid_flag: sr.is_some() as u8,
            })
            .expect("csv write to memory cannot fail");
        }
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

/// Read a realized-volatility table back. The standardized returns are
/// recomputed from the (exact) returns series and the rv column; the
/// stored sr/valid columns are cross-checked for consistency.
pub fn read_rv_table(path: &Path, returns: ReturnSeries) -> Result<RvTable> {
    let n_sites = returns.n_sites();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<RvRow> = Vec::new();
    for row in reader.deserialize::<RvRow>() {
        rows.push(row.map_err(|e| csv_err(path, e))?);
    }
    if rows.is_empty() {
        return Err(data_err(path, "no rows in file"));
    }

    // The day-0 rows define the grid; all later days must repeat it.
    let width = rows.iter().take_while(|r| r.day == 0).count();
    let delta_ts: Vec<usize> = rows[..width].iter().map(|r| r.delta_t).collect();
    for pair in delta_ts.windows(2) {
        if pair[0] >= pair[1] {
            return Err(data_err(
                path,
                "delta_t must be strictly increasing within a day",
            ));
        }
    }
    if rows.len() % width != 0 {
        return Err(data_err(
            path,
            format!(
                "row count {} is not a multiple of the {width}-entry grid",
                rows.len()
            ),
        ));
    }
    let n_days = rows.len() / width;
    if n_days != returns.len() {
        return Err(data_err(
            path,
            format!(
                "table has {n_days} days but the returns series has {}",
                returns.len()
            ),
        ));
    }

    let mut rv = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (day, col) = (i / width, i % width);
        if row.day != day {
            return Err(data_err(
                path,
                format!("row {i}: expected day {day}, found {}", row.day),
            ));
        }
        if row.delta_t != delta_ts[col] {
            return Err(data_err(
                path,
                format!(
                    "day {day}: expected delta_t {}, found {}",
                    delta_ts[col], row.delta_t
                ),
            ));
        }
        if row.n_eff != n_intervals(n_sites, row.delta_t) {
            return Err(data_err(
                path,
                format!(
                    "day {day}, delta_t {}: n_eff {} does not match {n_sites} sites",
                    row.delta_t, row.n_eff
                ),
            ));
        }
        rv.push(row.rv);
    }
    let table = RvTable::from_parts(n_sites, delta_ts, returns, rv)
        .map_err(|e| data_err(path, e.to_string()))?;

    // Cross-check the stored sr/valid columns against the recomputation.
    for (i, row) in rows.iter().enumerate() {
        let (day, col) = (i / width, i % width);
        let expect = table.sr(day, col);
        let ok = match (row.sr, expect) {
            (Some(a), Some(b)) => row.valid_flag == 1 && a.to_bits() == b.to_bits(),
            (None, None) => row.valid_flag == 0,
            _ => false,
        };
        if !ok {
            return Err(data_err(
                path,
                format!(
                    "day {day}, delta_t {}: sr/valid columns disagree with rv and returns",
                    row.delta_t
                ),
            ));
        }
    }
    Ok(table)
}

#[derive(Debug, Serialize, Deserialize)]
struct MomentRow {
    delta_t: usize,
    n_eff: usize,
    k: u32,
    moment: f64,
    stderr: f64,
}

/// Serialize moment estimates (columns: delta_t, n_eff, k, moment, stderr).
pub fn moments_csv(estimates: &[crate::moments::MomentEstimate]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in estimates {
        w.serialize(MomentRow {
            delta_t: e.delta_t,
            n_eff: e.n_eff,
            k: e.k,
            moment: e.value,
            stderr: e.stderr,
        })
        .expect("csv write to memory cannot fail");
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TheoryMomentRow {
    pub n: u64,
    pub k: u32,
    pub moment: f64,
    pub gaussian_limit: f64,
}

pub fn theory_moments_csv(rows: &[TheoryMomentRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv write to memory cannot fail");
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: u64,
    pub x: f64,
    pub density: f64,
}

pub fn density_csv(rows: &[DensityRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv write to memory cannot fail");
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleMomentRow {
    pub n: u64,
    pub k: u32,
    pub moment: f64,
    pub stderr: f64,
    pub theory: f64,
    pub deviation_sigma: f64,
}

pub fn oracle_moments_csv(rows: &[OracleMomentRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv write to memory cannot fail");
    }
    w.into_inner().expect("csv write to memory cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::price::DayRecord;
    use crate::rv::rv_grid;
    use tempfile::TempDir;

    fn sample_table() -> RvTable {
        let days = vec![
            DayRecord {
                day_index: 0,
                open_sum: 4,
                ticks: vec![2, 2, 0, -2],
            },
            DayRecord {
                day_index: 1,
                open_sum: -2,
                ticks: vec![-2, -2, -2, -2], // frozen day: zero rv
            },
            DayRecord {
                day_index: 2,
                open_sum: -2,
                ticks: vec![0, 2, 2, 4],
            },
        ];
        rv_grid(&days, &[1, 2, 4]).unwrap()
    }

    #[test]
    fn atomic_write_replaces_content_and_leaves_no_temp() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("x.csv");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn sha256_matches_known_vector() {
        // SHA-256 of the empty string and of "abc" are standard test vectors.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("abc.bin");
        atomic_write(&path, b"abc").unwrap();
        assert_eq!(sha256_hex_of_file(&path).unwrap(), sha256_hex(b"abc"));
    }

    #[test]
    fn daily_returns_round_trip() {
        let table = sample_table();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("daily_returns.csv");
        atomic_write(&path, &daily_returns_csv(table.returns())).unwrap();
        let back = read_daily_returns(&path, 4).unwrap();
        assert_eq!(&back, table.returns());
    }

    #[test]
    fn daily_returns_reader_rejects_tampering() {
        let table = sample_table();
        let text = String::from_utf8(daily_returns_csv(table.returns())).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("daily_returns.csv");

        // Flip a return value.
        let bad = text.replacen("-0.75", "-0.5", 1);
        assert_ne!(bad, text);
        atomic_write(&path, bad.as_bytes()).unwrap();
        assert!(matches!(
            read_daily_returns(&path, 4),
            Err(Error::DataFormat { .. })
        ));

        // Break the day numbering.
        let bad = text.replacen("2,-2,4", "5,-2,4", 1);
        assert_ne!(bad, text);
        atomic_write(&path, bad.as_bytes()).unwrap();
        assert!(matches!(
            read_daily_returns(&path, 4),
            Err(Error::DataFormat { .. })
        ));
    }

    #[test]
    fn rv_table_round_trip_preserves_everything() {
        let table = sample_table();
        let dir = TempDir::new().unwrap();
        let rv_path = dir.path().join("rv_table.csv");
        atomic_write(&rv_path, &rv_table_csv(&table)).unwrap();
        let back = read_rv_table(&rv_path, table.returns().clone()).unwrap();
        assert_eq!(back.n_days(), table.n_days());
        assert_eq!(back.delta_ts(), table.delta_ts());
        for day in 0..table.n_days() {
            for dt_idx in 0..table.delta_ts().len() {
                assert_eq!(
                    back.rv(day, dt_idx).to_bits(),
                    table.rv(day, dt_idx).to_bits()
                );
                assert_eq!(
                    back.sr(day, dt_idx).map(f64::to_bits),
                    table.sr(day, dt_idx).map(f64::to_bits)
                );
            }
        }
    }

    #[test]
    fn rv_table_reader_rejects_inconsistencies() {
        let table = sample_table();
        let text = String::from_utf8(rv_table_csv(&table)).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("rv_table.csv");

        // n_eff inconsistent with the site count.
        let bad = text.replacen("0,2,2,", "0,2,3,", 1);
        assert_ne!(bad, text);
        atomic_write(&path, bad.as_bytes()).unwrap();
        assert!(matches!(
            read_rv_table(&path, table.returns().clone()),
            Err(Error::DataFormat { .. })
        ));

        // Drop the last line: ragged day.
        let trimmed = text.trim_end().rsplit_once('\n').unwrap().0.to_string() + "\n";
        atomic_write(&path, trimmed.as_bytes()).unwrap();
        assert!(matches!(
            read_rv_table(&path, table.returns().clone()),
            Err(Error::DataFormat { .. })
        ));
    }

    #[test]
    fn zero_rv_days_serialize_with_empty_sr() {
        let table = sample_table();
        let text = String::from_utf8(rv_table_csv(&table)).unwrap();
        // Day 1 is frozen: rv = 0, empty sr cell, valid_flag 0.
        assert!(text.contains("1,1,4,0.0,,0"), "csv was:\n{text}");
        let moments = moments_csv(&[crate::moments::MomentEstimate {
            delta_t: 1,
            n_eff: 4,
            k: 2,
            value: 2.5,
            stderr: 0.25,
            n_days: 2,
        }]);
        let text = String::from_utf8(moments).unwrap();
        assert_eq!(text, "delta_t,n_eff,k,moment,stderr\n1,4,2,2.5,0.25\n");
    }
}
