//! CSV result files.
//!
//! Every file has a header row, LF line endings and floats in `{:.16e}`
//! (17 significant digits, so values round-trip exactly). Missing values
//! are empty fields. Files are written to a temporary sibling and renamed
//! into place.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::diagnostics::EnergyReport;
use crate::error::{Error, Result};
use crate::field::HarmonicField;
use crate::model::Grid;
use crate::nonlinear::SolveReport;
use crate::studies::{ConvergenceRow, OracleRow, StudyResult, TauSweepRow, TaylorRow};

pub const SOLUTION_HEADER: [&str; 5] = ["m", "node_index", "x", "re", "im"];
pub const ENERGY_HEADER: [&str; 3] = ["term_name", "level", "value"];
pub const TAU_SWEEP_HEADER: [&str; 6] = ["tau", "d_lo", "d_me", "rate", "E_lo_ratio", "config_hash"];
pub const TAYLOR_HEADER: [&str; 6] = ["eps", "remainder", "slope", "first_order", "first_order_slope", "config_hash"];
pub const ORACLE_HEADER: [&str; 2] = ["metric", "value"];
pub const CONVERGENCE_HEADER: [&str; 7] = ["nx", "h", "err_l2", "err_h1", "order_l2", "order_h1", "config_hash"];
pub const ITERATIONS_HEADER: [&str; 3] = ["iteration", "update_norm", "contraction_ratio"];
pub const DIAGNOSTICS_HEADER: [&str; 2] = ["quantity", "value"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// One row per harmonic and node.
pub fn write_solution(path: &Path, u: &HarmonicField, grid: &Grid) -> Result<()> {
    let rows = u.iter().flat_map(|(m, c)| {
        c.iter()
            .enumerate()
            .map(move |(j, z)| vec![m.to_string(), j.to_string(), fmt_f64(grid.x(j)), fmt_f64(z.re), fmt_f64(z.im)])
    });
    write_csv(path, &SOLUTION_HEADER, rows)
}

/// Reads a file written by [`write_solution`].
pub fn read_solution(path: &Path) -> Result<HarmonicField> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header != SOLUTION_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected solution header {header:?}")));
    }
    let mut entries: Vec<(usize, usize, C64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let bad = |what: &str| Error::InvalidArgument(format!("bad {what} in solution row {rec:?}"));
        let m: usize = rec[0].parse().map_err(|_| bad("m"))?;
        let j: usize = rec[1].parse().map_err(|_| bad("node_index"))?;
        let re: f64 = rec[3].parse().map_err(|_| bad("re"))?;
        let im: f64 = rec[4].parse().map_err(|_| bad("im"))?;
        entries.push((m, j, C64::new(re, im)));
    }
    let harmonics = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let nx = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != (harmonics + 1) * nx {
        return Err(Error::InvalidArgument(format!(
            "solution has {} rows, expected {} for M = {harmonics}, Nx = {nx}",
            entries.len(),
            (harmonics + 1) * nx
        )));
    }
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); nx]; harmonics + 1];
    for (m, j, z) in entries {
        coeffs[m][j] = z;
    }
    HarmonicField::from_coeffs(coeffs)
}

pub fn write_energy(path: &Path, report: &EnergyReport) -> Result<()> {
    let rows = report
        .rows()
        .into_iter()
        .map(|(level, name, value)| vec![name.to_string(), level.to_string(), fmt_f64(value)]);
    write_csv(path, &ENERGY_HEADER, rows)
}

pub fn write_tau_sweep(path: &Path, study: &StudyResult<TauSweepRow>) -> Result<()> {
    let rows = study.rows.iter().map(|r| {
        vec![
            fmt_f64(r.tau),
            fmt_f64(r.d_lo),
            fmt_f64(r.d_me),
            fmt_opt(r.rate),
            fmt_opt(r.e_lo_ratio),
            r.config_hash.clone(),
        ]
    });
    write_csv(path, &TAU_SWEEP_HEADER, rows)
}

pub fn write_taylor(path: &Path, study: &StudyResult<TaylorRow>) -> Result<()> {
    let rows = study.rows.iter().map(|r| {
        vec![
            fmt_f64(r.eps),
            fmt_f64(r.remainder),
            fmt_opt(r.slope),
            fmt_f64(r.first_order),
            fmt_opt(r.first_order_slope),
            r.config_hash.clone(),
        ]
    });
    write_csv(path, &TAYLOR_HEADER, rows)
}

pub fn write_oracle(path: &Path, study: &StudyResult<OracleRow>) -> Result<()> {
    let rows = study.rows.iter().map(|r| vec![r.metric.clone(), fmt_f64(r.value)]);
    write_csv(path, &ORACLE_HEADER, rows)
}

pub fn write_convergence(path: &Path, study: &StudyResult<ConvergenceRow>) -> Result<()> {
    let rows = study.rows.iter().map(|r| {
        vec![
            r.nx.to_string(),
            fmt_f64(r.h),
            fmt_f64(r.err_l2),
            fmt_f64(r.err_h1),
            fmt_opt(r.order_l2),
            fmt_opt(r.order_h1),
            r.config_hash.clone(),
        ]
    });
    write_csv(path, &CONVERGENCE_HEADER, rows)
}

/// Fixed-point history; the first iteration has no contraction ratio.
pub fn write_iterations(path: &Path, report: &SolveReport) -> Result<()> {
    let rows = report.update_norms.iter().enumerate().map(|(k, u)| {
        let ratio = k.checked_sub(1).and_then(|i| report.contraction_ratios.get(i)).copied();
        vec![(k + 1).to_string(), fmt_f64(*u), fmt_opt(ratio)]
    });
    write_csv(path, &ITERATIONS_HEADER, rows)
}

pub fn write_diagnostics(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    write_csv(path, &DIAGNOSTICS_HEADER, rows.iter().map(|(k, v)| vec![k.clone(), fmt_f64(*v)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::studies::StudyKind;
    use std::collections::BTreeMap;

    #[test]
    fn empty_study_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tau_sweep.csv");
        let s: StudyResult<TauSweepRow> = StudyResult { kind: StudyKind::TauSweep, rows: vec![], metadata: BTreeMap::new() };
        write_tau_sweep(&p, &s).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "tau,d_lo,d_me,rate,E_lo_ratio,config_hash\n");
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        for v in [std::f64::consts::PI, -1e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
