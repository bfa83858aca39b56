//! CSV and JSON artifacts.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` exactly.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{ConvergenceRow, RunSummary};
use crate::conditions::ConditionReport;
use crate::control::StepRecord;
use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 9] = [
    "step",
    "t",
    "chi",
    "err_l2",
    "rel_err",
    "proj_err",
    "rel_proj_err",
    "grad_v_sq",
    "repeats",
];

pub const CONVERGENCE_HEADER: [&str; 4] = ["dt", "final_err", "rate", "chi_max"];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Incremental writer for step records.
pub struct RecordWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl RecordWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        create_parent(&path)?;
        let mut inner = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        inner.write_record(RECORD_HEADER).map_err(csv_err(&path))?;
        Ok(Self { path, inner })
    }

    pub fn write(&mut self, r: &StepRecord<f64>) -> Result<()> {
        let row = [
            r.step.to_string(),
            fmt(r.t),
            fmt(r.chi),
            fmt(r.err_l2),
            fmt(r.rel_err),
            fmt(r.proj_err),
            fmt(r.rel_proj_err),
            fmt(r.grad_v_sq),
            r.repeats.to_string(),
        ];
        self.inner.write_record(&row).map_err(csv_err(&self.path))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn emit_csv(records: &[StepRecord<f64>], path: impl AsRef<Path>) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

fn open_checked(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = reader.headers().map_err(csv_err(path))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Config(format!(
            "{}: unexpected header '{}'",
            path.display(),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(reader)
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = row.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Config(format!(
            "{}: bad value '{raw}' in column {}",
            path.display(),
            i + 1
        ))
    })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<StepRecord<f64>>> {
    let path = path.as_ref();
    let mut reader = open_checked(path, &RECORD_HEADER)?;
    let mut out = vec![];
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        out.push(StepRecord {
            step: field(path, &row, 0)?,
            t: field(path, &row, 1)?,
            chi: field(path, &row, 2)?,
            err_l2: field(path, &row, 3)?,
            rel_err: field(path, &row, 4)?,
            proj_err: field(path, &row, 5)?,
            rel_proj_err: field(path, &row, 6)?,
            grad_v_sq: field(path, &row, 7)?,
            repeats: field(path, &row, 8)?,
        });
    }
    Ok(out)
}

pub fn emit_convergence_csv(rows: &[ConvergenceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(CONVERGENCE_HEADER).map_err(csv_err(path))?;
    for r in rows {
        let rate = r.rate.map(fmt).unwrap_or_default();
        w.write_record([fmt(r.dt), fmt(r.final_err), rate, fmt(r.chi_max)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_convergence_csv(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRow>> {
    let path = path.as_ref();
    let mut reader = open_checked(path, &CONVERGENCE_HEADER)?;
    let mut out = vec![];
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let rate = match row.get(2) {
            Some("") | None => None,
            Some(_) => Some(field(path, &row, 2)?),
        };
        out.push(ConvergenceRow {
            dt: field(path, &row, 0)?,
            final_err: field(path, &row, 1)?,
            rate,
            chi_max: field(path, &row, 3)?,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a ExperimentConfig,
    conditions: &'a ConditionReport,
    summary: &'a RunSummary,
}

pub fn emit_report(
    cfg: &ExperimentConfig,
    conditions: &ConditionReport,
    summary: &RunSummary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    create_parent(path)?;
    let report = Report {
        config: cfg,
        conditions,
        summary,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(format!("report: {e}")))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "{text}").map_err(|e| Error::io(path, e))
}
