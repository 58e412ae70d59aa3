use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::config::check_summary_version;
use super::{Outcome, ReplicaRow, Summary};
use crate::error::{Error, Result};

pub const REPLICAS_FILE: &str = "replicas.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportPaths {
    pub replicas: PathBuf,
    pub summary: PathBuf,
}

/// Writes `replicas.csv` (columns `n, replica, seed, norm_value, wall_ms`) and
/// `summary.json` into `dir`. A missing `dir` is created when the config
/// allows it and reported as an I/O error otherwise.
pub fn write_report(outcome: &Outcome, dir: &Path) -> Result<ReportPaths> {
    if !dir.is_dir() {
        if outcome.summary.config.create_output_dir {
            fs::create_dir_all(dir)?;
        } else {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output directory {} does not exist", dir.display()),
            )));
        }
    }
    let paths = ReportPaths { replicas: dir.join(REPLICAS_FILE), summary: dir.join(SUMMARY_FILE) };
    let mut w = csv::Writer::from_path(&paths.replicas).map_err(csv_error)?;
    for row in &outcome.rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    fs::write(&paths.summary, serde_json::to_string_pretty(&outcome.summary)?)?;
    Ok(paths)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    check_summary_version(&v)?;
    Ok(serde_json::from_value(v)?)
}

pub fn read_replicas(path: &Path) -> Result<Vec<ReplicaRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}
