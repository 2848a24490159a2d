//! CSV rows written by the experiment drivers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::evaluation::KsReport;

/// One metric value from one run; rows are only ever appended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub h: f64,
    pub n_fraction: f64,
    pub iteration: u64,
    pub metric: String,
    pub value: f64,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: &str,
        method: &str,
        seed: u64,
        h: f64,
        n_fraction: f64,
        iteration: u64,
        metric: &str,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            method: method.to_string(),
            seed,
            h,
            n_fraction,
            iteration,
            metric: metric.to_string(),
            value,
        }
    }
}

/// The KS summary of one (method, seed, fraction) cell at its selected stepsize.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsRow {
    pub seed: u64,
    pub method: String,
    pub minibatch_fraction: f64,
    pub d_ks: f64,
    pub per_dim_max: f64,
    pub flags: usize,
}

impl KsRow {
    pub fn from_report(seed: u64, method: &str, minibatch_fraction: f64, report: &KsReport) -> Self {
        Self {
            seed,
            method: method.to_string(),
            minibatch_fraction,
            d_ks: report.d_ks,
            per_dim_max: report.per_dim_max(),
            flags: report.flags,
        }
    }
}

/// Serializes rows with a header into any writer.
pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(File::create(path)?, rows)
}
