use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::sweep::{DatasetInfo, SweepAggregate, SweepConfig, SweepRecord, SweepResult};

pub const RECORDS_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const RECORD_COLUMNS: [&str; 8] = [
    "epsilon",
    "trial",
    "dcorr_private_raw",
    "dcorr_private_clamped",
    "dcorr_nonprivate",
    "l1_error",
    "total_epsilon",
    "total_delta",
];

/// Everything needed to replay a sweep, plus its per-ε aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub config: SweepConfig,
    pub dataset: DatasetInfo,
    pub dcorr_nonprivate: f64,
    pub aggregates: Vec<SweepAggregate>,
    pub aborted: Option<String>,
}

impl From<&SweepResult> for ReportSummary {
    fn from(r: &SweepResult) -> Self {
        Self {
            config: r.config.clone(),
            dataset: r.dataset.clone(),
            dcorr_nonprivate: r.dcorr_nonprivate,
            aggregates: r.aggregates.clone(),
            aborted: r.aborted.clone(),
        }
    }
}

pub fn write_records(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.epsilon.to_string(),
            r.trial.to_string(),
            r.dcorr_private_raw.to_string(),
            r.dcorr_private_clamped.to_string(),
            r.dcorr_nonprivate.to_string(),
            r.l1_error.to_string(),
            r.total_epsilon.to_string(),
            r.total_delta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<ReportSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes the per-trial CSV and the JSON summary into `dir`.
pub fn emit_report(result: &SweepResult, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let records = dir.join(RECORDS_FILE);
    let summary = dir.join(SUMMARY_FILE);
    write_records(&result.records, &records)?;
    let mut json = serde_json::to_string_pretty(&ReportSummary::from(result))?;
    json.push('\n');
    fs::write(&summary, json)?;
    Ok((records, summary))
}
