//! Benchmark harness: dataset ingestion, synthetic recipes, ε-sweeps and
//! plot-ready reports.

mod dataset;
mod report;
mod sweep;

pub use dataset::{
    load_csv, split_features, synth_dataset, write_csv, DataSource, Dataset, NonNumeric, Recipe,
};
pub use report::{
    emit_report, read_records, read_summary, write_records, ReportSummary, RECORDS_FILE,
    RECORD_COLUMNS, SUMMARY_FILE,
};
pub use sweep::{
    run_sweep, Allocation, DatasetInfo, SweepAggregate, SweepConfig, SweepRecord, SweepResult,
};
