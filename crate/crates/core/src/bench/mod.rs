//! Workloads and experiments.

mod experiment;
mod ingest;
mod oracle;
mod report;
mod workload;

pub use experiment::{
    execute, leakage_checkpoints, run_experiment, Checkpoint, EnvInfo, Execution, ExperimentConfig,
    Report, Scheme, TransportKind, REPORT_SCHEMA_VERSION,
};
pub use ingest::{ingest_csv, ingest_reader, write_synthetic_payroll, IngestOptions, Ingested};
pub use oracle::{brute_force, PlainIndex};
pub use report::{emit_report, emit_reports, parse_json_lines, ReportFormat, CSV_COLUMNS};
pub use workload::{
    add_searches, default_capacity, floor_root, gen_workload, Placement, WorkloadSpec,
    DEFAULT_MEAN_RANGE,
};
