//! Operational surface: configuration files, ledger persistence, and the
//! commands behind the `mfstune` binary.

pub mod commands;
pub mod config;
pub mod persist;

pub use commands::{
    run_compare, run_forward, run_oracle_check, run_report, run_tune, run_tune_resume,
    CompareTable, ForwardReport, OracleCheckReport, TuneSummary,
};
pub use config::{ExperimentConfig, Preset, RegionChoice};
pub use persist::{read_run_file, LedgerRecord, LedgerWriter, RunHeader};
