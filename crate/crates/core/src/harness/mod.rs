//! Training driver, experiment runners and file outputs.

pub mod checkpoint;
pub mod config;
pub mod experiments;
pub mod output;
pub mod pressure;
pub mod report;

pub use checkpoint::Checkpoint;
pub use config::{CaseConfig, ExperimentConfig, GridConfig, RecoveryConfig, OUT_ENV};
pub use experiments::{
    build_model, run_one, run_ra_sweep, run_table_experiment, train_model, write_ra_outputs, write_table_outputs,
    RaRow, RaRun, RunOutcome, TableRow, TableRun,
};
pub use pressure::{recover_pressure, PressureRecovery, RecoveredPressure};
pub use report::{error_report, eval_grid, ErrorReport, RunMetadata, EVAL_N};
