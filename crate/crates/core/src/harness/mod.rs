//! Configuration, initial data, experiment runs and the verification suite.

pub mod config;
pub mod experiment;
pub mod initial;
pub mod verify;

pub use config::{ExperimentConfig, GridConfig, InitConfig, InitKind, OutputConfig, Polarization, RunMode};
pub use experiment::{read_csv_series, records_to_csv, run_experiment, run_experiment_from, RunChecks, RunReport, CSV_COLUMNS};
pub use initial::{generate_initial_data, InitialData};
pub use verify::{verify_suite, CriterionResult, Fault, VerifyLevel, VerifyReport};
