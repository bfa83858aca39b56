//! Experiment runner: configuration, twin runs, convergence sweeps, and output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, InitialSpec, ObserverSpec, Overrides, Preset, TruthInit, TruthSpec};
pub use output::{emit_convergence_csv, emit_csv, emit_report, read_convergence_csv, read_csv, RecordWriter};
pub use run::{condition_report, run_convergence, run_twin, run_twin_with, ConvergenceRow, RunOutput, RunSummary};
