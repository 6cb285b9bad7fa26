//! Experiment orchestration: configuration, presets, and the contraction,
//! cross-validation and original-time rate runs.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, GridSpec, Settings, SolverChoice};
pub use run::{
    initial_pair, load_density, ode_guard, run_contraction, run_crossval, run_original_time_rate, ContractionRun, CrossvalReport,
    GelRateReport, GuardReport,
};
