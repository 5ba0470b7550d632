//! Application layer: configuration, run modes, output and checkpointing.

pub mod checkpoint;
pub mod config;
pub mod manufactured;
pub mod modes;
pub mod output;

pub use config::{ConfigError, RunConfig, RunMode};
pub use modes::{
    build_mesh, build_params, convergence_error, fitted_constant, fitted_slope,
    initial_temperature, run_convergence_test, run_simulation, run_solver_bench, BenchRun,
    ConvergenceRow, ModeError,
};
