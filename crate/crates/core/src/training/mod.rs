//! Single training runs, grid search, seed sweeps and convergence.

mod grid;
mod run;

pub use grid::{
    convergence_count, grid_search, seed_sweep, select_best, sweep_configs, GridSpace, RunOutcome,
    DEFAULT_GRID_SEEDS,
};
pub use run::{
    evaluate, is_converged, prepare_set, preset_hyperparameters, train_run, train_run_observed,
    BatchEvent, Evaluation, PreparedSet, RunConfig, RunData, RunResult, TrainedRun,
    CONVERGENCE_THRESHOLD,
};
