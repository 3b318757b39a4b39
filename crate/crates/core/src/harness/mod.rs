//! Experiment orchestration: configs with paper-default hyperparameters,
//! repeated runs, grid search, synthetic graphs and figure data.

mod config;
mod experiment;
mod figures;
mod grid;
mod synth;

pub use config::{
    preset, DatasetSource, ExperimentConfig, Family, Protocol, SplitConfig, CORA_DIR_ENV, DEFAULT_PATIENCE,
};
pub use experiment::{mean_std, run_experiment, run_on, train_seed, ClientBytes, RunReport, SeedOutcome, TrainedRun};
pub use figures::{client_volumes_mb, emit_figures_data, figure_csv, figure_stem, FigureChannel};
pub use grid::{grid_order, grid_search, select_best, GridPoint, GridResult, GridSpace};
pub use synth::{cora_like, synth_graph, CoraLikeSpec, SynthSpec};
