//! Seeded experiment runner, synthetic data, and report writers.

pub mod chart;
pub mod config;
pub mod report;
pub mod runner;
pub mod synthetic;

pub use chart::{emit_f2_chart, ChartGroup};
pub use config::{DataSource, ExperimentConfig, SmoteStage, ThresholdsMode, TrainingSettings};
pub use report::{aggregate_rows, read_results_csv, render_reports, CellAggregate};
pub use runner::{
    build_bundle, prepare_data, run_experiment, run_matrix, ExperimentSummary, FailureRow,
    MatrixOutcome, ModelKey, PreparedData, ResultRow, TrialMetrics,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};
