//! Config-driven experiments on the Four-Room layout: sequential transfer
//! runs, multiplier ablations, threshold sweeps, persistence and charts.

mod config;
mod plot;
mod run;

pub use config::{AblationParams, LearnerParams, Method, PdqlParams, RunConfig, SweepParams};
pub use plot::{
    bar_chart, curve_aggregates, line_chart, mean_std, plot_series, save_aggregates_csv, total_aggregates, AggregateRow, Metric,
    PlotOutputs, Series,
};
pub use run::{
    ablation_variant_name, compare_methods, lambda_ablation, load_metrics_csv, run_arm, run_sequence, run_tasks,
    sample_tasks, save_metrics_csv, summarize_seed, summarize_tasks, threshold_sweep, write_comparison_csv,
    write_metrics_csv, Arm, Comparison, ComparisonRow, Manifest, SeedArtifacts, SeedRun, SeedSummary, TaskSummary,
};
