//! Experiment orchestration on top of the simulator and the estimators.

pub mod bench;
pub mod config;
pub mod csv;
pub mod experiment;
pub mod plot;
pub mod sweep;

pub use self::bench::{bench_timing, StepTiming, TimingReport};
pub use self::config::{parse_estimators, Estimator, ExperimentConfig, MetricsConfig, Preset};
pub use self::csv::{emit_csv, emit_measurements, emit_metrics, load_csv};
pub use self::experiment::{
    run_experiment, run_on_stream, EstimatorMetrics, Experiment, SegmentMetrics, TraceRecord,
};
pub use self::plot::{emit_plot, render_svg, PlotKind};
pub use self::sweep::{emit_sweep_csv, run_sweep, SweepGrid, SweepRow};
