//! Estimating the number of active WiFi stations on a shared channel from
//! collision-probability measurements.
//!
//! - [`bianchi`]: saturated-DCF relations between transmission probability,
//!   collision probability and user count, and their numerical inverses.
//! - [`dcf`]: slot-level CSMA/CA simulator producing observation windows.
//! - [`cusum`]: the change detector shared by both estimators.
//! - [`kf`]: extended Kalman filter on the user count.
//! - [`nn`]: online, unsupervised MLP filter trained with Adam.
//! - [`harness`]: experiment configuration, metrics, CSV/SVG output, timing and sweeps.

pub mod bianchi;
pub mod cusum;
pub mod dcf;
mod error;
pub mod harness;
pub mod kf;
pub mod nn;

pub use bianchi::{Model, ModelPoint, ProtocolParams, Solver};
pub use cusum::Cusum;
pub use dcf::{
    run_schedule, Countdown, DcfSimulator, LoadSchedule, Measurement, MeasurementMode, RunOptions,
    SlotMeasurement, StationState, SubframeOutcome,
};
pub use error::{Error, Result};
pub use harness::{
    bench_timing, emit_csv, emit_plot, run_experiment, run_sweep, Estimator, ExperimentConfig,
    PlotKind, Preset, SegmentMetrics, SweepGrid, TraceRecord,
};
pub use kf::{kf_run, kf_step, KfConfig, KfState};
pub use nn::{nn_run, nn_step, NnConfig, NnState, Regime};
