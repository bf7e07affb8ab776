//! Shared fixtures for the criterion benchmarks.

use wifi_load::{run_schedule, LoadSchedule, Model, RunOptions, SlotMeasurement};

/// A stationary measurement stream with `n` users.
pub fn stationary_stream(n: u32, slots: u32, seed: u64) -> Vec<SlotMeasurement> {
    let schedule = LoadSchedule::new(vec![(n, slots)]).expect("valid schedule");
    let opts = RunOptions {
        seed,
        ..RunOptions::default()
    };
    run_schedule(&schedule, &Model::default(), opts).expect("simulation succeeds")
}
