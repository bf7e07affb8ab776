//! Wall-clock comparison of the two filter updates.

use std::time::Instant;

use serde::Serialize;

use crate::dcf::{run_schedule, LoadSchedule};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::kf::{kf_step, KfState};
use crate::nn::{nn_step, NnState, Workspace};

pub const MIN_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTiming {
    pub mean_us: f64,
    pub median_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

impl StepTiming {
    fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        let len = samples.len();
        let median_us = if len % 2 == 1 {
            samples[len / 2]
        } else {
            0.5 * (samples[len / 2 - 1] + samples[len / 2])
        };
        Self {
            mean_us: samples.iter().sum::<f64>() / len as f64,
            median_us,
            min_us: samples[0],
            max_us: samples[len - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub users: u32,
    pub iters: usize,
    pub kf: StepTiming,
    pub nn: StepTiming,
    /// Mean modeled airtime of one observation window.
    pub observation_us: f64,
}

impl TimingReport {
    /// Observation plus update time per decision slot.
    pub fn slot_us(&self) -> (f64, f64) {
        (
            self.observation_us + self.kf.mean_us,
            self.observation_us + self.nn.mean_us,
        )
    }

    pub fn kf_over_nn(&self) -> f64 {
        self.kf.mean_us / self.nn.mean_us
    }
}

/// Times `iters` consecutive updates of each filter on one stationary
/// stream with `cfg.bench_users` stations. Runs on the calling thread.
pub fn bench_timing(cfg: &ExperimentConfig, iters: usize) -> Result<TimingReport> {
    if iters < MIN_ITERS {
        return Err(Error::config(
            "iters",
            format!("need at least {MIN_ITERS}, got {iters}"),
        ));
    }
    cfg.validate()?;
    let model = cfg.model();
    let kf_cfg = cfg.kf_config();
    let schedule = LoadSchedule {
        segments: vec![(cfg.bench_users, iters as u32)],
    };
    let stream = run_schedule(&schedule, &model, cfg.run_options())?;

    let mut kf = KfState::from_first_measurement(stream[0].m.p_hat, &kf_cfg, &model);
    let mut nn = NnState::init(&cfg.nn)?;
    let mut ws = Workspace::default();
    let mut kf_us = Vec::with_capacity(iters);
    let mut nn_us = Vec::with_capacity(iters);
    // Interleaved so that both filters see the same background load.
    for s in &stream {
        let start = Instant::now();
        let next = kf_step(&kf, s.m.p_hat, &kf_cfg, &model);
        kf_us.push(start.elapsed().as_secs_f64() * 1e6);
        kf = next.map_err(|e| e.at_slot(s.t))?;

        let start = Instant::now();
        let r = nn_step(&mut nn, s.m.n_hat, &cfg.nn, &mut ws);
        nn_us.push(start.elapsed().as_secs_f64() * 1e6);
        r.map_err(|e| e.at_slot(s.t))?;
    }

    let observation_us = stream.iter().map(|s| s.m.elapsed_us).sum::<f64>() / stream.len() as f64;
    Ok(TimingReport {
        users: cfg.bench_users,
        iters,
        kf: StepTiming::from_samples(kf_us),
        nn: StepTiming::from_samples(nn_us),
        observation_us,
    })
}
