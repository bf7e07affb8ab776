use std::time::Instant;

use crate::dcf::{run_schedule, SlotMeasurement};
use crate::error::Result;
use crate::harness::config::{Estimator, ExperimentConfig, MetricsConfig};
use crate::kf::{kf_step, KfState};
use crate::nn::{nn_step, NnState, Workspace};

/// One row of experiment output. Columns of disabled estimators are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub n_true: u32,
    pub p_hat: f64,
    pub n_hat_raw: Option<f64>,
    pub n_kf: Option<f64>,
    pub n_nn: Option<f64>,
    pub g_kf: Option<f64>,
    pub g_nn: Option<f64>,
    /// Network loss fed to its detector.
    pub loss: Option<f64>,
    pub lr: Option<f64>,
    pub alpha: Option<f64>,
    pub kf_step_us: Option<f64>,
    pub nn_step_us: Option<f64>,
}

impl TraceRecord {
    pub fn estimate(&self, e: Estimator) -> Option<f64> {
        match e {
            Estimator::Kf => self.n_kf,
            Estimator::Nn => self.n_nn,
            Estimator::Raw => self.n_hat_raw,
        }
    }

    fn step_us(&self, e: Estimator) -> Option<f64> {
        match e {
            Estimator::Kf => self.kf_step_us,
            Estimator::Nn => self.nn_step_us,
            Estimator::Raw => None,
        }
    }
}

/// Accuracy and timing of one estimator on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMetrics {
    pub estimator: Estimator,
    /// RMSE over the second half of the segment.
    pub rmse_tail: f64,
    /// Slots from segment start until the estimate enters the band and stays
    /// there for the hold period; `None` if it never does within the segment.
    pub convergence_slots: Option<usize>,
    /// Slots from segment start to the first detector trigger.
    pub detection_delay: Option<usize>,
    /// Detector triggers inside the quiet tail of the segment.
    pub late_triggers: usize,
    pub mean_step_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMetrics {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    pub n_true: u32,
    pub estimators: Vec<EstimatorMetrics>,
}

impl SegmentMetrics {
    pub fn get(&self, e: Estimator) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|m| m.estimator == e)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub trace: Vec<TraceRecord>,
    /// Detector trigger flags per slot, for the estimators that have one.
    pub kf_triggers: Vec<bool>,
    pub nn_triggers: Vec<bool>,
    pub metrics: Vec<SegmentMetrics>,
}

/// Simulates the configured schedule once and runs every enabled estimator
/// on the same measurement stream.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let model = cfg.model();
    let schedule = cfg.schedule();
    let stream = run_schedule(&schedule, &model, cfg.run_options())?;
    let mut exp = run_on_stream(cfg, &stream)?;
    exp.metrics = segment_metrics(&exp, &schedule.boundaries(), &cfg.estimators, &cfg.metrics);
    Ok(exp)
}

/// Runs the enabled estimators over an existing measurement stream.
pub fn run_on_stream(cfg: &ExperimentConfig, stream: &[SlotMeasurement]) -> Result<Experiment> {
    let model = cfg.model();
    let kf_cfg = cfg.kf_config();
    let (use_kf, use_nn, use_raw) = (
        cfg.enabled(Estimator::Kf),
        cfg.enabled(Estimator::Nn),
        cfg.enabled(Estimator::Raw),
    );

    let mut kf = stream
        .first()
        .map(|s| KfState::from_first_measurement(s.m.p_hat, &kf_cfg, &model));
    let mut nn = if use_nn {
        Some(NnState::init(&cfg.nn)?)
    } else {
        None
    };
    let mut ws = Workspace::default();

    let mut trace = Vec::with_capacity(stream.len());
    let mut kf_triggers = Vec::new();
    let mut nn_triggers = Vec::new();
    for s in stream {
        let mut rec = TraceRecord {
            t: s.t,
            n_true: s.n_true,
            p_hat: s.m.p_hat,
            n_hat_raw: use_raw.then_some(s.m.n_hat),
            n_kf: None,
            n_nn: None,
            g_kf: None,
            g_nn: None,
            loss: None,
            lr: None,
            alpha: None,
            kf_step_us: None,
            nn_step_us: None,
        };
        if use_kf {
            let state = kf.as_mut().expect("stream is non-empty");
            let start = Instant::now();
            let next = kf_step(state, s.m.p_hat, &kf_cfg, &model);
            let elapsed = start.elapsed();
            *state = next.map_err(|e| e.at_slot(s.t))?;
            rec.n_kf = Some(state.n_est);
            rec.g_kf = Some(state.cusum.g);
            rec.kf_step_us = Some(elapsed.as_secs_f64() * 1e6);
            kf_triggers.push(state.cusum.triggered);
        }
        if let Some(state) = nn.as_mut() {
            let start = Instant::now();
            let r = nn_step(state, s.m.n_hat, &cfg.nn, &mut ws);
            let elapsed = start.elapsed();
            let r = r.map_err(|e| e.at_slot(s.t))?;
            rec.n_nn = Some(r.estimate());
            rec.g_nn = Some(r.g);
            rec.loss = Some(r.detect_loss);
            rec.lr = Some(r.lr);
            rec.alpha = Some(r.alpha);
            rec.nn_step_us = Some(elapsed.as_secs_f64() * 1e6);
            nn_triggers.push(r.triggered);
        }
        trace.push(rec);
    }
    Ok(Experiment {
        trace,
        kf_triggers,
        nn_triggers,
        metrics: Vec::new(),
    })
}

/// Root-mean-square error of `est` against `truth`.
pub fn rmse(est: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(est.len(), truth.len());
    if est.is_empty() {
        return 0.0;
    }
    let sq: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    (sq / est.len() as f64).sqrt()
}

/// First index from which `errors` stays within `band` for `hold` consecutive entries.
pub fn convergence_index(errors: &[f64], band: f64, hold: usize) -> Option<usize> {
    let mut run = 0;
    for (i, e) in errors.iter().enumerate() {
        if e.abs() <= band {
            run += 1;
            if run == hold {
                return Some(i + 1 - hold);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn segment_metrics(
    exp: &Experiment,
    starts: &[usize],
    estimators: &[Estimator],
    mc: &MetricsConfig,
) -> Vec<SegmentMetrics> {
    let total = exp.trace.len();
    starts
        .iter()
        .enumerate()
        .map(|(index, &start)| {
            let end = starts.get(index + 1).copied().unwrap_or(total);
            let rows = &exp.trace[start..end];
            let n_true = rows[0].n_true;
            let tail = &rows[rows.len() / 2..];
            let metrics = estimators
                .iter()
                .filter_map(|&e| {
                    rows[0].estimate(e)?;
                    let est: Vec<f64> = tail.iter().map(|r| r.estimate(e).unwrap()).collect();
                    let truth: Vec<f64> = tail.iter().map(|r| r.n_true as f64).collect();
                    let errors: Vec<f64> = rows
                        .iter()
                        .map(|r| r.estimate(e).unwrap() - r.n_true as f64)
                        .collect();
                    let triggers = match e {
                        Estimator::Kf => Some(&exp.kf_triggers[start..end]),
                        Estimator::Nn => Some(&exp.nn_triggers[start..end]),
                        Estimator::Raw => None,
                    };
                    let steps: Vec<f64> = rows.iter().filter_map(|r| r.step_us(e)).collect();
                    Some(EstimatorMetrics {
                        estimator: e,
                        rmse_tail: rmse(&est, &truth),
                        convergence_slots: convergence_index(
                            &errors,
                            mc.converge_band,
                            mc.converge_hold,
                        ),
                        detection_delay: triggers.and_then(|t| t.iter().position(|&x| x)),
                        late_triggers: triggers
                            .map(|t| {
                                t[t.len().saturating_sub(mc.quiet_tail)..]
                                    .iter()
                                    .filter(|&&x| x)
                                    .count()
                            })
                            .unwrap_or(0),
                        mean_step_us: (!steps.is_empty())
                            .then(|| steps.iter().sum::<f64>() / steps.len() as f64),
                    })
                })
                .collect();
            SegmentMetrics {
                index,
                start,
                len: end - start,
                n_true,
                estimators: metrics,
            }
        })
        .collect()
}
