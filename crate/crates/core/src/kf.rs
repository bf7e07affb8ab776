//! Extended Kalman filter on the scalar user count.
//!
//! The state is `n`, the measurement the collision probability `p_hat`, and
//! the measurement function `h(n)` is the numerical inverse from
//! [`crate::bianchi`]. The process noise switches between a small value
//! while the CUSUM on the normalized innovation is quiet and a large value
//! on the step after it fires.

use serde::{Deserialize, Serialize};

use crate::bianchi::Model;
use crate::cusum::Cusum;
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KfConfig {
    /// Process noise after the detector fires.
    pub q_plus: f64,
    /// Process noise while stable.
    pub q_minus: f64,
    /// Initial error variance.
    pub v0: f64,
    /// Initial estimate. `None` takes it from the first measurement.
    pub n0: Option<f64>,
    /// Sub-frames per window, for the measurement variance.
    pub k_all: u32,
    /// CUSUM tolerance on the normalized squared innovation.
    pub cusum_q: f64,
    /// CUSUM threshold on the normalized squared innovation.
    pub cusum_e: f64,
}

impl Default for KfConfig {
    fn default() -> Self {
        Self {
            q_plus: 4.0,
            q_minus: 0.0,
            v0: 4.0,
            n0: None,
            k_all: 100,
            cusum_q: 1.2,
            cusum_e: 30.0,
        }
    }
}

impl KfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_minus >= 0.0 && self.q_plus >= self.q_minus && self.q_plus.is_finite()) {
            return Err(Error::config("kf", "need q_plus >= q_minus >= 0"));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(Error::config("kf.v0", "must be > 0"));
        }
        if let Some(n0) = self.n0 {
            if !(n0 >= 1.0 && n0.is_finite()) {
                return Err(Error::config("kf.n0", "must be >= 1"));
            }
        }
        if self.k_all == 0 {
            return Err(Error::config("kf.k_all", "must be >= 1"));
        }
        if !(self.cusum_q > 0.0 && self.cusum_e > 0.0) {
            return Err(Error::config("kf", "cusum_q and cusum_e must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KfState {
    pub n_est: f64,
    pub v: f64,
    pub cusum: Cusum,
    pub last_innovation: f64,
    pub last_gain: f64,
    /// Process noise used by the last step.
    pub last_q: f64,
}

impl KfState {
    pub fn new(n0: f64, cfg: &KfConfig) -> Self {
        Self {
            n_est: n0.max(1.0),
            v: cfg.v0,
            cusum: Cusum::new(cfg.cusum_q, cfg.cusum_e),
            last_innovation: 0.0,
            last_gain: 0.0,
            last_q: cfg.q_minus,
        }
    }

    /// Starts from `cfg.n0`, or from the user count implied by the first measurement.
    pub fn from_first_measurement(p_hat: f64, cfg: &KfConfig, model: &Model) -> Self {
        Self::new(
            cfg.n0.unwrap_or_else(|| model.users_of_p_lenient(p_hat)),
            cfg,
        )
    }
}

/// One filter update with measurement `p_hat`.
pub fn kf_step(state: &KfState, p_hat: f64, cfg: &KfConfig, model: &Model) -> Result<KfState> {
    let p_hat = model.clamp_p(p_hat);
    let n = state.n_est;
    let h = model.collision_of_users(n)?;
    let hp = ensure_finite("h'(n)", model.collision_slope(n)?)?;

    let z = p_hat - h;
    // Clamped so R stays positive at n = 1 where h = 0.
    let hc = model.clamp_p(h);
    let r = (1.0 - hc) * hc / cfg.k_all as f64;
    let q = if state.cusum.triggered {
        cfg.q_plus
    } else {
        cfg.q_minus
    };
    let prior = state.v + q;
    let innovation_var = hp * hp * prior + r;
    let gain = ensure_finite("Kalman gain", hp * prior / innovation_var)?;

    let n_est = ensure_finite("estimate", n + gain * z)?.max(1.0);
    let v = ensure_finite("error variance", (1.0 - gain * hp) * prior)?;
    let stat = ensure_finite("innovation statistic", z * z / innovation_var)?;

    Ok(KfState {
        n_est,
        v,
        cusum: state.cusum.updated(stat),
        last_innovation: z,
        last_gain: gain,
        last_q: q,
    })
}

/// Per-slot output of [`kf_run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfTracePoint {
    pub n_est: f64,
    pub v: f64,
    pub innovation: f64,
    pub gain: f64,
    pub g: f64,
    /// Whether the step used the large process noise.
    pub changed: bool,
}

/// Folds [`kf_step`] over a stream of measured collision probabilities.
pub fn kf_run(p_hats: &[f64], cfg: &KfConfig, model: &Model) -> Result<Vec<KfTracePoint>> {
    cfg.validate()?;
    let Some(&first) = p_hats.first() else {
        return Err(Error::config("measurements", "stream is empty"));
    };
    let mut state = KfState::from_first_measurement(first, cfg, model);
    let mut out = Vec::with_capacity(p_hats.len());
    for (t, &p) in p_hats.iter().enumerate() {
        state = kf_step(&state, p, cfg, model).map_err(|e| e.at_slot(t))?;
        out.push(KfTracePoint {
            n_est: state.n_est,
            v: state.v,
            innovation: state.last_innovation,
            gain: state.last_gain,
            g: state.cusum.g,
            changed: state.last_q == cfg.q_plus && cfg.q_plus != cfg.q_minus,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        Model::default()
    }

    #[test]
    fn zero_innovation_keeps_estimate() {
        let m = model();
        let cfg = KfConfig::default();
        let s = KfState::new(10.0, &cfg);
        let p = m.collision_of_users(10.0).unwrap();
        let next = kf_step(&s, p, &cfg, &m).unwrap();
        assert_eq!(next.last_innovation, 0.0);
        assert_eq!(next.n_est, 10.0);
        assert!(next.v > 0.0 && next.v < s.v);
    }

    #[test]
    fn single_step_by_hand() {
        let m = model();
        let cfg = KfConfig {
            v0: 1.0,
            ..KfConfig::default()
        };
        let s = KfState::new(10.0, &cfg);
        let h = m.collision_of_users(10.0).unwrap();
        // Independent central difference with its own step.
        let hp = (m.collision_of_users(10.0 + 1e-4).unwrap()
            - m.collision_of_users(10.0 - 1e-4).unwrap())
            / 2e-4;
        let r = h * (1.0 - h) / 100.0;
        let k = hp / (hp * hp + r);
        let next = kf_step(&s, h + 0.05, &cfg, &m).unwrap();
        assert!(next.n_est > 10.0);
        assert!((next.last_gain - k).abs() / k < 1e-5);
        assert!(((next.n_est - 10.0) - k * 0.05).abs() < 1e-5);
        assert!(((next.v) - (1.0 - k * hp)).abs() < 1e-6);
    }

    #[test]
    fn gain_within_bounds() {
        let m = model();
        let cfg = KfConfig::default();
        let mut s = KfState::new(3.0, &cfg);
        for (i, p) in [0.1, 0.3, 0.5, 0.2, 0.6, 0.05]
            .iter()
            .cycle()
            .take(300)
            .enumerate()
        {
            let hp = m.collision_slope(s.n_est).unwrap();
            s = kf_step(&s, *p, &cfg, &m).unwrap();
            assert!(s.last_gain > 0.0 && s.last_gain < 1.0 / hp, "step {i}");
            assert!(s.v > 0.0);
            assert!(s.n_est >= 1.0);
        }
    }

    #[test]
    fn run_on_exact_measurements_converges_monotonically() {
        let m = model();
        let cfg = KfConfig {
            n0: Some(4.0),
            q_minus: 0.01,
            ..KfConfig::default()
        };
        let p = m.collision_of_users(12.0).unwrap();
        let trace = kf_run(&vec![p; 400], &cfg, &m).unwrap();
        for w in trace.windows(2) {
            assert!(w[1].n_est >= w[0].n_est - 1e-9);
            assert!(w[1].n_est <= 12.0 + 1e-6);
        }
        assert!((trace.last().unwrap().n_est - 12.0).abs() < 0.05);
        assert_eq!(trace, kf_run(&vec![p; 400], &cfg, &m).unwrap());
    }

    #[test]
    fn run_rejects_empty_stream() {
        assert!(kf_run(&[], &KfConfig::default(), &model()).is_err());
    }

    #[test]
    fn q_plus_used_after_trigger() {
        let m = model();
        let cfg = KfConfig::default();
        let mut s = KfState::new(5.0, &cfg);
        s.cusum.g = 100.0;
        s.cusum.triggered = true;
        let next = kf_step(&s, m.collision_of_users(5.0).unwrap(), &cfg, &m).unwrap();
        assert_eq!(next.last_q, cfg.q_plus);
    }

    #[test]
    fn config_validation() {
        let bad = KfConfig {
            q_plus: 0.0,
            q_minus: 1.0,
            ..KfConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(KfConfig {
            v0: 0.0,
            ..KfConfig::default()
        }
        .validate()
        .is_err());
        assert!(KfConfig::default().validate().is_ok());
    }
}
