//! Online, unsupervised MLP filter for the user count.
//!
//! Each decision slot the network maps `[previous output, measured count]`
//! to a new estimate and takes one Adam step on
//!
//! ```text
//! L = alpha (o - n_hat)^2 / 2 + beta (o - o_prev)^2 / 2
//! ```
//!
//! A CUSUM on `L` selects between a stable regime (small `alpha`, large
//! `beta`, small learning rate) that smooths towards the previous output and
//! a changed regime (large `alpha`, small `beta`, large learning rate) that
//! chases the measurement.

mod adam;
pub mod io;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{glorot_limit, Activation, LayerShape, Mlp, Tape};

use serde::{Deserialize, Serialize};

use crate::cusum::Cusum;
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnConfig {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub lr_plus: f64,
    pub lr_minus: f64,
    /// CUSUM threshold on the loss.
    pub e_d: f64,
    /// CUSUM tolerance on the loss.
    pub q: f64,
    pub init_seed: u64,
    pub hidden: Vec<usize>,
    /// One per hidden layer; the output layer is always linear.
    pub activations: Vec<Activation>,
    /// Slots forced into the changed regime after a cold start.
    pub warmup_slots: u32,
    /// Inputs are multiplied by this before the network and the raw output
    /// divided by it; the loss stays in user units.
    pub input_scale: f64,
    pub adam: AdamConfig,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            alpha_plus: 0.99,
            alpha_minus: 0.01,
            beta_plus: 0.99,
            beta_minus: 0.01,
            lr_plus: 0.1,
            lr_minus: 0.01,
            e_d: 20.0,
            q: 0.1,
            init_seed: 1,
            hidden: vec![32, 16, 8, 4],
            activations: vec![
                Activation::Tanh,
                Activation::Tanh,
                Activation::Tanh,
                Activation::None,
            ],
            warmup_slots: 50,
            input_scale: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("nn.alpha_plus", self.alpha_plus),
            ("nn.alpha_minus", self.alpha_minus),
            ("nn.beta_plus", self.beta_plus),
            ("nn.beta_minus", self.beta_minus),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(field, format!("must be in (0, 1], got {v}")));
            }
        }
        for (field, v) in [
            ("nn.lr_plus", self.lr_plus),
            ("nn.lr_minus", self.lr_minus),
            ("nn.e_d", self.e_d),
            ("nn.q", self.q),
            ("nn.input_scale", self.input_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be > 0, got {v}")));
            }
        }
        if self.hidden.len() != self.activations.len() {
            return Err(Error::config(
                "nn.activations",
                "need one activation per hidden layer",
            ));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::config(
                "nn.adam",
                "need 0 <= beta1, beta2 < 1 and eps > 0",
            ));
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        let mut s = vec![2];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    fn all_activations(&self) -> Vec<Activation> {
        let mut a = self.activations.clone();
        a.push(Activation::None);
        a
    }

    /// `(alpha, beta, learning rate)` of a regime.
    pub fn weights(&self, regime: Regime) -> (f64, f64, f64) {
        match regime {
            Regime::Stable => (self.alpha_minus, self.beta_plus, self.lr_minus),
            Regime::Changed => (self.alpha_plus, self.beta_minus, self.lr_plus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Stable,
    Changed,
}

/// `alpha (o - n_hat)^2 / 2 + beta (o - prev)^2 / 2`.
pub fn loss(o: f64, n_hat: f64, prev: f64, alpha: f64, beta: f64) -> f64 {
    0.5 * alpha * (o - n_hat).powi(2) + 0.5 * beta * (o - prev).powi(2)
}

/// Derivative of [`loss`] with respect to `o`.
pub fn loss_grad(o: f64, n_hat: f64, prev: f64, alpha: f64, beta: f64) -> f64 {
    alpha * (o - n_hat) + beta * (o - prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnState {
    pub mlp: Mlp,
    pub adam: Adam,
    /// Last raw output, floored at zero.
    pub prev_output: f64,
    pub cusum: Cusum,
    pub regime: Regime,
    /// Completed steps.
    pub t: u64,
}

/// What one [`nn_step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnStepReport {
    /// Raw network output `o_t`, in user units.
    pub output: f64,
    /// Loss with the weights in force before the step; feeds the CUSUM.
    pub detect_loss: f64,
    /// Loss with the newly selected weights; trained on.
    pub train_loss: f64,
    pub regime: Regime,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub g: f64,
    pub triggered: bool,
}

impl NnStepReport {
    /// Output floored at one user, for reporting.
    pub fn estimate(&self) -> f64 {
        self.output.max(1.0)
    }
}

impl NnState {
    pub fn init(cfg: &NnConfig) -> Result<Self> {
        cfg.validate()?;
        let mlp = Mlp::glorot(&cfg.sizes(), &cfg.all_activations(), cfg.init_seed)?;
        let adam = Adam::new(mlp.num_params(), cfg.adam);
        Ok(Self {
            mlp,
            adam,
            prev_output: 0.0,
            cusum: Cusum::new(cfg.q, cfg.e_d),
            regime: if cfg.warmup_slots > 0 {
                Regime::Changed
            } else {
                Regime::Stable
            },
            t: 0,
        })
    }
}

/// Reusable buffers for [`nn_step`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    tape: Tape,
    grad: Vec<f64>,
}

/// Raw network output in user units for `[prev, n_hat]`.
pub fn forward(mlp: &Mlp, prev: f64, n_hat: f64, cfg: &NnConfig) -> Result<f64> {
    let s = cfg.input_scale;
    ensure_finite("network output", mlp.forward(&[prev * s, n_hat * s]) / s)
}

/// One online update with measured count `n_hat`.
pub fn nn_step(
    state: &mut NnState,
    n_hat: f64,
    cfg: &NnConfig,
    ws: &mut Workspace,
) -> Result<NnStepReport> {
    let s = cfg.input_scale;
    let prev = state.prev_output;
    let raw = state.mlp.forward_tape(&[prev * s, n_hat * s], &mut ws.tape);
    let o = ensure_finite("network output", raw / s)?;

    let (alpha, beta, _) = cfg.weights(state.regime);
    let detect_loss = loss(o, n_hat, prev, alpha, beta);
    let triggered = state.cusum.update(detect_loss);

    let regime = if state.t < cfg.warmup_slots as u64 || triggered {
        Regime::Changed
    } else {
        Regime::Stable
    };
    let (alpha, beta, lr) = cfg.weights(regime);
    let train_loss = loss(o, n_hat, prev, alpha, beta);

    ws.grad.clear();
    ws.grad.resize(state.mlp.num_params(), 0.0);
    let d_out = loss_grad(o, n_hat, prev, alpha, beta) / s;
    state.mlp.backward(&mut ws.tape, d_out, &mut ws.grad);
    check_all_finite("gradient", &ws.grad)?;
    state.adam.apply(&mut state.mlp.params, &ws.grad, lr);
    check_all_finite("parameter", &state.mlp.params)?;

    state.prev_output = o.max(0.0);
    state.regime = regime;
    state.t += 1;
    Ok(NnStepReport {
        output: o,
        detect_loss,
        train_loss,
        regime,
        alpha,
        beta,
        lr,
        g: state.cusum.g,
        triggered,
    })
}

fn check_all_finite(what: &'static str, xs: &[f64]) -> Result<()> {
    // Branch-free pass first; the search only runs on failure.
    if xs.iter().fold(true, |ok, x| ok & x.is_finite()) {
        return Ok(());
    }
    let value = *xs
        .iter()
        .find(|x| !x.is_finite())
        .expect("some value is not finite");
    Err(Error::NonFinite { what, value })
}

/// Runs a fresh network over a stream of measured counts.
pub fn nn_run(n_hats: &[f64], cfg: &NnConfig) -> Result<Vec<NnStepReport>> {
    let mut state = NnState::init(cfg)?;
    let mut ws = Workspace::default();
    n_hats
        .iter()
        .enumerate()
        .map(|(t, &x)| nn_step(&mut state, x, cfg, &mut ws).map_err(|e| e.at_slot(t)))
        .collect()
}
