//! Experiment configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! k_all = 100
//! preset = "large-n"          # or an explicit `schedule = [[25, 2000], [30, 2000]]`
//! estimators = ["kf", "nn", "raw"]
//!
//! [kf]
//! q_minus = 0.0
//!
//! [nn]
//! e_d = 20.0
//! ```
//!
//! Every table is optional and falls back to the defaults below.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bianchi::{Model, ProtocolParams, Solver};
use crate::dcf::{Countdown, LoadSchedule, MeasurementMode, RunOptions};
use crate::error::{Error, Result};
use crate::harness::sweep::SweepGrid;
use crate::kf::KfConfig;
use crate::nn::NnConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Named load schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "small-n")]
    SmallN,
    #[serde(rename = "large-n")]
    LargeN,
}

impl Preset {
    pub fn schedule(self) -> LoadSchedule {
        let counts: [u32; 4] = match self {
            Preset::SmallN => [3, 6, 9, 12],
            Preset::LargeN => [21, 25, 30, 34],
        };
        LoadSchedule {
            segments: counts.iter().map(|&n| (n, 2000)).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::SmallN => "small-n",
            Preset::LargeN => "large-n",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-n" => Ok(Preset::SmallN),
            "large-n" => Ok(Preset::LargeN),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (small-n, large-n)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Kf,
    Nn,
    Raw,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kf" => Ok(Estimator::Kf),
            "nn" => Ok(Estimator::Nn),
            "raw" => Ok(Estimator::Raw),
            other => Err(Error::config(
                "estimators",
                format!("unknown estimator `{other}` (kf, nn, raw)"),
            )),
        }
    }
}

/// Parses a comma-separated estimator list such as `kf,nn`.
pub fn parse_estimators(list: &str) -> Result<Vec<Estimator>> {
    let mut v = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Estimator::from_str)
        .collect::<Result<Vec<_>>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

/// Operational definitions behind the per-segment metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Convergence band around the true count.
    pub converge_band: f64,
    /// Consecutive in-band slots required for convergence.
    pub converge_hold: usize,
    /// Late part of a segment where detector triggers count as false alarms.
    pub quiet_tail: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            converge_band: 1.0,
            converge_hold: 50,
            quiet_tail: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub protocol: ProtocolParams,
    pub solver: Solver,
    /// Explicit schedule; takes precedence over `preset`.
    pub schedule: Option<LoadSchedule>,
    pub preset: Option<Preset>,
    /// Sub-frames per observation window.
    pub k_all: u32,
    pub seed: u64,
    pub measurement: MeasurementMode,
    pub countdown: Countdown,
    pub kf: KfConfig,
    pub nn: NnConfig,
    pub estimators: Vec<Estimator>,
    pub metrics: MetricsConfig,
    pub sweep: SweepGrid,
    /// Output directory for CSV and SVG artifacts.
    pub out_dir: PathBuf,
    /// Large-n regime used by the timing benchmark.
    pub bench_users: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            protocol: ProtocolParams::default(),
            solver: Solver::default(),
            schedule: None,
            preset: Some(Preset::SmallN),
            k_all: 100,
            seed: 1,
            measurement: MeasurementMode::default(),
            countdown: Countdown::default(),
            kf: KfConfig::default(),
            nn: NnConfig::default(),
            estimators: vec![Estimator::Kf, Estimator::Nn, Estimator::Raw],
            metrics: MetricsConfig::default(),
            sweep: SweepGrid::default(),
            out_dir: PathBuf::from("out"),
            bench_users: 25,
        }
    }
}

impl ExperimentConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::config("<toml>", e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn schedule(&self) -> LoadSchedule {
        self.schedule
            .clone()
            .unwrap_or_else(|| self.preset.unwrap_or(Preset::SmallN).schedule())
    }

    pub fn model(&self) -> Model {
        Model::with_solver(self.protocol, self.solver)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            k_all: self.k_all,
            seed: self.seed,
            mode: self.measurement,
            countdown: self.countdown,
        }
    }

    /// The filter settings with the window size of this experiment.
    pub fn kf_config(&self) -> KfConfig {
        KfConfig {
            k_all: self.k_all,
            ..self.kf
        }
    }

    pub fn enabled(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    /// Sets both the simulator seed and the network initialisation seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.nn.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.protocol.validate()?;
        let s = &self.solver;
        if !(0.0 < s.p_min
            && s.p_min < s.p_max
            && s.p_max < 1.0
            && 0.0 < s.p_floor
            && s.p_floor < s.p_max)
        {
            return Err(Error::config(
                "solver",
                "need 0 < p_min, p_floor < p_max < 1",
            ));
        }
        if !(s.tolerance > 0.0 && s.slope_step > 0.0 && s.max_iterations > 0) {
            return Err(Error::config(
                "solver",
                "tolerance, slope_step and max_iterations must be > 0",
            ));
        }
        self.schedule().validate()?;
        if self.k_all == 0 {
            return Err(Error::config("k_all", "must be >= 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config(
                "estimators",
                "enable at least one of kf, nn, raw",
            ));
        }
        self.kf_config().validate()?;
        self.nn.validate()?;
        let m = &self.metrics;
        if !(m.converge_band > 0.0 && m.converge_hold > 0) {
            return Err(Error::config(
                "metrics",
                "converge_band and converge_hold must be > 0",
            ));
        }
        self.sweep.validate()?;
        if self.bench_users == 0 {
            return Err(Error::config("bench_users", "must be >= 1"));
        }
        Ok(())
    }
}
