//! Slot-level simulation of saturated stations running CSMA/CA with binary
//! exponential back-off, and the observation windows an external listener
//! records from it.
//!
//! Every station always has a frame queued. In each sub-frame the stations
//! whose counter is zero transmit: one transmitter is a success, two or more
//! a collision, none an idle sub-frame. Transmitters redraw their counter
//! from the window of their (possibly advanced) stage. How non-transmitters
//! count down is set by [`Countdown`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bianchi::{Model, ProtocolParams};
use crate::error::{Error, Result};

/// Back-off state of one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationState {
    pub stage: u32,
    pub counter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubframeOutcome {
    Idle,
    Success,
    Collision,
}

/// When non-transmitting stations decrement their back-off counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Countdown {
    /// Once per sub-frame, busy or idle. This is the generic-slot convention
    /// of the Bianchi chain: the busy sub-frame absorbs the decrement that
    /// follows it, so both the collision probability and the busy fraction
    /// agree with the model.
    #[default]
    GenericSlot,
    /// Only on idle sub-frames; counters freeze while the medium is busy.
    /// The collision probability still agrees with the model but the busy
    /// fraction is much lower than `1 - (1 - tau)^n`.
    IdleOnly,
}

/// How a window's sub-frame counts become a collision-probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// Non-idle share of the window, `(k_busy + k_coll) / k_all`.
    BusyFraction,
    /// Collided share of the non-idle sub-frames, `k_coll / max(1, k_busy + k_coll)`.
    CollisionShare,
    /// Busy fraction mapped to the conditional collision probability through
    /// `1 - busy = (1 - tau(p)) (1 - p)`.
    #[default]
    BusyCorrected,
}

impl std::str::FromStr for MeasurementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "busy-fraction" => Ok(Self::BusyFraction),
            "collision-share" => Ok(Self::CollisionShare),
            "busy-corrected" => Ok(Self::BusyCorrected),
            other => Err(Error::config(
                "measurement",
                format!("unknown mode `{other}` (busy-fraction, collision-share, busy-corrected)"),
            )),
        }
    }
}

/// One observation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Successful sub-frames.
    pub k_busy: u32,
    /// Collided sub-frames.
    pub k_coll: u32,
    /// All observed sub-frames.
    pub k_all: u32,
    pub p_hat: f64,
    /// User count implied by the clamped `p_hat`.
    pub n_hat: f64,
    pub elapsed_us: f64,
}

impl Measurement {
    pub fn from_counts(
        k_busy: u32,
        k_coll: u32,
        k_all: u32,
        mode: MeasurementMode,
        model: &Model,
    ) -> Self {
        debug_assert!(k_all >= 1 && k_busy + k_coll <= k_all);
        let busy = (k_busy + k_coll) as f64 / k_all as f64;
        let p_hat = match mode {
            MeasurementMode::BusyFraction => busy,
            MeasurementMode::CollisionShare => k_coll as f64 / (k_busy + k_coll).max(1) as f64,
            MeasurementMode::BusyCorrected => model.collision_of_busy(busy),
        };
        Self {
            k_busy,
            k_coll,
            k_all,
            p_hat,
            n_hat: model.users_of_p_lenient(p_hat),
            elapsed_us: model
                .params
                .observation_time_us(k_busy, k_coll, k_all - k_busy - k_coll),
        }
    }

    pub fn k_idle(&self) -> u32 {
        self.k_all - self.k_busy - self.k_coll
    }
}

/// Transmission counters, for comparing against the analytic collision probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TxStats {
    pub attempts: u64,
    pub collided: u64,
}

impl TxStats {
    pub fn collision_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.collided as f64 / self.attempts as f64
        }
    }
}

/// A population of saturated stations sharing one channel.
#[derive(Debug, Clone)]
pub struct DcfSimulator {
    params: ProtocolParams,
    countdown: Countdown,
    stations: Vec<StationState>,
    rng: ChaCha8Rng,
    /// Station 0, as long as it is present.
    tagged: TxStats,
    all: TxStats,
    transmitters: Vec<usize>,
}

impl DcfSimulator {
    pub fn new(n: usize, params: ProtocolParams, countdown: Countdown, seed: u64) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::config("n", "at least one station is required"));
        }
        let mut sim = Self {
            params,
            countdown,
            stations: Vec::with_capacity(n),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tagged: TxStats::default(),
            all: TxStats::default(),
            transmitters: Vec::with_capacity(n),
        };
        sim.set_population(n);
        Ok(sim)
    }

    pub fn stations(&self) -> &[StationState] {
        &self.stations
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn tagged_stats(&self) -> TxStats {
        self.tagged
    }

    pub fn total_stats(&self) -> TxStats {
        self.all
    }

    fn fresh_station(&mut self) -> StationState {
        StationState {
            stage: 0,
            counter: self.rng.gen_range(0..self.params.cw_min),
        }
    }

    /// Grows or shrinks the population to `n` stations. Joiners start at
    /// stage 0 with a fresh counter; leavers are picked uniformly at random.
    pub fn set_population(&mut self, n: usize) {
        assert!(n >= 1, "population must be non-empty");
        while self.stations.len() < n {
            let s = self.fresh_station();
            self.stations.push(s);
        }
        while self.stations.len() > n {
            let i = self.rng.gen_range(0..self.stations.len());
            self.stations.remove(i);
        }
    }

    /// Advances the channel by one sub-frame.
    pub fn step_subframe(&mut self) -> SubframeOutcome {
        self.transmitters.clear();
        self.transmitters.extend(
            self.stations
                .iter()
                .enumerate()
                .filter(|(_, s)| s.counter == 0)
                .map(|(i, _)| i),
        );

        let outcome = match self.transmitters.len() {
            0 => SubframeOutcome::Idle,
            1 => SubframeOutcome::Success,
            _ => SubframeOutcome::Collision,
        };

        let collided = outcome == SubframeOutcome::Collision;
        for k in 0..self.transmitters.len() {
            let i = self.transmitters[k];
            let stage = if collided {
                (self.stations[i].stage + 1).min(self.params.max_stage)
            } else {
                0
            };
            let counter = self.rng.gen_range(0..self.params.window(stage));
            // Pushed past zero so the decrement below leaves it at `counter`.
            self.stations[i] = StationState {
                stage,
                counter: counter + 1,
            };
            self.all.attempts += 1;
            self.all.collided += collided as u64;
            if i == 0 {
                self.tagged.attempts += 1;
                self.tagged.collided += collided as u64;
            }
        }

        match (outcome, self.countdown) {
            (SubframeOutcome::Idle, _) | (_, Countdown::GenericSlot) => {
                for s in &mut self.stations {
                    s.counter -= 1;
                }
            }
            (_, Countdown::IdleOnly) => {
                for &i in &self.transmitters {
                    self.stations[i].counter -= 1;
                }
            }
        }
        outcome
    }

    /// Advances `k_all` sub-frames and summarises them as one measurement.
    pub fn observe_window(
        &mut self,
        k_all: u32,
        mode: MeasurementMode,
        model: &Model,
    ) -> Measurement {
        assert!(k_all >= 1, "window must contain at least one sub-frame");
        let (mut k_busy, mut k_coll) = (0, 0);
        for _ in 0..k_all {
            match self.step_subframe() {
                SubframeOutcome::Idle => {}
                SubframeOutcome::Success => k_busy += 1,
                SubframeOutcome::Collision => k_coll += 1,
            }
        }
        Measurement::from_counts(k_busy, k_coll, k_all, mode, model)
    }
}

/// Piecewise-constant number of active stations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadSchedule {
    /// `(stations, duration in decision slots)` pairs.
    pub segments: Vec<(u32, u32)>,
}

impl LoadSchedule {
    pub fn new(segments: Vec<(u32, u32)>) -> Result<Self> {
        let s = Self { segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::config(
                "schedule",
                "must contain at least one segment",
            ));
        }
        for (i, &(n, len)) in self.segments.iter().enumerate() {
            if n == 0 {
                return Err(Error::config(
                    format!("schedule[{i}]"),
                    "user count must be >= 1",
                ));
            }
            if len == 0 {
                return Err(Error::config(
                    format!("schedule[{i}]"),
                    "duration must be > 0",
                ));
            }
        }
        Ok(())
    }

    pub fn total_slots(&self) -> usize {
        self.segments.iter().map(|&(_, d)| d as usize).sum()
    }

    /// Start slot of every segment.
    pub fn boundaries(&self) -> Vec<usize> {
        self.segments
            .iter()
            .scan(0usize, |t, &(_, d)| {
                let start = *t;
                *t += d as usize;
                Some(start)
            })
            .collect()
    }

    /// True user count at every slot.
    pub fn truth(&self) -> impl Iterator<Item = u32> + '_ {
        self.segments
            .iter()
            .flat_map(|&(n, d)| std::iter::repeat(n).take(d as usize))
    }
}

/// A measurement tagged with its slot index and the true user count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotMeasurement {
    pub t: usize,
    pub n_true: u32,
    pub m: Measurement,
}

/// Options of [`run_schedule`] beyond the schedule itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub k_all: u32,
    pub seed: u64,
    pub mode: MeasurementMode,
    pub countdown: Countdown,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            k_all: 100,
            seed: 1,
            mode: MeasurementMode::default(),
            countdown: Countdown::default(),
        }
    }
}

/// Simulates `schedule` and returns one measurement per decision slot.
pub fn run_schedule(
    schedule: &LoadSchedule,
    model: &Model,
    opts: RunOptions,
) -> Result<Vec<SlotMeasurement>> {
    schedule.validate()?;
    if opts.k_all == 0 {
        return Err(Error::config("k_all", "must be >= 1"));
    }
    let first = schedule.segments[0].0 as usize;
    let mut sim = DcfSimulator::new(first, model.params, opts.countdown, opts.seed)?;
    let mut out = Vec::with_capacity(schedule.total_slots());
    let mut t = 0;
    for &(n, dur) in &schedule.segments {
        sim.set_population(n as usize);
        for _ in 0..dur {
            let m = sim.observe_window(opts.k_all, opts.mode, model);
            out.push(SlotMeasurement { t, n_true: n, m });
            t += 1;
        }
    }
    Ok(out)
}
