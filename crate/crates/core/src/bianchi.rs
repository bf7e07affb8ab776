//! Saturated 802.11 DCF relations between the per-slot transmission
//! probability `tau`, the conditional collision probability `p` and the
//! number of competing stations `n`.
//!
//! The forward map `p -> n` has a closed form ([`Model::users_of_p`]). Its
//! inverse `n -> p` ([`Model::collision_of_users`]) and the inverse's
//! derivative ([`Model::collision_slope`]) have none and are computed
//! numerically: bisection on the monotone forward map and a central
//! finite difference respectively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WiFi MAC constants plus the on-air durations of the three sub-frame kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    /// Initial contention window size `G`, in slots.
    pub cw_min: u32,
    /// Maximum back-off stage `m`.
    pub max_stage: u32,
    /// Duration of a successful sub-frame, in microseconds.
    pub t_success_us: f64,
    /// Duration of a collided sub-frame, in microseconds.
    pub t_collision_us: f64,
    /// Duration of an empty sub-frame, in microseconds.
    pub t_idle_us: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            cw_min: 32,
            max_stage: 3,
            t_success_us: 192.58,
            t_collision_us: 45.58,
            t_idle_us: 20.0,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.cw_min < 2 {
            return Err(Error::config("protocol.cw_min", "must be >= 2"));
        }
        // The largest window G * 2^m has to fit the simulator's counters.
        if self.max_stage > 20 || (self.cw_min as u64) << self.max_stage > u32::MAX as u64 {
            return Err(Error::config(
                "protocol.max_stage",
                "contention window G * 2^m overflows",
            ));
        }
        for (field, v) in [
            ("protocol.t_success_us", self.t_success_us),
            ("protocol.t_collision_us", self.t_collision_us),
            ("protocol.t_idle_us", self.t_idle_us),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Contention window of back-off stage `stage`: `G * 2^stage`.
    pub fn window(&self, stage: u32) -> u32 {
        self.cw_min << stage
    }

    /// Modeled air time of a window with the given sub-frame counts.
    pub fn observation_time_us(&self, k_success: u32, k_collision: u32, k_idle: u32) -> f64 {
        k_success as f64 * self.t_success_us
            + k_collision as f64 * self.t_collision_us
            + k_idle as f64 * self.t_idle_us
    }
}

/// Numerical settings of the model inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    /// Lower end of the bisection bracket on `p`.
    pub p_min: f64,
    /// Upper end of the bisection bracket and the clamp for measured `p >= 1`.
    pub p_max: f64,
    /// Clamp for measured `p <= 0`.
    pub p_floor: f64,
    /// Termination tolerance on `|f(p) - n|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step of the central difference used for `h'(n)`.
    pub slope_step: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            p_min: 1e-9,
            p_max: 0.999,
            p_floor: 1e-4,
            tolerance: 1e-9,
            max_iterations: 200,
            slope_step: 1e-3,
        }
    }
}

/// Half-width of the band around `p = 1/2` where `tau` switches to its limit.
const SINGULAR_BAND: f64 = 1e-6;

/// A consistent `(tau, p, n)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub tau: f64,
    pub p: f64,
    pub n: f64,
}

/// The Bianchi relations for one set of protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Model {
    pub params: ProtocolParams,
    pub solver: Solver,
}

impl Model {
    pub fn new(params: ProtocolParams) -> Self {
        Self {
            params,
            solver: Solver::default(),
        }
    }

    pub fn with_solver(params: ProtocolParams, solver: Solver) -> Self {
        Self { params, solver }
    }

    /// Per-slot transmission probability of a station whose transmissions
    /// collide with probability `p`.
    ///
    /// The expression is 0/0 at `p = 1/2`; inside a `1e-6` band around it the
    /// analytic limit `4 / (2G + 2 + mG)` is returned.
    pub fn tau_of_p(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "[0, 1)",
            });
        }
        Ok(self.tau_unchecked(p))
    }

    fn tau_unchecked(&self, p: f64) -> f64 {
        let g = self.params.cw_min as f64;
        let m = self.params.max_stage;
        let a = 1.0 - 2.0 * p;
        if a.abs() < SINGULAR_BAND {
            return 4.0 / (2.0 * g + 2.0 + m as f64 * g);
        }
        2.0 * a / (a * (g + 1.0) + p * g * (1.0 - (2.0 * p).powi(m as i32)))
    }

    fn f(&self, p: f64) -> f64 {
        let tau = self.tau_unchecked(p);
        1.0 + (-p).ln_1p() / (-tau).ln_1p()
    }

    /// Number of competing stations implied by the collision probability `p`.
    ///
    /// Strict: `p` must lie in `(0, 1)`.
    pub fn users_of_p(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "(0, 1)",
            });
        }
        Ok(self.f(p))
    }

    /// Clamps a measured probability into `[p_floor, p_max]`.
    pub fn clamp_p(&self, p: f64) -> f64 {
        if p.is_nan() {
            return self.solver.p_floor;
        }
        p.clamp(self.solver.p_floor, self.solver.p_max)
    }

    /// [`Model::users_of_p`] after clamping `p` into `[p_floor, p_max]`.
    pub fn users_of_p_lenient(&self, p: f64) -> f64 {
        self.f(self.clamp_p(p))
    }

    /// Largest user count the bisection bracket can represent, `f(p_max)`.
    pub fn max_users(&self) -> f64 {
        self.f(self.solver.p_max)
    }

    /// Collision probability `h(n)`: the `p` with `users_of_p(p) = n`.
    pub fn collision_of_users(&self, n: f64) -> Result<f64> {
        if !n.is_finite() || n < 1.0 {
            return Err(Error::Domain {
                what: "n",
                value: n,
                domain: "[1, inf)",
            });
        }
        if n == 1.0 {
            return Ok(0.0);
        }
        let s = &self.solver;
        let (mut lo, mut hi) = (s.p_min, s.p_max);
        let (f_lo, f_hi) = (self.f(lo), self.f(hi));
        if n <= f_lo {
            return Ok(lo);
        }
        if n > f_hi {
            return Err(Error::NoConvergence {
                target: n,
                iterations: 0,
                residual: n - f_hi,
            });
        }
        let mut residual = f64::INFINITY;
        for _ in 0..s.max_iterations {
            let mid = 0.5 * (lo + hi);
            let r = self.f(mid) - n;
            residual = r.abs();
            if residual <= s.tolerance {
                return Ok(mid);
            }
            if mid <= lo || mid >= hi {
                break;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoConvergence {
            target: n,
            iterations: s.max_iterations,
            residual,
        })
    }

    /// Derivative `h'(n)` by central difference; one-sided at the `n = 1` edge.
    pub fn collision_slope(&self, n: f64) -> Result<f64> {
        let d = self.solver.slope_step;
        if n - d >= 1.0 {
            Ok((self.collision_of_users(n + d)? - self.collision_of_users(n - d)?) / (2.0 * d))
        } else {
            Ok((self.collision_of_users(n + d)? - self.collision_of_users(n)?) / d)
        }
    }

    /// Fraction of non-idle slots produced by stations that see collision
    /// probability `p`: `1 - (1 - tau)(1 - p)`, i.e. `1 - (1 - tau)^n`.
    pub fn busy_of_p(&self, p: f64) -> Result<f64> {
        let tau = self.tau_of_p(p)?;
        Ok(1.0 - (1.0 - tau) * (1.0 - p))
    }

    /// Inverse of [`Model::busy_of_p`], clamped to `[0, p_max]`.
    ///
    /// Busy fractions below the single-station value `tau(0)` map to 0.
    pub fn collision_of_busy(&self, busy: f64) -> f64 {
        let busy_at = |p: f64| 1.0 - (1.0 - self.tau_unchecked(p)) * (1.0 - p);
        if busy.is_nan() || busy <= busy_at(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, self.solver.p_max);
        if busy >= busy_at(hi) {
            return hi;
        }
        // Monotone in p; resolve to near machine precision.
        for _ in 0..self.solver.max_iterations {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if busy_at(mid) < busy {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The consistent model point for `n` users.
    pub fn point(&self, n: f64) -> Result<ModelPoint> {
        let p = self.collision_of_users(n)?;
        Ok(ModelPoint {
            tau: self.tau_unchecked(p),
            p,
            n,
        })
    }
}
