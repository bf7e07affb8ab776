//! One-sided CUSUM with tolerance and reset-after-trigger.
//!
//! While the previous statistic is at or below the threshold the update is the
//! usual `g = max(0, g + x - q)`. Once it has exceeded the threshold the next
//! update restarts from zero without the `max`, i.e. `g = x - q`, which may be
//! negative for one step.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cusum {
    /// Accumulated statistic.
    pub g: f64,
    /// Tolerance subtracted from every input.
    pub q: f64,
    /// Trigger threshold.
    pub e: f64,
    /// Whether the last update ended above the threshold.
    pub triggered: bool,
}

impl Cusum {
    pub fn new(q: f64, e: f64) -> Self {
        Self {
            g: 0.0,
            q,
            e,
            triggered: false,
        }
    }

    /// Transition for input `x`, leaving `self` untouched.
    #[must_use]
    pub fn updated(&self, x: f64) -> Self {
        let g = if self.g <= self.e {
            (self.g + x - self.q).max(0.0)
        } else {
            x - self.q
        };
        Self {
            g,
            triggered: g > self.e,
            ..*self
        }
    }

    /// Applies [`Cusum::updated`] in place and returns the new trigger flag.
    pub fn update(&mut self, x: f64) -> bool {
        *self = self.updated(x);
        self.triggered
    }

    pub fn reset(&mut self) {
        self.g = 0.0;
        self.triggered = false;
    }
}
