// Shared by several test targets; each uses a different subset.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line reimplementation of the channel: every station decrements
/// once per sub-frame unless it transmits.
pub struct Oracle {
    counter: Vec<u32>,
    stage: Vec<u32>,
    rng: ChaCha8Rng,
}

impl Oracle {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counter = (0..n).map(|_| rng.gen_range(0..32)).collect();
        Self {
            counter,
            stage: vec![0; n],
            rng,
        }
    }

    /// Busy sub-frames in a window of `k` sub-frames.
    pub fn window(&mut self, k: u32) -> u32 {
        let mut busy = 0;
        for _ in 0..k {
            let tx: Vec<usize> = (0..self.counter.len())
                .filter(|&i| self.counter[i] == 0)
                .collect();
            for i in 0..self.counter.len() {
                if self.counter[i] > 0 {
                    self.counter[i] -= 1;
                }
            }
            if !tx.is_empty() {
                busy += 1;
            }
            for &i in &tx {
                self.stage[i] = if tx.len() == 1 {
                    0
                } else {
                    (self.stage[i] + 1).min(3)
                };
                self.counter[i] = self.rng.gen_range(0..32u32 << self.stage[i]);
            }
        }
        busy
    }
}

pub fn oracle_tau(p: f64) -> f64 {
    if (1.0 - 2.0 * p).abs() < 1e-6 {
        return 4.0 / (2.0 * 32.0 + 2.0 + 3.0 * 32.0);
    }
    let a = 1.0 - 2.0 * p;
    2.0 * a / (a * 33.0 + p * 32.0 * (1.0 - (2.0 * p).powi(3)))
}

/// Users implied by a busy fraction: solve `1 - busy = (1 - tau(p))(1 - p)`
/// for `p` by bisection, then count users from `p`.
pub fn oracle_users(busy: f64) -> f64 {
    let busy = busy.clamp(1e-4, 0.999);
    let (mut lo, mut hi) = (0.0f64, 0.999f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (1.0 - oracle_tau(mid)) * (1.0 - mid) > 1.0 - busy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    users_of_collision(0.5 * (lo + hi))
}

/// Users implied by a conditional collision probability.
pub fn users_of_collision(p: f64) -> f64 {
    let p = p.clamp(1e-4, 0.999);
    1.0 + (1.0 - p).ln() / (1.0 - oracle_tau(p)).ln()
}
