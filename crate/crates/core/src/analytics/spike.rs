use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::WindowStats;
use crate::corpus::{de_ts, ser_ts};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeConfig {
    /// EWMA smoothing factor.
    pub lambda: f64,
    /// Number of standard deviations above the baseline that counts as a spike.
    pub multiplier: f64,
    /// Windows with fewer documents never alert.
    pub volume_floor: u64,
    /// Windows absorbed into the baseline before alerting is enabled.
    pub warmup: usize,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            lambda: 0.2,
            multiplier: 3.0,
            volume_floor: 20,
            warmup: 5,
        }
    }
}

/// Running mean and variance of the negative fraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EwmaState {
    pub mean: f64,
    pub var: f64,
    /// Windows folded into the baseline so far.
    pub observed: usize,
}

impl EwmaState {
    pub fn std(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }

    pub fn update(&mut self, x: f64, lambda: f64) {
        if self.observed == 0 {
            self.mean = x;
            self.var = 0.0;
        } else {
            let diff = x - self.mean;
            self.mean += lambda * diff;
            self.var = (1.0 - lambda) * (self.var + lambda * diff * diff);
        }
        self.observed += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    #[serde(serialize_with = "ser_ts", deserialize_with = "de_ts")]
    pub window_start: DateTime<Utc>,
    pub negative_fraction: f64,
    pub baseline: f64,
    pub std: f64,
    pub multiplier: f64,
    pub volume: u64,
}

impl Alert {
    pub fn threshold(&self) -> f64 {
        self.baseline + self.multiplier * self.std
    }
}

/// Tests one closed window against the baseline, then folds it in.
///
/// Windows without any classified document carry no negative fraction and
/// leave the state untouched.
pub fn check_spike(window: &WindowStats, state: &mut EwmaState, config: &SpikeConfig) -> Option<Alert> {
    let fraction = window.negative_fraction()?;
    let armed = state.observed >= config.warmup;
    let alert =
        (armed && window.volume >= config.volume_floor && fraction > state.mean + config.multiplier * state.std())
            .then(|| Alert {
                window_start: window.start,
                negative_fraction: fraction,
                baseline: state.mean,
                std: state.std(),
                multiplier: config.multiplier,
                volume: window.volume,
            });
    state.update(fraction, config.lambda);
    alert
}
