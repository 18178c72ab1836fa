use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Calls made before timing starts.
pub const WARMUP_CALLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples: usize,
}

impl LatencySummary {
    /// `None` for an empty sample set.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(LatencySummary {
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: sorted[rank - 1],
            samples: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Wall-clock training time in hours; `None` for models that were not trained here.
    pub training_hours: Option<f64>,
    pub latency: Option<LatencySummary>,
    pub param_count: u64,
}

/// Times `classify` once per call over `docs`, cycling through them, after
/// [`WARMUP_CALLS`] untimed calls.
pub fn measure_efficiency<F, R>(
    mut classify: F,
    docs: &[Document],
    repetitions: usize,
    param_count: u64,
    training_hours: Option<f64>,
) -> Result<EfficiencyReport>
where
    F: FnMut(&Document) -> Result<R>,
{
    if repetitions < 30 {
        return Err(Error::InvalidInput(format!(
            "need at least 30 repetitions, got {repetitions}"
        )));
    }
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents to time".into()));
    }
    let mut it = docs.iter().cycle();
    for _ in 0..WARMUP_CALLS {
        std::hint::black_box(classify(it.next().expect("cycle"))?);
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let doc = it.next().expect("cycle");
        let t = Instant::now();
        std::hint::black_box(classify(doc)?);
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(EfficiencyReport {
        training_hours,
        latency: LatencySummary::from_samples(&samples),
        param_count,
    })
}
