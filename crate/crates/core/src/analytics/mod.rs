//! Streaming insights over classified documents: tumbling windows, trend
//! slopes, per-aspect summaries and EWMA spike alerts.
//!
//! [`Analytics`] is the single-writer state the service feeds with results in
//! arrival order. Readers get cloned snapshots.

mod spike;
mod trend;

use std::collections::{BTreeMap, VecDeque};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{de_ts, ser_ts, AspectLabel, AspectSet, Sentiment};
use crate::engine::Classification;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use spike::{check_spike, Alert, EwmaState, SpikeConfig};
pub use trend::{trend_series, TrendEstimate};

/// What the analytics layer needs to know about one processed document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(serialize_with = "ser_ts", deserialize_with = "de_ts")]
    pub timestamp: DateTime<Utc>,
    /// `None` for documents routed to unclassified.
    pub sentiment: Option<Sentiment>,
    /// Predicted aspect labels in aspect-set order, when the classifier
    /// produced them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<Vec<AspectLabel>>,
}

impl Observation {
    pub fn from_classification<T: Scalar>(timestamp: DateTime<Utc>, c: &Classification<T>) -> Self {
        match c.result() {
            Some(r) => Observation {
                timestamp,
                sentiment: Some(r.predicted_sentiment()),
                aspects: r.predicted_aspects(),
            },
            None => Observation {
                timestamp,
                sentiment: None,
                aspects: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectCounts {
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
    pub not_mentioned: u64,
}

impl AspectCounts {
    fn add(&mut self, label: AspectLabel) {
        match label {
            AspectLabel::Negative => self.negative += 1,
            AspectLabel::Neutral => self.neutral += 1,
            AspectLabel::Positive => self.positive += 1,
            AspectLabel::NotMentioned => self.not_mentioned += 1,
        }
    }

    fn merge(&mut self, other: &AspectCounts) {
        self.negative += other.negative;
        self.neutral += other.neutral;
        self.positive += other.positive;
        self.not_mentioned += other.not_mentioned;
    }

    pub fn mentioned(&self) -> u64 {
        self.negative + self.neutral + self.positive
    }

    pub fn total(&self) -> u64 {
        self.mentioned() + self.not_mentioned
    }

    /// Mean polarity over documents that mention the aspect.
    pub fn polarity(&self) -> Option<f64> {
        let m = self.mentioned();
        (m > 0).then(|| (self.positive as f64 - self.negative as f64) / m as f64)
    }
}

/// Aggregate of one tumbling window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    #[serde(serialize_with = "ser_ts", deserialize_with = "de_ts")]
    pub start: DateTime<Utc>,
    pub duration_ms: i64,
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
    pub unclassified: u64,
    pub aspects: BTreeMap<String, AspectCounts>,
    /// Mean of -1/0/+1 over classified documents, 0 when there are none.
    pub mean_polarity: f64,
    pub volume: u64,
}

impl WindowStats {
    pub fn empty(start: DateTime<Utc>, duration_ms: i64, aspects: &AspectSet) -> Self {
        WindowStats {
            start,
            duration_ms,
            negative: 0,
            neutral: 0,
            positive: 0,
            unclassified: 0,
            aspects: aspects
                .names()
                .iter()
                .map(|n| (n.clone(), AspectCounts::default()))
                .collect(),
            mean_polarity: 0.0,
            volume: 0,
        }
    }

    pub fn classified(&self) -> u64 {
        self.negative + self.neutral + self.positive
    }

    /// Share of classified documents predicted negative.
    pub fn negative_fraction(&self) -> Option<f64> {
        let c = self.classified();
        (c > 0).then(|| self.negative as f64 / c as f64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + chrono::Duration::milliseconds(self.duration_ms)
    }

    fn add(&mut self, obs: &Observation, aspects: &AspectSet) {
        self.volume += 1;
        match obs.sentiment {
            Some(Sentiment::Negative) => self.negative += 1,
            Some(Sentiment::Neutral) => self.neutral += 1,
            Some(Sentiment::Positive) => self.positive += 1,
            None => self.unclassified += 1,
        }
        if let Some(labels) = &obs.aspects {
            for (name, &label) in aspects.names().iter().zip(labels) {
                self.aspects.entry(name.clone()).or_default().add(label);
            }
        }
        let c = self.classified();
        self.mean_polarity = if c == 0 {
            0.0
        } else {
            (self.positive as f64 - self.negative as f64) / c as f64
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub duration_ms: i64,
    /// How many windows behind the newest one still accept arrivals.
    pub lateness: i64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            duration_ms: 60_000,
            lateness: 2,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_ms <= 0 || self.lateness < 0 {
            return Err(Error::InvalidConfig(format!(
                "window duration must be positive and lateness non-negative (got {} ms, {})",
                self.duration_ms, self.lateness
            )));
        }
        Ok(())
    }

    pub fn index_of(&self, ts: &DateTime<Utc>) -> i64 {
        ts.timestamp_millis().div_euclid(self.duration_ms)
    }
}

/// Where [`assign_window`] put a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Window(i64),
    Late,
}

/// Open windows plus the watermark that decides when they close.
#[derive(Debug, Clone)]
pub struct WindowState {
    config: WindowConfig,
    aspects: AspectSet,
    open: BTreeMap<i64, WindowStats>,
    closed: VecDeque<WindowStats>,
    watermark: Option<i64>,
    late: u64,
    ingested: u64,
    closed_volume: u64,
}

impl WindowState {
    pub fn new(config: WindowConfig, aspects: AspectSet) -> Result<Self> {
        config.validate()?;
        Ok(WindowState {
            config,
            aspects,
            open: BTreeMap::new(),
            closed: VecDeque::new(),
            watermark: None,
            late: 0,
            ingested: 0,
            closed_volume: 0,
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn aspects(&self) -> &AspectSet {
        &self.aspects
    }

    /// Documents that arrived after their window had closed.
    pub fn late(&self) -> u64 {
        self.late
    }

    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    pub fn open_windows(&self) -> impl Iterator<Item = &WindowStats> {
        self.open.values()
    }

    /// Σ closed volumes + Σ open volumes + late. Always equals [`Self::ingested`].
    pub fn accounted(&self) -> u64 {
        self.closed_volume + self.open.values().map(|w| w.volume).sum::<u64>() + self.late
    }

    /// Closed windows not yet taken, oldest first.
    pub fn take_closed(&mut self) -> Vec<WindowStats> {
        self.closed.drain(..).collect()
    }

    /// Closes every open window regardless of the watermark.
    pub fn flush(&mut self) {
        let open = std::mem::take(&mut self.open);
        for (_, w) in open {
            self.closed_volume += w.volume;
            self.closed.push_back(w);
        }
    }

    fn advance(&mut self, idx: i64) {
        if self.watermark.is_some_and(|w| w >= idx) {
            return;
        }
        self.watermark = Some(idx);
        let keep = self.open.split_off(&(idx - self.config.lateness));
        let done = std::mem::replace(&mut self.open, keep);
        for (_, w) in done {
            self.closed_volume += w.volume;
            self.closed.push_back(w);
        }
    }
}

/// Counts `obs` in its tumbling window, or in the late bucket when the window
/// is more than the lateness horizon behind the newest window seen.
pub fn assign_window(state: &mut WindowState, obs: &Observation) -> Placement {
    state.ingested += 1;
    let idx = state.config.index_of(&obs.timestamp);
    if state.watermark.is_some_and(|w| idx < w - state.config.lateness) {
        state.late += 1;
        return Placement::Late;
    }
    let duration = state.config.duration_ms;
    let aspects = &state.aspects;
    state
        .open
        .entry(idx)
        .or_insert_with(|| {
            let start = DateTime::<Utc>::from_timestamp_millis(idx * duration).expect("window start in range");
            WindowStats::empty(start, duration, aspects)
        })
        .add(obs, aspects);
    state.advance(idx);
    Placement::Window(idx)
}

/// OLS trend of mean polarity over `windows`, indexed by position.
pub fn trend(windows: &[WindowStats]) -> Result<TrendEstimate<f64>> {
    let ys: Vec<f64> = windows.iter().map(|w| w.mean_polarity).collect();
    trend_series(&ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectSummary {
    pub aspect: String,
    pub counts: AspectCounts,
    /// Windows in which the aspect was mentioned at least once.
    pub points: usize,
    pub trend: Option<TrendEstimate<f64>>,
}

impl AspectSummary {
    /// True when no document mentioned the aspect.
    pub fn is_empty(&self) -> bool {
        self.counts.mentioned() == 0
    }

    pub fn distribution(&self) -> Option<[f64; 3]> {
        let m = self.counts.mentioned();
        (m > 0).then(|| {
            let m = m as f64;
            [
                self.counts.negative as f64 / m,
                self.counts.neutral as f64 / m,
                self.counts.positive as f64 / m,
            ]
        })
    }

    pub fn trend(&self) -> Result<&TrendEstimate<f64>> {
        self.trend.as_ref().ok_or(Error::InsufficientData {
            needed: 2,
            got: self.points,
        })
    }
}

/// Summed counts for one aspect and the trend of its per-window polarity.
/// Windows where the aspect is never mentioned are skipped by the fit.
pub fn aspect_summary(windows: &[WindowStats], aspects: &AspectSet, aspect: &str) -> Result<AspectSummary> {
    if aspects.id_of(aspect).is_none() {
        return Err(Error::InvalidAspect(aspect.to_string()));
    }
    let mut counts = AspectCounts::default();
    let mut series = Vec::new();
    for w in windows {
        if let Some(c) = w.aspects.get(aspect) {
            counts.merge(c);
            series.extend(c.polarity());
        }
    }
    Ok(AspectSummary {
        aspect: aspect.to_string(),
        counts,
        points: series.len(),
        trend: trend_series(&series).ok(),
    })
}

/// Line-delimited logs for closed windows and alerts.
#[derive(Debug, Clone)]
pub struct AnalyticsLog {
    pub windows: PathBuf,
    pub alerts: PathBuf,
}

impl AnalyticsLog {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        AnalyticsLog {
            windows: dir.join("windows.jsonl"),
            alerts: dir.join("alerts.jsonl"),
        }
    }

    pub fn append_windows(&self, windows: &[WindowStats]) -> Result<()> {
        append_lines(&self.windows, windows)
    }

    pub fn append_alerts(&self, alerts: &[Alert]) -> Result<()> {
        append_lines(&self.alerts, alerts)
    }
}

fn append_lines<S: Serialize>(path: &Path, items: &[S]) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item)?);
        buf.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a log written by [`AnalyticsLog`].
pub fn read_log<D: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<D>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    pub window: WindowConfig,
    pub spike: SpikeConfig,
}

/// Windowing, baseline and alert history behind one writer.
#[derive(Debug, Clone)]
pub struct Analytics {
    windows: WindowState,
    spike: SpikeConfig,
    ewma: EwmaState,
    history: Vec<WindowStats>,
    alerts: Vec<Alert>,
    log: Option<AnalyticsLog>,
}

impl Analytics {
    pub fn new(config: AnalyticsConfig, aspects: AspectSet) -> Result<Self> {
        Ok(Analytics {
            windows: WindowState::new(config.window, aspects)?,
            spike: config.spike,
            ewma: EwmaState::default(),
            history: Vec::new(),
            alerts: Vec::new(),
            log: None,
        })
    }

    pub fn with_log(mut self, log: AnalyticsLog) -> Self {
        self.log = Some(log);
        self
    }

    /// Counts one observation and returns the alerts raised by any windows
    /// that closed as a result.
    pub fn ingest(&mut self, obs: &Observation) -> Result<Vec<Alert>> {
        assign_window(&mut self.windows, obs);
        self.process_closed()
    }

    /// Closes all open windows, e.g. at end of input.
    pub fn flush(&mut self) -> Result<Vec<Alert>> {
        self.windows.flush();
        self.process_closed()
    }

    fn process_closed(&mut self) -> Result<Vec<Alert>> {
        let closed = self.windows.take_closed();
        if closed.is_empty() {
            return Ok(Vec::new());
        }
        let mut fired = Vec::new();
        for w in &closed {
            if let Some(a) = check_spike(w, &mut self.ewma, &self.spike) {
                log::warn!(
                    "negative spike at {}: {:.3} > {:.3} (volume {})",
                    w.start,
                    a.negative_fraction,
                    a.threshold(),
                    a.volume
                );
                fired.push(a);
            }
        }
        if let Some(log) = &self.log {
            log.append_windows(&closed)?;
            log.append_alerts(&fired)?;
        }
        self.history.extend(closed);
        self.alerts.extend(fired.iter().cloned());
        Ok(fired)
    }

    pub fn window_state(&self) -> &WindowState {
        &self.windows
    }

    pub fn ewma(&self) -> &EwmaState {
        &self.ewma
    }

    /// Closed windows, oldest first.
    pub fn history(&self) -> &[WindowStats] {
        &self.history
    }

    /// The last `k` closed windows.
    pub fn recent(&self, k: usize) -> &[WindowStats] {
        &self.history[self.history.len().saturating_sub(k)..]
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn alerts_since(&self, since: DateTime<Utc>) -> Vec<Alert> {
        self.alerts
            .iter()
            .filter(|a| a.window_start >= since)
            .cloned()
            .collect()
    }

    pub fn trend(&self, k: usize) -> Result<TrendEstimate<f64>> {
        trend(self.recent(k))
    }

    pub fn aspect_summary(&self, aspect: &str, k: usize) -> Result<AspectSummary> {
        aspect_summary(self.recent(k), self.windows.aspects(), aspect)
    }
}
