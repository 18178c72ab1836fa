//! Staged stream processing: ingest queue → classification workers →
//! resequencing sink (analytics, alerts, persistence).
//!
//! Every submitted document gets a sequence number. Workers may finish out of
//! order; the sink buffers results until the next expected number arrives, so
//! analytics always sees documents in submission order no matter how many
//! workers run. Queues are bounded and `submit` blocks when they are full.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, error, warn};
use sentiflow_core::analytics::{
    aspect_summary, trend, Alert, Analytics, AnalyticsConfig, AnalyticsLog, AspectSummary, Observation, WindowStats,
};
use sentiflow_core::corpus::{load_documents, AspectSet, Document, DocumentStore};
use sentiflow_core::{Classification, SentimentResult, TrendEstimate};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{ServiceError, ServiceResult};
use crate::models::Models;

/// Pending documents are written to the store in batches of at most this size.
const STORE_BATCH: usize = 256;

pub type AlertHook = Arc<dyn Fn(&Alert) + Send + Sync>;

#[derive(Clone)]
pub struct PipelineOptions {
    pub workers: usize,
    pub queue_capacity: usize,
    pub analytics: AnalyticsConfig,
    pub aspects: AspectSet,
    /// Append accepted documents here.
    pub store: Option<std::path::PathBuf>,
    /// Write closed windows and alerts here.
    pub analytics_log: Option<AnalyticsLog>,
    pub on_alert: Option<AlertHook>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            workers: 1,
            queue_capacity: 1024,
            analytics: AnalyticsConfig::default(),
            aspects: AspectSet::default(),
            store: None,
            analytics_log: None,
            on_alert: None,
        }
    }
}

impl PipelineOptions {
    pub fn from_config(config: &PipelineConfig) -> ServiceResult<Self> {
        let (store, analytics_log) = if config.store.enabled {
            (
                Some(config.store.documents.clone()),
                Some(AnalyticsLog::in_dir(&config.store.analytics_dir)),
            )
        } else {
            (None, None)
        };
        Ok(PipelineOptions {
            workers: config.workers(),
            queue_capacity: config.service.queue_capacity,
            analytics: config.analytics.to_config(),
            aspects: config.aspect_set()?,
            store,
            analytics_log,
            on_alert: None,
        })
    }
}

/// Document accounting. `ingested = classified + unclassified + rejected + in_flight`
/// holds whenever the counters are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub ingested: u64,
    pub classified: u64,
    pub unclassified: u64,
    pub rejected: u64,
    pub in_flight: u64,
    /// Documents that arrived after their window closed (they are still
    /// counted as classified or unclassified).
    pub late: u64,
    pub alerts: u64,
    /// Submission to sink, averaged over classified and unclassified documents.
    pub mean_latency_ms: f64,
    pub uptime_s: f64,
    pub workers: usize,
}

impl PipelineStats {
    pub fn conserved(&self) -> bool {
        self.ingested == self.classified + self.unclassified + self.rejected + self.in_flight
    }
}

/// Response of a submission: how many documents entered the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admission {
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Closed windows followed by still-open ones, oldest first.
    pub windows: Vec<WindowStats>,
    pub open_windows: usize,
    pub trend: Option<TrendEstimate>,
    pub aspects: Vec<AspectSummary>,
}

#[derive(Debug, Default)]
struct Counters {
    next_seq: u64,
    ingested: u64,
    classified: u64,
    unclassified: u64,
    rejected: u64,
    alerts: u64,
    latency_sum_ms: f64,
    /// Finished documents still waiting to be written to the store.
    unflushed: u64,
}

impl Counters {
    fn finished(&self) -> u64 {
        self.classified + self.unclassified + self.rejected
    }
}

struct Shared {
    counters: Mutex<Counters>,
    quiescent: Condvar,
    analytics: Mutex<Analytics>,
    /// Ids seen so far; only tracked when documents are persisted.
    seen: Option<Mutex<HashSet<String>>>,
    started: Instant,
    workers: usize,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

struct Job {
    seq: u64,
    doc: Document,
    submitted: Instant,
}

enum Outcome {
    Classified(SentimentResult),
    Unclassified,
    Rejected,
}

struct Done {
    seq: u64,
    doc: Document,
    submitted: Instant,
    outcome: Outcome,
}

pub struct Pipeline {
    models: Arc<Models>,
    shared: Arc<Shared>,
    ingest: Mutex<Option<Sender<Job>>>,
    threads: Mutex<Vec<(&'static str, JoinHandle<()>)>>,
}

impl Pipeline {
    pub fn start(models: Arc<Models>, options: PipelineOptions) -> ServiceResult<Self> {
        let workers = options.workers.max(1);
        let capacity = options.queue_capacity.max(1);
        let mut analytics = Analytics::new(options.analytics, options.aspects.clone())?;
        if let Some(log) = options.analytics_log.clone() {
            std::fs::create_dir_all(log.windows.parent().unwrap_or(std::path::Path::new(".")))
                .map_err(|e| ServiceError::io(&log.windows, e))?;
            analytics = analytics.with_log(log);
        }
        let (store, seen) = match &options.store {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
                }
                let seen: HashSet<String> = match load_documents(path) {
                    Ok(report) => report.documents.into_iter().map(|d| d.id).collect(),
                    Err(sentiflow_core::Error::EmptyCorpus(..)) => HashSet::new(),
                    Err(sentiflow_core::Error::Io { .. }) if !path.exists() => HashSet::new(),
                    Err(e) => return Err(e.into()),
                };
                (Some(DocumentStore::open(path)?), Some(Mutex::new(seen)))
            }
            None => (None, None),
        };

        let shared = Arc::new(Shared {
            counters: Mutex::new(Counters::default()),
            quiescent: Condvar::new(),
            analytics: Mutex::new(analytics),
            seen,
            started: Instant::now(),
            workers,
        });
        let (job_tx, job_rx) = bounded::<Job>(capacity);
        let (done_tx, done_rx) = bounded::<Done>(capacity);
        let mut threads = Vec::with_capacity(workers + 1);
        for i in 0..workers {
            let rx = job_rx.clone();
            let tx = done_tx.clone();
            let models = Arc::clone(&models);
            let handle = std::thread::Builder::new()
                .name(format!("classify-{i}"))
                .spawn(move || classify_stage(&models, rx, tx))
                .map_err(|e| ServiceError::io("<thread>", e))?;
            threads.push(("classification worker", handle));
        }
        drop(done_tx);
        let sink_shared = Arc::clone(&shared);
        let on_alert = options.on_alert.clone();
        let sink = std::thread::Builder::new()
            .name("sink".into())
            .spawn(move || sink_stage(&sink_shared, done_rx, store, on_alert))
            .map_err(|e| ServiceError::io("<thread>", e))?;
        threads.push(("sink", sink));

        Ok(Pipeline {
            models,
            shared,
            ingest: Mutex::new(Some(job_tx)),
            threads: Mutex::new(threads),
        })
    }

    /// Loads the models named in `config` and starts the stages.
    pub fn from_config(config: &PipelineConfig) -> ServiceResult<Self> {
        let models = Arc::new(Models::load(config)?);
        Self::start(models, PipelineOptions::from_config(config)?)
    }

    pub fn models(&self) -> &Arc<Models> {
        &self.models
    }

    /// Queues one document, blocking while the ingest queue is full. Documents
    /// with an empty id, or an id already seen by the store, are rejected here.
    pub fn submit(&self, doc: Document) -> ServiceResult<bool> {
        let sender = lock(&self.ingest).clone().ok_or(ServiceError::Closed)?;
        let duplicate = doc.id.is_empty()
            || self
                .shared
                .seen
                .as_ref()
                .is_some_and(|seen| !lock(seen).insert(doc.id.clone()));
        let seq = {
            let mut c = lock(&self.shared.counters);
            c.ingested += 1;
            if duplicate {
                c.rejected += 1;
                drop(c);
                warn!("rejected document `{}`: empty or duplicate id", doc.id);
                self.shared.quiescent.notify_all();
                return Ok(false);
            }
            let seq = c.next_seq;
            c.next_seq += 1;
            seq
        };
        let job = Job {
            seq,
            doc,
            submitted: Instant::now(),
        };
        sender.send(job).map_err(|_| ServiceError::Closed)?;
        Ok(true)
    }

    /// Counts a payload that could not even be parsed as a document.
    pub fn record_malformed(&self) {
        let mut c = lock(&self.shared.counters);
        c.ingested += 1;
        c.rejected += 1;
    }

    pub fn submit_all<I: IntoIterator<Item = Document>>(&self, docs: I) -> ServiceResult<Admission> {
        let mut out = Admission::default();
        for d in docs {
            if self.submit(d)? {
                out.accepted += 1;
            } else {
                out.rejected += 1;
            }
        }
        Ok(out)
    }

    /// Blocks until every submitted document has been processed and persisted,
    /// or until `timeout` passes. Returns whether the pipeline went quiet.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut c = lock(&self.shared.counters);
        loop {
            if c.finished() == c.ingested && c.unflushed == 0 {
                return true;
            }
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            c = self
                .shared
                .quiescent
                .wait_timeout(c, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    pub fn stats(&self) -> PipelineStats {
        let late = lock(&self.shared.analytics).window_state().late();
        let c = lock(&self.shared.counters);
        let delivered = c.classified + c.unclassified;
        PipelineStats {
            ingested: c.ingested,
            classified: c.classified,
            unclassified: c.unclassified,
            rejected: c.rejected,
            in_flight: c.ingested - c.finished(),
            late,
            alerts: c.alerts,
            mean_latency_ms: if delivered == 0 {
                0.0
            } else {
                c.latency_sum_ms / delivered as f64
            },
            uptime_s: self.shared.started.elapsed().as_secs_f64(),
            workers: self.shared.workers,
        }
    }

    /// The last `k` windows, including ones still open, with trend and
    /// per-aspect summaries over the same span.
    pub fn summary(&self, k: usize) -> Summary {
        let a = lock(&self.shared.analytics);
        let mut windows: Vec<WindowStats> = a.history().to_vec();
        let open: Vec<WindowStats> = a.window_state().open_windows().cloned().collect();
        let open_count = open.len();
        windows.extend(open);
        let windows = windows.split_off(windows.len().saturating_sub(k));
        let aspects = a.window_state().aspects().clone();
        let summaries = aspects
            .names()
            .iter()
            .filter_map(|n| aspect_summary(&windows, &aspects, n).ok())
            .collect();
        Summary {
            trend: trend(&windows).ok(),
            open_windows: open_count.min(windows.len()),
            aspects: summaries,
            windows,
        }
    }

    pub fn alerts_since(&self, since: Option<chrono::DateTime<chrono::Utc>>) -> Vec<Alert> {
        let a = lock(&self.shared.analytics);
        match since {
            Some(ts) => a.alerts_since(ts),
            None => a.alerts().to_vec(),
        }
    }

    /// Runs `f` against the analytics state.
    pub fn with_analytics<R>(&self, f: impl FnOnce(&Analytics) -> R) -> R {
        f(&lock(&self.shared.analytics))
    }

    /// Stops intake, drains every stage, closes all windows and flushes the
    /// store. Safe to call more than once.
    pub fn shutdown(&self) -> ServiceResult<PipelineStats> {
        drop(lock(&self.ingest).take());
        let threads = std::mem::take(&mut *lock(&self.threads));
        let mut failure = None;
        for (name, t) in threads {
            if t.join().is_err() {
                error!("{name} thread panicked");
                failure = Some(ServiceError::StagePanic(name));
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(self.stats()),
        }
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        if !lock(&self.threads).is_empty() {
            if let Err(e) = self.shutdown() {
                error!("pipeline shutdown: {e}");
            }
        }
    }
}

fn classify_stage(models: &Models, rx: Receiver<Job>, tx: Sender<Done>) {
    for job in rx {
        let outcome = match models.classify(&job.doc) {
            Ok(Classification::Classified(r)) => Outcome::Classified(r),
            Ok(Classification::Unclassified { reason, .. }) => {
                debug!("document `{}` unclassified: {reason}", job.doc.id);
                Outcome::Unclassified
            }
            Err(e) => {
                warn!("rejected document `{}`: {e}", job.doc.id);
                Outcome::Rejected
            }
        };
        let done = Done {
            seq: job.seq,
            doc: job.doc,
            submitted: job.submitted,
            outcome,
        };
        if tx.send(done).is_err() {
            break;
        }
    }
}

fn sink_stage(shared: &Shared, rx: Receiver<Done>, mut store: Option<DocumentStore>, on_alert: Option<AlertHook>) {
    let mut pending: BTreeMap<u64, Done> = BTreeMap::new();
    let mut next = 0u64;
    let mut to_store: Vec<Document> = Vec::new();

    let flush_store = |batch: &mut Vec<Document>, store: &mut Option<DocumentStore>| {
        if batch.is_empty() {
            return;
        }
        if let Some(s) = store.as_mut() {
            if let Err(e) = s.append(batch) {
                error!("could not persist {} documents: {e}", batch.len());
            }
        }
        let n = batch.len() as u64;
        batch.clear();
        lock(&shared.counters).unflushed -= n;
        shared.quiescent.notify_all();
    };

    loop {
        let msg = match rx.recv_timeout(Duration::from_millis(50)) {
            Ok(done) => Some(done),
            Err(RecvTimeoutError::Timeout) => None,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        if let Some(done) = msg {
            pending.insert(done.seq, done);
        }
        while let Some(done) = pending.remove(&next) {
            next += 1;
            deliver(shared, done, store.is_some(), &mut to_store, on_alert.as_ref());
        }
        if to_store.len() >= STORE_BATCH || (rx.is_empty() && !to_store.is_empty()) {
            flush_store(&mut to_store, &mut store);
        }
    }

    // Intake is closed and every worker has exited, so nothing else can arrive.
    if !pending.is_empty() {
        error!(
            "{} results lost a predecessor and are delivered out of order",
            pending.len()
        );
        for (_, done) in std::mem::take(&mut pending) {
            deliver(shared, done, store.is_some(), &mut to_store, on_alert.as_ref());
        }
    }
    flush_store(&mut to_store, &mut store);
    let fired = lock(&shared.analytics).flush();
    match fired {
        Ok(alerts) => record_alerts(shared, &alerts, on_alert.as_ref()),
        Err(e) => error!("flushing analytics: {e}"),
    }
    shared.quiescent.notify_all();
}

fn deliver(shared: &Shared, done: Done, persist: bool, to_store: &mut Vec<Document>, on_alert: Option<&AlertHook>) {
    let latency = done.submitted.elapsed().as_secs_f64() * 1e3;
    let obs = match &done.outcome {
        Outcome::Classified(r) => Some(Observation::from_classification(
            done.doc.timestamp,
            &Classification::Classified(r.clone()),
        )),
        Outcome::Unclassified => Some(Observation {
            timestamp: done.doc.timestamp,
            sentiment: None,
            aspects: None,
        }),
        Outcome::Rejected => None,
    };
    let fired = obs.map(|o| lock(&shared.analytics).ingest(&o));
    {
        let mut c = lock(&shared.counters);
        match done.outcome {
            Outcome::Classified(_) => c.classified += 1,
            Outcome::Unclassified => c.unclassified += 1,
            Outcome::Rejected => c.rejected += 1,
        }
        if is_delivered(&done.outcome) {
            c.latency_sum_ms += latency;
            if persist {
                c.unflushed += 1;
            }
        }
    }
    if persist && is_delivered(&done.outcome) {
        to_store.push(done.doc);
    }
    match fired {
        Some(Ok(alerts)) => record_alerts(shared, &alerts, on_alert),
        Some(Err(e)) => error!("analytics: {e}"),
        None => {}
    }
    shared.quiescent.notify_all();
}

fn is_delivered(outcome: &Outcome) -> bool {
    !matches!(outcome, Outcome::Rejected)
}

fn record_alerts(shared: &Shared, alerts: &[Alert], on_alert: Option<&AlertHook>) {
    if alerts.is_empty() {
        return;
    }
    lock(&shared.counters).alerts += alerts.len() as u64;
    if let Some(hook) = on_alert {
        alerts.iter().for_each(|a| hook(a));
    }
}

/// Result of pushing a finite stream through a fresh pipeline.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub stats: PipelineStats,
    pub alerts: Vec<Alert>,
    pub windows: Vec<WindowStats>,
    pub elapsed: Duration,
}

/// Starts a pipeline, feeds it `docs`, shuts it down and reports.
pub fn run_pipeline<I>(models: Arc<Models>, options: PipelineOptions, docs: I) -> ServiceResult<RunReport>
where
    I: IntoIterator<Item = Document>,
{
    let started = Instant::now();
    let pipeline = Pipeline::start(models, options)?;
    pipeline.submit_all(docs)?;
    let stats = pipeline.shutdown()?;
    let (alerts, windows) = pipeline.with_analytics(|a| (a.alerts().to_vec(), a.history().to_vec()));
    Ok(RunReport {
        stats,
        alerts,
        windows,
        elapsed: started.elapsed(),
    })
}
