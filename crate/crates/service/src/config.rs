//! Service configuration, read from a sectioned TOML file.
//!
//! ```toml
//! [model]
//! checkpoint = "model/model.ckpt"
//! vocabulary = "model/vocab.tsv"
//! naive_bayes = "model/naive_bayes.json"
//!
//! [ensemble]
//! transformer = 0.6
//! naive_bayes = 0.3
//! lexicon = 0.1
//!
//! [language]
//! threshold = 0.3
//! profiles = ["model/language.tsv"]
//!
//! [analytics]
//! window_ms = 60000
//! multiplier = 3.0
//!
//! [domains]
//! electronics = 0
//! kitchen = 1
//! ```
//!
//! Every key except the model paths has a default. The model paths are only
//! required when a member that needs them has a positive weight.

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use sentiflow_core::analytics::{AnalyticsConfig, SpikeConfig, WindowConfig};
use sentiflow_core::baselines::{EnsembleSpec, LexiconModel, MemberKind};
use sentiflow_core::corpus::{AspectSet, DomainId};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelPaths,
    pub ensemble: EnsembleWeights,
    pub language: LanguageSection,
    pub analytics: AnalyticsSection,
    pub aspects: AspectsSection,
    /// Domain name to id.
    pub domains: BTreeMap<String, usize>,
    pub service: ServiceSection,
    pub store: StoreSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub checkpoint: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
    pub naive_bayes: Option<PathBuf>,
    /// Extra `term<TAB>weight` entries merged over the built-in lexicon.
    pub lexicon: Option<PathBuf>,
    pub lexicon_neutral_band: f64,
}

impl Default for ModelPaths {
    fn default() -> Self {
        ModelPaths {
            checkpoint: None,
            vocabulary: None,
            naive_bayes: None,
            lexicon: None,
            lexicon_neutral_band: LexiconModel::default().neutral_band(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleWeights {
    pub transformer: f64,
    pub naive_bayes: f64,
    pub lexicon: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        let d = EnsembleSpec::default();
        let w = |k| d.members.iter().find(|(m, _)| *m == k).map_or(0.0, |(_, w)| *w);
        EnsembleWeights {
            transformer: w(MemberKind::Transformer),
            naive_bayes: w(MemberKind::NaiveBayes),
            lexicon: w(MemberKind::Lexicon),
        }
    }
}

impl EnsembleWeights {
    /// Members with a positive weight, in fixed order.
    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            members: [
                (MemberKind::Transformer, self.transformer),
                (MemberKind::NaiveBayes, self.naive_bayes),
                (MemberKind::Lexicon, self.lexicon),
            ]
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageSection {
    pub enabled: bool,
    pub threshold: f64,
    /// Profiles checked in addition to the bundled English one.
    pub profiles: Vec<PathBuf>,
}

impl Default for LanguageSection {
    fn default() -> Self {
        LanguageSection {
            enabled: true,
            threshold: 0.3,
            profiles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsSection {
    pub window_ms: i64,
    pub lateness: i64,
    pub lambda: f64,
    pub multiplier: f64,
    pub volume_floor: u64,
    pub warmup: usize,
}

impl Default for AnalyticsSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        let s = SpikeConfig::default();
        AnalyticsSection {
            window_ms: w.duration_ms,
            lateness: w.lateness,
            lambda: s.lambda,
            multiplier: s.multiplier,
            volume_floor: s.volume_floor,
            warmup: s.warmup,
        }
    }
}

impl AnalyticsSection {
    pub fn to_config(&self) -> AnalyticsConfig {
        AnalyticsConfig {
            window: WindowConfig {
                duration_ms: self.window_ms,
                lateness: self.lateness,
            },
            spike: SpikeConfig {
                lambda: self.lambda,
                multiplier: self.multiplier,
                volume_floor: self.volume_floor,
                warmup: self.warmup,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AspectsSection {
    pub names: Vec<String>,
}

impl Default for AspectsSection {
    fn default() -> Self {
        AspectsSection {
            names: AspectSet::default().names().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    /// Classification workers; 0 means one per available core.
    pub workers: usize,
    pub queue_capacity: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            bind: "127.0.0.1:8080".into(),
            workers: 0,
            queue_capacity: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    /// When false nothing is written to disk.
    pub enabled: bool,
    /// Append-only log of every accepted document.
    pub documents: PathBuf,
    /// Directory for `windows.jsonl` and `alerts.jsonl`.
    pub analytics_dir: PathBuf,
}

impl Default for StoreSection {
    fn default() -> Self {
        StoreSection {
            enabled: true,
            documents: PathBuf::from("data/documents.jsonl"),
            analytics_dir: PathBuf::from("data/analytics"),
        }
    }
}

impl PipelineConfig {
    /// Parses and validates. Relative paths are resolved against the directory
    /// holding the file.
    pub fn load(path: impl AsRef<Path>) -> ServiceResult<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut config = Self::from_toml(&raw)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    /// Parses without validating, so callers can adjust fields first.
    pub fn from_toml(raw: &str) -> ServiceResult<Self> {
        toml::from_str(raw).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let m = &mut self.model;
        for p in [&mut m.checkpoint, &mut m.vocabulary, &mut m.naive_bayes, &mut m.lexicon]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.language.profiles.iter_mut().for_each(fix);
        fix(&mut self.store.documents);
        fix(&mut self.store.analytics_dir);
    }

    pub fn validate(&self) -> ServiceResult<()> {
        let bad = |m: String| Err(ServiceError::Config(m));
        let spec = self.ensemble.spec();
        spec.validate().map_err(|e| ServiceError::Config(e.to_string()))?;

        let m = &self.model;
        let mut needed = Vec::new();
        if spec.uses(MemberKind::Transformer) {
            needed.extend([("model.checkpoint", &m.checkpoint), ("model.vocabulary", &m.vocabulary)]);
        }
        if spec.uses(MemberKind::NaiveBayes) {
            needed.push(("model.naive_bayes", &m.naive_bayes));
        }
        if let Some((key, _)) = needed.iter().find(|(_, p)| p.is_none()) {
            return bad(format!("{key} is required by the configured ensemble"));
        }
        let referenced = [
            ("model.checkpoint", &m.checkpoint),
            ("model.vocabulary", &m.vocabulary),
            ("model.naive_bayes", &m.naive_bayes),
            ("model.lexicon", &m.lexicon),
        ];
        for (key, p) in referenced {
            if let Some(p) = p.as_ref().filter(|p| !p.exists()) {
                return bad(format!("{key}: {} does not exist", p.display()));
            }
        }
        for p in &self.language.profiles {
            if !p.exists() {
                return bad(format!("language.profiles: {} does not exist", p.display()));
            }
        }
        if !(self.model.lexicon_neutral_band >= 0.0 && self.model.lexicon_neutral_band.is_finite()) {
            return bad("model.lexicon_neutral_band must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.language.threshold) {
            return bad("language.threshold must lie in [0, 1]".into());
        }
        self.aspect_set()?;
        let mut ids = HashSet::new();
        for (name, id) in &self.domains {
            if !ids.insert(id) {
                return bad(format!("domain id {id} is mapped more than once (at `{name}`)"));
            }
        }
        self.analytics
            .to_config()
            .window
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let a = &self.analytics;
        if !(a.lambda > 0.0 && a.lambda <= 1.0) {
            return bad("analytics.lambda must lie in (0, 1]".into());
        }
        if !(a.multiplier >= 0.0 && a.multiplier.is_finite()) {
            return bad("analytics.multiplier must be finite and >= 0".into());
        }
        self.bind_addr()?;
        if self.service.queue_capacity == 0 {
            return bad("service.queue_capacity must be >= 1".into());
        }
        Ok(())
    }

    pub fn aspect_set(&self) -> ServiceResult<AspectSet> {
        AspectSet::new(self.aspects.names.iter().cloned()).map_err(|e| ServiceError::Config(format!("aspects: {e}")))
    }

    pub fn bind_addr(&self) -> ServiceResult<SocketAddr> {
        self.service
            .bind
            .parse()
            .map_err(|_| ServiceError::Config(format!("service.bind `{}` is not host:port", self.service.bind)))
    }

    pub fn workers(&self) -> usize {
        match self.service.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }

    /// Resolves a domain given by name or numeric id.
    pub fn domain(&self, raw: &str) -> Option<DomainId> {
        self.domains
            .get(raw)
            .copied()
            .or_else(|| raw.parse().ok())
            .map(DomainId)
    }

    pub fn domain_name(&self, id: DomainId) -> Option<&str> {
        self.domains.iter().find(|(_, v)| **v == id.0).map(|(k, _)| k.as_str())
    }
}
