//! Feedback documents, their line-delimited interchange format, an append-only
//! store and the synthetic corpus generator used for training and tests.

mod generator;
mod store;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::textprep;

pub use generator::{
    generate_synthetic_corpus, AspectLexicon, GeneratorSpec, NEGATIVE_TERMS, NEUTRAL_TERMS, POSITIVE_TERMS,
};
pub use store::{load_documents, store_documents, DocumentStore, LoadReport};

/// Deployment-assigned category id (product vertical, platform, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub usize);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "review")]
    Review,
    #[serde(rename = "service")]
    ServiceInteraction,
    #[serde(rename = "social")]
    SocialComment,
}

/// Three-way document polarity. The discriminant is the class index used by
/// every model head and metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sentiment {
    #[serde(rename = "neg")]
    Negative = 0,
    #[serde(rename = "neu")]
    Neutral = 1,
    #[serde(rename = "pos")]
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Negative -> -1, Neutral -> 0, Positive -> +1.
    pub fn polarity(self) -> f64 {
        self.index() as f64 - 1.0
    }

    pub fn code(self) -> &'static str {
        match self {
            Sentiment::Negative => "neg",
            Sentiment::Neutral => "neu",
            Sentiment::Positive => "pos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AspectLabel {
    #[serde(rename = "neg")]
    Negative = 0,
    #[serde(rename = "neu")]
    Neutral = 1,
    #[serde(rename = "pos")]
    Positive = 2,
    #[serde(rename = "none")]
    NotMentioned = 3,
}

impl AspectLabel {
    pub const ALL: [AspectLabel; 4] = [
        AspectLabel::Negative,
        AspectLabel::Neutral,
        AspectLabel::Positive,
        AspectLabel::NotMentioned,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The polarity of a mentioned aspect, `None` for NotMentioned.
    pub fn polarity(self) -> Option<f64> {
        match self {
            AspectLabel::NotMentioned => None,
            other => Some(other.index() as f64 - 1.0),
        }
    }
}

impl From<Sentiment> for AspectLabel {
    fn from(s: Sentiment) -> Self {
        match s {
            Sentiment::Negative => AspectLabel::Negative,
            Sentiment::Neutral => AspectLabel::Neutral,
            Sentiment::Positive => AspectLabel::Positive,
        }
    }
}

/// Ordered set of aspect names; position in the set is the aspect id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AspectSet(Vec<String>);

impl AspectSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidInput("aspect set must not be empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || names[..i].contains(n) {
                return Err(Error::InvalidInput(format!("bad or duplicate aspect name `{n}`")));
            }
        }
        Ok(AspectSet(names))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }
}

impl Default for AspectSet {
    /// Product Quality, Price, User Experience.
    fn default() -> Self {
        AspectSet(vec![
            "product_quality".to_string(),
            "price".to_string(),
            "user_experience".to_string(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub sentiment: Sentiment,
    pub aspects: BTreeMap<String, AspectLabel>,
}

impl GoldLabels {
    /// Every configured aspect must have exactly one entry and no others.
    pub fn validate(&self, aspects: &AspectSet) -> Result<()> {
        if self.aspects.len() != aspects.len() {
            return Err(Error::InvalidInput(format!(
                "gold labels carry {} aspects, expected {}",
                self.aspects.len(),
                aspects.len()
            )));
        }
        for key in self.aspects.keys() {
            if aspects.id_of(key).is_none() {
                return Err(Error::InvalidAspect(key.clone()));
            }
        }
        Ok(())
    }

    /// Aspect labels in aspect-set order. Missing entries read as NotMentioned.
    pub fn aspect_vector(&self, aspects: &AspectSet) -> Vec<AspectLabel> {
        aspects
            .names()
            .iter()
            .map(|n| self.aspects.get(n).copied().unwrap_or(AspectLabel::NotMentioned))
            .collect()
    }
}

/// One unit of customer feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub domain: DomainId,
    #[serde(rename = "ts", serialize_with = "ser_ts", deserialize_with = "de_ts")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "de_rating")]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldLabels>,
    /// Fields this version does not know about, kept for round-tripping.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        source: Source,
        domain: DomainId,
        timestamp: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Self {
        Document {
            id: id.into(),
            source,
            domain,
            timestamp,
            text: text.into(),
            rating: None,
            gold: None,
            extra: serde_json::Map::new(),
        }
    }

    /// Parses one interchange line.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(line)?;
        if doc.id.is_empty() {
            return Err(Error::InvalidInput("empty document id".into()));
        }
        Ok(doc)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("document serialisation cannot fail")
    }

    pub fn timestamp_millis(&self) -> i64 {
        self.timestamp.timestamp_millis()
    }
}

pub(crate) fn ser_ts<S: Serializer>(ts: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_timestamp(ts))
}

pub(crate) fn de_ts<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    parse_timestamp(&raw).map_err(serde::de::Error::custom)
}

fn de_rating<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<u8>, D::Error> {
    let r = Option::<u8>::deserialize(d)?;
    match r {
        Some(v) if !(1..=5).contains(&v) => Err(serde::de::Error::custom(format!("rating {v} outside 1..=5"))),
        other => Ok(other),
    }
}

/// ISO-8601 UTC with millisecond precision, e.g. `2024-03-01T12:00:00.250Z`.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Parses an RFC 3339 instant and truncates it to milliseconds.
pub fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    let parsed = DateTime::parse_from_rfc3339(raw).map_err(|e| format!("bad timestamp `{raw}`: {e}"))?;
    let ms = parsed.timestamp_millis();
    DateTime::<Utc>::from_timestamp_millis(ms).ok_or_else(|| format!("timestamp out of range `{raw}`"))
}

/// Corpus statistics in the shape of a dataset summary table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub documents: usize,
    pub negative: usize,
    pub neutral: usize,
    pub positive: usize,
    pub unlabeled: usize,
    pub per_domain: BTreeMap<DomainId, usize>,
    pub avg_tokens: f64,
}

impl CorpusManifest {
    pub fn class_count(&self, s: Sentiment) -> usize {
        match s {
            Sentiment::Negative => self.negative,
            Sentiment::Neutral => self.neutral,
            Sentiment::Positive => self.positive,
        }
    }
}

pub fn manifest(docs: &[Document]) -> CorpusManifest {
    let mut m = CorpusManifest {
        documents: docs.len(),
        ..Default::default()
    };
    let mut tokens = 0usize;
    for d in docs {
        match d.gold.as_ref().map(|g| g.sentiment) {
            Some(Sentiment::Negative) => m.negative += 1,
            Some(Sentiment::Neutral) => m.neutral += 1,
            Some(Sentiment::Positive) => m.positive += 1,
            None => m.unlabeled += 1,
        }
        *m.per_domain.entry(d.domain).or_default() += 1;
        tokens += textprep::tokenize(&textprep::normalize(&d.text)).len();
    }
    if !docs.is_empty() {
        m.avg_tokens = tokens as f64 / docs.len() as f64;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, s: Option<Sentiment>) -> Document {
        let mut d = Document::new(
            id,
            Source::Review,
            DomainId(0),
            parse_timestamp("2024-01-01T00:00:00Z").unwrap(),
            "fine product",
        );
        d.gold = s.map(|sentiment| GoldLabels {
            sentiment,
            aspects: BTreeMap::new(),
        });
        d
    }

    #[test]
    fn empty_manifest_is_zero() {
        assert_eq!(manifest(&[]), CorpusManifest::default());
    }

    #[test]
    fn manifest_counts_classes() {
        let docs = vec![
            doc("a", Some(Sentiment::Positive)),
            doc("b", Some(Sentiment::Positive)),
            doc("c", Some(Sentiment::Negative)),
        ];
        let m = manifest(&docs);
        assert_eq!((m.positive, m.negative, m.neutral), (2, 1, 0));
        assert_eq!(m.avg_tokens, 2.0);
    }

    #[test]
    fn interchange_line_shape() {
        let mut d = doc("x1", Some(Sentiment::Negative));
        d.gold
            .as_mut()
            .unwrap()
            .aspects
            .insert("price".into(), AspectLabel::NotMentioned);
        d.rating = Some(2);
        let line = d.to_json_line();
        assert_eq!(
            line,
            r#"{"id":"x1","source":"review","domain":0,"ts":"2024-01-01T00:00:00.000Z","text":"fine product","rating":2,"gold":{"sentiment":"neg","aspects":{"price":"none"}}}"#
        );
        assert_eq!(Document::from_json_line(&line).unwrap(), d);
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let line = r#"{"id":"q","source":"social","domain":3,"ts":"2024-05-05T10:00:00.123Z","text":"hi","channel":"app","meta":{"k":[1,2]}}"#;
        let d = Document::from_json_line(line).unwrap();
        assert_eq!(d.extra.len(), 2);
        let back = Document::from_json_line(&d.to_json_line()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_out_of_range_rating_and_empty_id() {
        let bad = r#"{"id":"q","source":"review","domain":0,"ts":"2024-05-05T10:00:00Z","text":"x","rating":9}"#;
        assert!(Document::from_json_line(bad).is_err());
        let bad = r#"{"id":"","source":"review","domain":0,"ts":"2024-05-05T10:00:00Z","text":"x"}"#;
        assert!(Document::from_json_line(bad).is_err());
    }

    #[test]
    fn gold_validation() {
        let set = AspectSet::default();
        let mut g = GoldLabels {
            sentiment: Sentiment::Neutral,
            aspects: set
                .names()
                .iter()
                .map(|n| (n.clone(), AspectLabel::NotMentioned))
                .collect(),
        };
        assert!(g.validate(&set).is_ok());
        g.aspects.insert("shipping".into(), AspectLabel::Positive);
        assert!(g.validate(&set).is_err());
        g.aspects.remove("shipping");
        g.aspects.remove("price");
        assert!(g.validate(&set).is_err());
    }
}
