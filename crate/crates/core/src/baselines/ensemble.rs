//! Soft-vote fusion of member class distributions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{lexicon_classify, nb_classify, LexiconModel, NaiveBayesModel};
use crate::corpus::Document;
use crate::engine::{classify_tokens, Classification, LanguageGate, ModelConfig, ModelParams, SentimentResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textprep::{self, Detection, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Transformer,
    NaiveBayes,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<(MemberKind, f64)>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            members: vec![
                (MemberKind::Transformer, 0.6),
                (MemberKind::NaiveBayes, 0.3),
                (MemberKind::Lexicon, 0.1),
            ],
        }
    }
}

impl EnsembleSpec {
    pub fn single(kind: MemberKind) -> Self {
        EnsembleSpec {
            members: vec![(kind, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidSpec("ensemble needs at least one member".into()));
        }
        if self.members.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpec(
                "member weights must be finite and non-negative".into(),
            ));
        }
        if self.members.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidSpec("member weights sum to zero".into()));
        }
        Ok(())
    }

    /// Weights divided by their sum.
    pub fn normalized(&self) -> Result<Vec<(MemberKind, f64)>> {
        self.validate()?;
        let total: f64 = self.members.iter().map(|(_, w)| w).sum();
        Ok(self.members.iter().map(|(k, w)| (*k, w / total)).collect())
    }

    pub fn uses(&self, kind: MemberKind) -> bool {
        self.members.iter().any(|(k, _)| *k == kind)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TransformerMember<'a, T> {
    pub params: &'a ModelParams<T>,
    pub vocab: &'a Vocabulary,
    pub config: &'a ModelConfig,
}

/// Loaded members. Members named in the spec must be present here.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleMembers<'a, T> {
    pub transformer: Option<TransformerMember<'a, T>>,
    pub naive_bayes: Option<&'a NaiveBayesModel<T>>,
    pub lexicon: Option<&'a LexiconModel>,
    pub gate: Option<&'a LanguageGate>,
}

impl<T> Default for EnsembleMembers<'_, T> {
    fn default() -> Self {
        EnsembleMembers {
            transformer: None,
            naive_bayes: None,
            lexicon: None,
            gate: None,
        }
    }
}

/// Weight-normalised convex combination of distributions.
pub fn fuse<T: Scalar>(parts: &[([T; 3], f64)]) -> Result<[T; 3]> {
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    if parts.is_empty() || parts.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) || total <= 0.0 {
        return Err(Error::InvalidSpec(
            "fusion weights must be non-negative with positive sum".into(),
        ));
    }
    let mut out = [T::zero(); 3];
    for (p, w) in parts {
        let w = T::lit(w / total);
        for (o, &x) in out.iter_mut().zip(p) {
            *o += w * x;
        }
    }
    Ok(out)
}

pub fn ensemble_classify<T: Scalar>(
    doc: &Document,
    spec: &EnsembleSpec,
    members: &EnsembleMembers<'_, T>,
) -> Result<Classification<T>> {
    let started = Instant::now();
    let weights = spec.normalized()?;
    let normalized = textprep::normalize(&doc.text);
    if normalized.is_empty() {
        return Err(Error::InvalidInput(format!(
            "document `{}` is empty after normalisation",
            doc.id
        )));
    }
    if let Some(gate) = members.gate {
        if let Detection::Unknown { best_similarity } = gate.detect(normalized.as_str()) {
            return Ok(Classification::Unclassified {
                reason: match best_similarity {
                    Some(s) => format!("unknown language (best similarity {s:.3})"),
                    None => "text too short for language detection".to_string(),
                },
                latency_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    let tokens = textprep::tokenize(&normalized);
    let missing = |k: MemberKind| Error::InvalidSpec(format!("ensemble member {k:?} is not loaded"));

    let mut transformer_out: Option<SentimentResult<T>> = None;
    let mut parts = Vec::with_capacity(weights.len());
    for (kind, w) in weights {
        let dist = match kind {
            MemberKind::Transformer => {
                let m = members.transformer.ok_or_else(|| missing(kind))?;
                let r = classify_tokens(&tokens, doc.domain, m.params, m.vocab, m.config)?;
                let d = r.sentiment;
                transformer_out = Some(r);
                d
            }
            MemberKind::NaiveBayes => nb_classify(&tokens, members.naive_bayes.ok_or_else(|| missing(kind))?),
            MemberKind::Lexicon => lexicon_classify(&tokens, members.lexicon.ok_or_else(|| missing(kind))?),
        };
        parts.push((dist, w));
    }
    let sentiment = fuse(&parts)?;
    let (aspects, domain, pooled) = match transformer_out {
        Some(r) => (r.aspects, r.domain, r.pooled),
        None => (None, None, None),
    };
    Ok(Classification::Classified(SentimentResult {
        sentiment,
        aspects,
        domain,
        pooled,
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_is_identity() {
        let p = [0.2f64, 0.3, 0.5];
        assert_eq!(fuse(&[(p, 1.0)]).unwrap(), p);
        assert_eq!(fuse(&[(p, 0.4), (p, 0.6)]).unwrap()[2], 0.5);
    }

    #[test]
    fn empty_spec_is_invalid() {
        let spec = EnsembleSpec { members: vec![] };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
        let doc = Document::new(
            "d",
            crate::corpus::Source::Review,
            crate::corpus::DomainId(0),
            chrono::Utc::now(),
            "great",
        );
        let r = ensemble_classify::<f64>(&doc, &spec, &EnsembleMembers::default());
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn missing_member_is_reported() {
        let doc = Document::new(
            "d",
            crate::corpus::Source::Review,
            crate::corpus::DomainId(0),
            chrono::Utc::now(),
            "great",
        );
        let r = ensemble_classify::<f64>(
            &doc,
            &EnsembleSpec::single(MemberKind::NaiveBayes),
            &EnsembleMembers::default(),
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }
}
