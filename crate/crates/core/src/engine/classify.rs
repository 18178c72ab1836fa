use std::time::Instant;

use super::{forward, to_array, Classification, EncodedBatch, ModelConfig, ModelParams, SentimentResult};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textprep::{self, detect_language, Detection, LanguageProfile, Vocabulary};

/// Language routing policy: text whose best profile similarity falls below
/// `threshold` is left unclassified.
#[derive(Debug, Clone)]
pub struct LanguageGate {
    pub profiles: Vec<LanguageProfile>,
    pub threshold: f64,
}

impl LanguageGate {
    pub fn english(threshold: f64) -> Self {
        LanguageGate {
            profiles: vec![LanguageProfile::english()],
            threshold,
        }
    }

    pub fn detect(&self, normalized: &str) -> Detection {
        detect_language(normalized, &self.profiles, self.threshold)
    }
}

/// normalize -> (language gate) -> tokenize -> encode -> forward, timed end to end.
pub fn classify<T: Scalar>(
    doc: &Document,
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    config: &ModelConfig,
    gate: Option<&LanguageGate>,
) -> Result<Classification<T>> {
    let started = Instant::now();
    let normalized = textprep::normalize(&doc.text);
    if normalized.is_empty() {
        return Err(Error::InvalidInput(format!(
            "document `{}` is empty after normalisation",
            doc.id
        )));
    }
    if let Some(gate) = gate {
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
    let mut result = classify_tokens(&textprep::tokenize(&normalized), doc.domain, params, vocab, config)?;
    result.latency_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(Classification::Classified(result))
}

/// Forward pass over already normalised tokens (latency covers only this call).
pub fn classify_tokens<T: Scalar>(
    tokens: &[String],
    domain: crate::corpus::DomainId,
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<SentimentResult<T>> {
    let started = Instant::now();
    let ids = vocab.encode(tokens, config.max_len);
    let batch = EncodedBatch::new(vec![ids], vec![domain], None)?;
    batch.validate(config)?;
    let cache = forward::forward_row(params, config, &batch.ids[0], batch.lengths[0], domain.0);
    Ok(SentimentResult {
        sentiment: to_array(cache.sentiment_probs()),
        aspects: Some(cache.aspect_probs().into_iter().map(to_array).collect()),
        domain: Some(cache.domain_probs()),
        pooled: Some(cache.pooled),
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
