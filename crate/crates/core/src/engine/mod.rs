//! Mini transformer encoder with domain conditioning.
//!
//! Hidden states are `H = Encoder(X) + E_dom[domain]`, where the encoder's
//! attention uses `softmax(QKᵀ/√d_k + M)·V` and `M` combines the padding mask
//! with a learned per-domain, per-head relative-position bias. Three heads read
//! the mean-pooled `H`: document sentiment (3 classes), one 4-class head per
//! aspect and a domain classifier. Training minimises
//! `α·L_sentiment + β·L_aspect + γ·L_domain` with Adam.

mod attention;
mod backward;
mod checkpoint;
mod classify;
mod forward;
mod matrix;
mod params;
mod train;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{AspectLabel, AspectSet, Document, DomainId, Sentiment};
use crate::error::{Error, Result};
use crate::scalar::{argmax, softmax, Scalar};
use crate::textprep::{self, Vocabulary, PAD_ID};

pub use attention::{attention, attention_weights, build_mask, relative_bucket};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use classify::{classify, classify_tokens, LanguageGate};
pub use matrix::{dot, Matrix};
pub use params::{count_params, LayerParams, ModelConfig, ModelParams};
pub use train::{train, train_from, TrainSpec, TrainedModel};

/// Gold targets of one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Targets {
    pub sentiment: Sentiment,
    pub aspects: Vec<AspectLabel>,
}

/// Padded token ids plus per-row lengths and domains: the model input `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    /// Every row has exactly `width` entries; positions `>= length` are `<pad>`.
    pub ids: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
    pub domains: Vec<DomainId>,
    pub width: usize,
    pub targets: Option<Vec<Targets>>,
}

impl EncodedBatch {
    /// Pads rows to the longest one.
    pub fn new(rows: Vec<Vec<usize>>, domains: Vec<DomainId>, targets: Option<Vec<Targets>>) -> Result<Self> {
        if rows.len() != domains.len() || targets.as_ref().is_some_and(|t| t.len() != rows.len()) {
            return Err(Error::InvalidBatch("rows, domains and targets differ in length".into()));
        }
        if rows.iter().any(Vec::is_empty) {
            return Err(Error::InvalidBatch("empty row".into()));
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let lengths = rows.iter().map(Vec::len).collect();
        let ids = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, PAD_ID);
                r
            })
            .collect();
        Ok(EncodedBatch {
            ids,
            lengths,
            domains,
            width,
            targets,
        })
    }

    /// Normalises, tokenises and encodes documents. Targets are attached when
    /// every document carries gold labels.
    pub fn from_documents<'a, I>(docs: I, vocab: &Vocabulary, max_len: usize, aspects: &AspectSet) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut rows = Vec::new();
        let mut domains = Vec::new();
        let mut targets = Some(Vec::new());
        for doc in docs {
            let ids = textprep::encode_text(&doc.text, vocab, max_len);
            if ids.is_empty() {
                return Err(Error::InvalidBatch(format!("document `{}` has no tokens", doc.id)));
            }
            rows.push(ids);
            domains.push(doc.domain);
            match (&mut targets, &doc.gold) {
                (Some(t), Some(g)) => t.push(Targets {
                    sentiment: g.sentiment,
                    aspects: g.aspect_vector(aspects),
                }),
                _ => targets = None,
            }
        }
        Self::new(rows, domains, targets)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self, c: &ModelConfig) -> Result<()> {
        for (r, row) in self.ids.iter().enumerate() {
            let len = self.lengths[r];
            if row.len() != self.width || len == 0 || len > self.width || self.width > c.max_len {
                return Err(Error::InvalidBatch(format!("row {r}: bad length or width")));
            }
            if row.iter().any(|&id| id >= c.vocab_size) {
                return Err(Error::InvalidBatch(format!("row {r}: token id outside vocabulary")));
            }
            if row[len..].iter().any(|&id| id != PAD_ID) {
                return Err(Error::InvalidBatch(format!("row {r}: non-pad id after length")));
            }
            let dom = self.domains[r].0;
            if dom >= c.n_domains {
                return Err(Error::InvalidDomain {
                    domain: dom,
                    n_domains: c.n_domains,
                });
            }
            if let Some(t) = &self.targets {
                if t[r].aspects.len() != c.n_aspects {
                    return Err(Error::InvalidBatch(format!("row {r}: aspect target count")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = LossWeights { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidInput(
                "loss weights must be non-negative and not all zero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub sentiment: T,
    pub aspect: T,
    pub domain: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn combine(sentiment: T, aspect: T, domain: T, w: &LossWeights) -> Self {
        let total = T::lit(w.alpha) * sentiment + T::lit(w.beta) * aspect + T::lit(w.gamma) * domain;
        LossBreakdown {
            sentiment,
            aspect,
            domain,
            total,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sentiment.is_finite() && self.aspect.is_finite() && self.domain.is_finite() && self.total.is_finite()
    }
}

/// Model output for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct SentimentResult<T> {
    /// Negative, Neutral, Positive.
    pub sentiment: [T; 3],
    /// Per aspect: Negative, Neutral, Positive, NotMentioned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<Vec<[T; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled: Option<Vec<T>>,
    pub latency_ms: f64,
}

impl<T: Scalar> SentimentResult<T> {
    pub fn predicted_sentiment(&self) -> Sentiment {
        Sentiment::from_index(argmax(&self.sentiment)).expect("three classes")
    }

    pub fn predicted_aspects(&self) -> Option<Vec<AspectLabel>> {
        self.aspects.as_ref().map(|a| {
            a.iter()
                .map(|p| AspectLabel::from_index(argmax(p)).expect("four classes"))
                .collect()
        })
    }

    pub fn predicted_domain(&self) -> Option<DomainId> {
        self.domain.as_ref().map(|p| DomainId(argmax(p)))
    }

    /// Every emitted distribution is non-negative and sums to one within `tol`.
    pub fn distributions_valid(&self, tol: f64) -> bool {
        let ok = |p: &[T]| {
            p.iter().all(|&x| x >= T::zero() && x <= T::one())
                && (p.iter().copied().sum::<T>().as_f64() - 1.0).abs() <= tol
        };
        ok(&self.sentiment)
            && self.aspects.as_ref().is_none_or(|a| a.iter().all(|p| ok(p)))
            && self.domain.as_ref().is_none_or(|p| ok(p))
    }
}

/// Result of the classification entry point: documents in an unrecognised
/// language bypass the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub enum Classification<T> {
    Classified(SentimentResult<T>),
    Unclassified { reason: String, latency_ms: f64 },
}

impl<T> Classification<T> {
    pub fn result(&self) -> Option<&SentimentResult<T>> {
        match self {
            Classification::Classified(r) => Some(r),
            Classification::Unclassified { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// `[width, d_model]` hidden states per row.
    pub hidden: Vec<Matrix<T>>,
    pub results: Vec<SentimentResult<T>>,
    pub loss: Option<LossBreakdown<T>>,
}

fn to_array<T: Scalar, const N: usize>(v: Vec<T>) -> [T; N] {
    v.try_into()
        .unwrap_or_else(|v: Vec<T>| panic!("expected {N} entries, got {}", v.len()))
}

fn cross_entropy<T: Scalar>(logits: &[T], target: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    lse - logits[target]
}

/// Encoder output without the domain embedding (the attention bias of each
/// row's domain still applies).
pub fn encoder_output<T: Scalar>(
    batch: &EncodedBatch,
    params: &ModelParams<T>,
    c: &ModelConfig,
) -> Result<Vec<Matrix<T>>> {
    batch.validate(c)?;
    Ok((0..batch.len())
        .map(|r| forward::encode_row(params, c, &batch.ids[r], batch.lengths[r], batch.domains[r].0).0)
        .collect())
}

/// Forward pass over a batch. When targets are attached the loss is computed
/// with `weights`.
pub fn forward<T: Scalar>(
    batch: &EncodedBatch,
    params: &ModelParams<T>,
    c: &ModelConfig,
    weights: &LossWeights,
) -> Result<ForwardOutput<T>> {
    batch.validate(c)?;
    let mut hidden = Vec::with_capacity(batch.len());
    let mut results = Vec::with_capacity(batch.len());
    let mut sums = (T::zero(), T::zero(), T::zero());
    for r in 0..batch.len() {
        let started = Instant::now();
        let cache = forward::forward_row(params, c, &batch.ids[r], batch.lengths[r], batch.domains[r].0);
        if let Some(t) = &batch.targets {
            let (s, a, d) = row_losses(&cache, &t[r]);
            sums.0 += s;
            sums.1 += a;
            sums.2 += d;
        }
        results.push(SentimentResult {
            sentiment: to_array(cache.sentiment_probs()),
            aspects: Some(cache.aspect_probs().into_iter().map(to_array).collect()),
            domain: Some(cache.domain_probs()),
            pooled: Some(cache.pooled.clone()),
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        hidden.push(cache.hidden);
    }
    let loss = batch.targets.as_ref().map(|_| {
        let n = T::from_usize_lossy(batch.len());
        LossBreakdown::combine(sums.0 / n, sums.1 / n, sums.2 / n, weights)
    });
    Ok(ForwardOutput { hidden, results, loss })
}

fn row_losses<T: Scalar>(cache: &forward::RowCache<T>, t: &Targets) -> (T, T, T) {
    let s = cross_entropy(&cache.sentiment_logits, t.sentiment.index());
    let n_aspects = cache.aspect_logits.len();
    let a = if n_aspects == 0 {
        T::zero()
    } else {
        cache
            .aspect_logits
            .iter()
            .zip(&t.aspects)
            .map(|(l, y)| cross_entropy(l, y.index()))
            .sum::<T>()
            / T::from_usize_lossy(n_aspects)
    };
    let d = cross_entropy(&cache.domain_logits, cache.domain);
    (s, a, d)
}

/// Multi-task loss of already computed distributions: mean cross-entropy of the
/// sentiment head, mean over aspects of the aspect cross-entropies, and the
/// domain head's cross-entropy against each document's domain.
pub fn loss<T: Scalar>(
    predictions: &[SentimentResult<T>],
    targets: &[Targets],
    domains: &[DomainId],
    weights: &LossWeights,
) -> Result<LossBreakdown<T>> {
    if predictions.len() != targets.len() || predictions.len() != domains.len() || predictions.is_empty() {
        return Err(Error::InvalidInput(
            "predictions, targets and domains must be equal, non-empty lengths".into(),
        ));
    }
    let nll = |p: T| -p.ln();
    let (mut s, mut a, mut d) = (T::zero(), T::zero(), T::zero());
    for ((p, t), dom) in predictions.iter().zip(targets).zip(domains) {
        s += nll(p.sentiment[t.sentiment.index()]);
        let aspects = p
            .aspects
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("prediction lacks aspect distributions".into()))?;
        if aspects.len() != t.aspects.len() {
            return Err(Error::InvalidInput("aspect count mismatch".into()));
        }
        if !aspects.is_empty() {
            a += aspects
                .iter()
                .zip(&t.aspects)
                .map(|(q, y)| nll(q[y.index()]))
                .sum::<T>()
                / T::from_usize_lossy(aspects.len());
        }
        let dist = p
            .domain
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("prediction lacks a domain distribution".into()))?;
        let q = dist.get(dom.0).ok_or(Error::InvalidDomain {
            domain: dom.0,
            n_domains: dist.len(),
        })?;
        d += nll(*q);
    }
    let n = T::from_usize_lossy(predictions.len());
    Ok(LossBreakdown::combine(s / n, a / n, d / n, weights))
}

/// Loss and exact gradients of the weighted multi-task loss with respect to every
/// parameter tensor. The batch must carry targets.
pub fn backward<T: Scalar>(
    batch: &EncodedBatch,
    params: &ModelParams<T>,
    c: &ModelConfig,
    weights: &LossWeights,
) -> Result<(LossBreakdown<T>, ModelParams<T>)> {
    batch.validate(c)?;
    let targets = batch
        .targets
        .as_ref()
        .ok_or_else(|| Error::InvalidBatch("backward needs gold targets".into()))?;
    let n = T::from_usize_lossy(batch.len());
    let a_scale = T::lit(weights.alpha) / n;
    let b_scale = if c.n_aspects == 0 {
        T::zero()
    } else {
        T::lit(weights.beta) / (n * T::from_usize_lossy(c.n_aspects))
    };
    let g_scale = T::lit(weights.gamma) / n;

    let mut grads = ModelParams::zeros(c);
    let mut sums = (T::zero(), T::zero(), T::zero());
    for r in 0..batch.len() {
        let len = batch.lengths[r];
        // Padding columns carry exactly zero attention weight, so running the row
        // at its true length yields identical values for every real position.
        let cache = forward::forward_row(params, c, &batch.ids[r][..len], len, batch.domains[r].0);
        let (s, a, d) = row_losses(&cache, &targets[r]);
        sums.0 += s;
        sums.1 += a;
        sums.2 += d;

        let grad_of = |logits: &[T], target: usize, scale: T| -> Vec<T> {
            let mut p = softmax(logits);
            p[target] -= T::one();
            p.iter_mut().for_each(|x| *x *= scale);
            p
        };
        let d_sent = grad_of(&cache.sentiment_logits, targets[r].sentiment.index(), a_scale);
        let d_asp: Vec<Vec<T>> = cache
            .aspect_logits
            .iter()
            .zip(&targets[r].aspects)
            .map(|(l, y)| grad_of(l, y.index(), b_scale))
            .collect();
        let d_dom = grad_of(&cache.domain_logits, cache.domain, g_scale);
        backward::backward_row(params, c, &cache, &d_sent, &d_asp, &d_dom, &mut grads);
    }
    let loss = LossBreakdown::combine(sums.0 / n, sums.1 / n, sums.2 / n, weights);
    Ok((loss, grads))
}
