use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, EncodedBatch, LossBreakdown, LossWeights, ModelConfig, ModelParams};
use crate::corpus::{AspectSet, Document};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textprep::Vocabulary;

/// Optimisation hyper-parameters (Adam).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    pub params: ModelParams<T>,
    /// Document-weighted mean loss of each epoch, measured on the training batches
    /// before their updates.
    pub trace: Vec<LossBreakdown<T>>,
}

struct Adam<T> {
    m: ModelParams<T>,
    v: ModelParams<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(c: &ModelConfig) -> Self {
        Adam {
            m: ModelParams::zeros(c),
            v: ModelParams::zeros(c),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>, spec: &TrainSpec) {
        self.step += 1;
        let (b1, b2) = (T::lit(spec.beta1), T::lit(spec.beta2));
        let lr = T::lit(spec.learning_rate);
        let eps = T::lit(spec.epsilon);
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let grads = grads.named_tensors();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            let (p, g, m, v) = (p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

fn validate_spec(spec: &TrainSpec) -> Result<()> {
    if spec.batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be >= 1".into()));
    }
    if !(spec.learning_rate >= 0.0 && spec.learning_rate.is_finite()) {
        return Err(Error::InvalidInput(
            "learning_rate must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Trains from a seeded initialisation. Shuffling and initialisation are
/// deterministic in `seed`.
pub fn train<T: Scalar>(
    corpus: &[Document],
    vocab: &Vocabulary,
    aspects: &AspectSet,
    config: &ModelConfig,
    weights: &LossWeights,
    spec: &TrainSpec,
    seed: u64,
) -> Result<TrainedModel<T>> {
    let init = ModelParams::init(config, seed)?;
    train_from(init, corpus, vocab, aspects, config, weights, spec, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn train_from<T: Scalar>(
    mut params: ModelParams<T>,
    corpus: &[Document],
    vocab: &Vocabulary,
    aspects: &AspectSet,
    config: &ModelConfig,
    weights: &LossWeights,
    spec: &TrainSpec,
    seed: u64,
) -> Result<TrainedModel<T>> {
    config.validate()?;
    weights.validate()?;
    validate_spec(spec)?;
    if corpus.is_empty() {
        return Err(Error::InvalidCorpus("empty training corpus".into()));
    }
    if let Some(d) = corpus.iter().find(|d| d.gold.is_none()) {
        return Err(Error::InvalidCorpus(format!("document `{}` has no gold labels", d.id)));
    }
    // Encode once; batches are cheap re-assemblies of these rows.
    let encoded = EncodedBatch::from_documents(corpus, vocab, config.max_len, aspects)?;
    encoded.validate(config)?;
    let targets = encoded.targets.as_ref().expect("all documents labelled");

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut adam = Adam::new(config);
    let mut trace = Vec::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut sums = (T::zero(), T::zero(), T::zero());
        for (b, chunk) in order.chunks(spec.batch_size).enumerate() {
            let rows = chunk
                .iter()
                .map(|&i| encoded.ids[i][..encoded.lengths[i]].to_vec())
                .collect();
            let domains = chunk.iter().map(|&i| encoded.domains[i]).collect();
            let t = chunk.iter().map(|&i| targets[i].clone()).collect();
            let batch = EncodedBatch::new(rows, domains, Some(t))?;
            let (loss, grads) = backward(&batch, &params, config, weights)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let n = T::from_usize_lossy(chunk.len());
            sums.0 += loss.sentiment * n;
            sums.1 += loss.aspect * n;
            sums.2 += loss.domain * n;
            adam.update(&mut params, &grads, spec);
            if !params.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
        }
        let n = T::from_usize_lossy(corpus.len());
        let epoch_loss = LossBreakdown::combine(sums.0 / n, sums.1 / n, sums.2 / n, weights);
        info!(
            "epoch {:>3}: total {:.5} (sentiment {:.5}, aspect {:.5}, domain {:.5})",
            epoch + 1,
            epoch_loss.total,
            epoch_loss.sentiment,
            epoch_loss.aspect,
            epoch_loss.domain
        );
        trace.push(epoch_loss);
    }
    Ok(TrainedModel { params, trace })
}
