use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textprep::DEFAULT_MAX_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub n_domains: usize,
    pub n_aspects: usize,
    pub n_relative_buckets: usize,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, n_domains: usize, n_aspects: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            max_len: DEFAULT_MAX_LEN,
            n_domains,
            n_aspects,
            n_relative_buckets: 9,
        }
    }

    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
            ("n_domains", self.n_domains),
            ("n_aspects", self.n_aspects),
            ("n_relative_buckets", self.n_relative_buckets),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_relative_buckets.is_multiple_of(2) {
            return Err(Error::InvalidConfig("n_relative_buckets must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub ln1_gain: Matrix<T>,
    pub ln1_shift: Matrix<T>,
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
    pub w_o: Matrix<T>,
    pub ln2_gain: Matrix<T>,
    pub ln2_shift: Matrix<T>,
    pub w_ff1: Matrix<T>,
    pub b_ff1: Matrix<T>,
    pub w_ff2: Matrix<T>,
    pub b_ff2: Matrix<T>,
}

/// Every learned tensor of the model. Gradients and optimizer moments use the
/// same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub token_embedding: Matrix<T>,
    pub position_embedding: Matrix<T>,
    /// Added to the encoder output, one row per domain.
    pub domain_embedding: Matrix<T>,
    /// `[n_domains, n_heads * n_relative_buckets]`; row `d`, block `h` is the
    /// relative-position bias of head `h` under domain `d`.
    pub attention_bias: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_ln_gain: Matrix<T>,
    pub final_ln_shift: Matrix<T>,
    pub sentiment_w: Matrix<T>,
    pub sentiment_b: Matrix<T>,
    pub aspect_w: Vec<Matrix<T>>,
    pub aspect_b: Vec<Matrix<T>>,
    pub domain_w: Matrix<T>,
    pub domain_b: Matrix<T>,
}

impl<T: Scalar> LayerParams<T> {
    fn zeros(c: &ModelConfig) -> Self {
        let d = c.d_model;
        LayerParams {
            ln1_gain: Matrix::zeros(1, d),
            ln1_shift: Matrix::zeros(1, d),
            w_q: Matrix::zeros(d, d),
            w_k: Matrix::zeros(d, d),
            w_v: Matrix::zeros(d, d),
            w_o: Matrix::zeros(d, d),
            ln2_gain: Matrix::zeros(1, d),
            ln2_shift: Matrix::zeros(1, d),
            w_ff1: Matrix::zeros(d, c.d_ff),
            b_ff1: Matrix::zeros(1, c.d_ff),
            w_ff2: Matrix::zeros(c.d_ff, d),
            b_ff2: Matrix::zeros(1, d),
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero tensors of the right shapes.
    pub fn zeros(c: &ModelConfig) -> Self {
        let d = c.d_model;
        ModelParams {
            token_embedding: Matrix::zeros(c.vocab_size, d),
            position_embedding: Matrix::zeros(c.max_len, d),
            domain_embedding: Matrix::zeros(c.n_domains, d),
            attention_bias: Matrix::zeros(c.n_domains, c.n_heads * c.n_relative_buckets),
            layers: (0..c.n_layers).map(|_| LayerParams::zeros(c)).collect(),
            final_ln_gain: Matrix::zeros(1, d),
            final_ln_shift: Matrix::zeros(1, d),
            sentiment_w: Matrix::zeros(d, 3),
            sentiment_b: Matrix::zeros(1, 3),
            aspect_w: (0..c.n_aspects).map(|_| Matrix::zeros(d, 4)).collect(),
            aspect_b: (0..c.n_aspects).map(|_| Matrix::zeros(1, 4)).collect(),
            domain_w: Matrix::zeros(d, c.n_domains),
            domain_b: Matrix::zeros(1, c.n_domains),
        }
    }

    /// Seeded initialisation: uniform(-0.05, 0.05) for embeddings and the bias
    /// table, Xavier-uniform for projections and heads, unit gains, zero shifts
    /// and biases.
    pub fn init(c: &ModelConfig, seed: u64) -> Result<Self> {
        c.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(c);
        let mut uniform = |m: &mut Matrix<T>, limit: f64| {
            for x in m.as_mut_slice() {
                *x = T::lit(rng.gen_range(-limit..limit));
            }
        };
        let xavier = |m: &Matrix<T>| (6.0 / (m.rows() + m.cols()) as f64).sqrt();

        uniform(&mut p.token_embedding, 0.05);
        uniform(&mut p.position_embedding, 0.05);
        uniform(&mut p.domain_embedding, 0.05);
        uniform(&mut p.attention_bias, 0.05);
        for layer in &mut p.layers {
            for w in [
                &mut layer.w_q,
                &mut layer.w_k,
                &mut layer.w_v,
                &mut layer.w_o,
                &mut layer.w_ff1,
                &mut layer.w_ff2,
            ] {
                let lim = xavier(w);
                uniform(w, lim);
            }
            layer.ln1_gain.fill(T::one());
            layer.ln2_gain.fill(T::one());
        }
        p.final_ln_gain.fill(T::one());
        for w in std::iter::once(&mut p.sentiment_w)
            .chain(p.aspect_w.iter_mut())
            .chain(std::iter::once(&mut p.domain_w))
        {
            let lim = xavier(w);
            uniform(w, lim);
        }
        Ok(p)
    }

    /// Tensors with stable names, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out: Vec<(String, &Matrix<T>)> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
            ("domain_embedding".into(), &self.domain_embedding),
            ("attention_bias".into(), &self.attention_bias),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, m) in [
                ("ln1_gain", &l.ln1_gain),
                ("ln1_shift", &l.ln1_shift),
                ("w_q", &l.w_q),
                ("w_k", &l.w_k),
                ("w_v", &l.w_v),
                ("w_o", &l.w_o),
                ("ln2_gain", &l.ln2_gain),
                ("ln2_shift", &l.ln2_shift),
                ("w_ff1", &l.w_ff1),
                ("b_ff1", &l.b_ff1),
                ("w_ff2", &l.w_ff2),
                ("b_ff2", &l.b_ff2),
            ] {
                out.push((format!("layers.{i}.{n}"), m));
            }
        }
        out.push(("final_ln_gain".into(), &self.final_ln_gain));
        out.push(("final_ln_shift".into(), &self.final_ln_shift));
        out.push(("sentiment_w".into(), &self.sentiment_w));
        out.push(("sentiment_b".into(), &self.sentiment_b));
        for (i, (w, b)) in self.aspect_w.iter().zip(&self.aspect_b).enumerate() {
            out.push((format!("aspect.{i}.w"), w));
            out.push((format!("aspect.{i}.b"), b));
        }
        out.push(("domain_w".into(), &self.domain_w));
        out.push(("domain_b".into(), &self.domain_b));
        out
    }

    /// Mutable tensors in the same order as [`Self::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = vec![
            &mut self.token_embedding,
            &mut self.position_embedding,
            &mut self.domain_embedding,
            &mut self.attention_bias,
        ];
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_gain,
                &mut l.ln1_shift,
                &mut l.w_q,
                &mut l.w_k,
                &mut l.w_v,
                &mut l.w_o,
                &mut l.ln2_gain,
                &mut l.ln2_shift,
                &mut l.w_ff1,
                &mut l.b_ff1,
                &mut l.w_ff2,
                &mut l.b_ff2,
            ]);
        }
        out.push(&mut self.final_ln_gain);
        out.push(&mut self.final_ln_shift);
        out.push(&mut self.sentiment_w);
        out.push(&mut self.sentiment_b);
        for (w, b) in self.aspect_w.iter_mut().zip(self.aspect_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.domain_w);
        out.push(&mut self.domain_b);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, m)| m.all_finite())
    }

    /// Converts every tensor to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let conv = |m: &Matrix<T>| m.map(|x| U::lit(x.as_f64()));
        ModelParams {
            token_embedding: conv(&self.token_embedding),
            position_embedding: conv(&self.position_embedding),
            domain_embedding: conv(&self.domain_embedding),
            attention_bias: conv(&self.attention_bias),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_gain: conv(&l.ln1_gain),
                    ln1_shift: conv(&l.ln1_shift),
                    w_q: conv(&l.w_q),
                    w_k: conv(&l.w_k),
                    w_v: conv(&l.w_v),
                    w_o: conv(&l.w_o),
                    ln2_gain: conv(&l.ln2_gain),
                    ln2_shift: conv(&l.ln2_shift),
                    w_ff1: conv(&l.w_ff1),
                    b_ff1: conv(&l.b_ff1),
                    w_ff2: conv(&l.w_ff2),
                    b_ff2: conv(&l.b_ff2),
                })
                .collect(),
            final_ln_gain: conv(&self.final_ln_gain),
            final_ln_shift: conv(&self.final_ln_shift),
            sentiment_w: conv(&self.sentiment_w),
            sentiment_b: conv(&self.sentiment_b),
            aspect_w: self.aspect_w.iter().map(conv).collect(),
            aspect_b: self.aspect_b.iter().map(conv).collect(),
            domain_w: conv(&self.domain_w),
            domain_b: conv(&self.domain_b),
        }
    }
}

/// Exact number of scalar parameters.
pub fn count_params<T: Scalar>(params: &ModelParams<T>) -> usize {
    params.named_tensors().iter().map(|(_, m)| m.len()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_mut_views_align() {
        let c = ModelConfig::new(20, 3, 2);
        let mut p = ModelParams::<f64>::init(&c, 1).unwrap();
        let shapes: Vec<(usize, usize)> = p.named_tensors().iter().map(|(_, m)| m.shape()).collect();
        let mut_shapes: Vec<(usize, usize)> = p.tensors_mut().iter().map(|m| m.shape()).collect();
        assert_eq!(shapes, mut_shapes);
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::new(10, 2, 3);
        assert!(c.validate().is_ok());
        c.n_heads = 5;
        assert!(c.validate().is_err());
        c.n_heads = 4;
        c.n_relative_buckets = 8;
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig::new(30, 2, 3);
        let a = ModelParams::<f64>::init(&c, 9).unwrap();
        assert_eq!(a, ModelParams::<f64>::init(&c, 9).unwrap());
        assert_ne!(a, ModelParams::<f64>::init(&c, 10).unwrap());
        assert!(a.all_finite());
    }
}
