//! Encoder forward pass with the activations the backward pass needs.

use super::attention::{attention_weights, build_mask};
use super::matrix::Matrix;
use super::params::{LayerParams, ModelConfig, ModelParams};
use crate::scalar::{softmax, Scalar};

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) struct LnCache<T> {
    pub xhat: Matrix<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn layer_norm<T: Scalar>(x: &Matrix<T>, gain: &Matrix<T>, shift: &Matrix<T>) -> (Matrix<T>, LnCache<T>) {
    let (n, d) = x.shape();
    let eps = T::lit(LN_EPS);
    let inv_d = T::one() / T::from_usize_lossy(d);
    let mut y = Matrix::zeros(n, d);
    let mut xhat = Matrix::zeros(n, d);
    let mut inv_std = Vec::with_capacity(n);
    for r in 0..n {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let is = T::one() / (var + eps).sqrt();
        inv_std.push(is);
        let xh = xhat.row_mut(r);
        for (o, &v) in xh.iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
        let yr = y.row_mut(r);
        for c in 0..d {
            yr[c] = gain.as_slice()[c] * xhat[(r, c)] + shift.as_slice()[c];
        }
    }
    (y, LnCache { xhat, inv_std })
}

pub(crate) struct LayerCache<T> {
    pub ln1: LnCache<T>,
    pub normed_in: Matrix<T>,
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
    /// Attention weights per head.
    pub probs: Vec<Matrix<T>>,
    pub heads_out: Matrix<T>,
    pub ln2: LnCache<T>,
    pub normed_mid: Matrix<T>,
    pub pre_act: Matrix<T>,
    pub act: Matrix<T>,
}

/// Activations of one document.
pub(crate) struct RowCache<T> {
    pub ids: Vec<usize>,
    pub length: usize,
    pub domain: usize,
    pub layers: Vec<LayerCache<T>>,
    pub final_ln: LnCache<T>,
    pub hidden: Matrix<T>,
    pub pooled: Vec<T>,
    pub sentiment_logits: Vec<T>,
    pub aspect_logits: Vec<Vec<T>>,
    pub domain_logits: Vec<T>,
}

impl<T: Scalar> RowCache<T> {
    pub fn sentiment_probs(&self) -> Vec<T> {
        softmax(&self.sentiment_logits)
    }

    pub fn aspect_probs(&self) -> Vec<Vec<T>> {
        self.aspect_logits.iter().map(|l| softmax(l)).collect()
    }

    pub fn domain_probs(&self) -> Vec<T> {
        softmax(&self.domain_logits)
    }
}

pub(crate) fn head_bias<'a, T: Scalar>(
    params: &'a ModelParams<T>,
    c: &ModelConfig,
    domain: usize,
    head: usize,
) -> &'a [T] {
    let nb = c.n_relative_buckets;
    &params.attention_bias.row(domain)[head * nb..(head + 1) * nb]
}

fn layer_forward<T: Scalar>(
    x: &Matrix<T>,
    layer: &LayerParams<T>,
    params: &ModelParams<T>,
    c: &ModelConfig,
    length: usize,
    domain: usize,
) -> (Matrix<T>, LayerCache<T>) {
    let width = x.rows();
    let dk = c.d_k();
    let (normed_in, ln1) = layer_norm(x, &layer.ln1_gain, &layer.ln1_shift);
    let q = normed_in.matmul(&layer.w_q);
    let k = normed_in.matmul(&layer.w_k);
    let v = normed_in.matmul(&layer.w_v);

    let mut heads_out = Matrix::zeros(width, c.d_model);
    let mut probs = Vec::with_capacity(c.n_heads);
    for h in 0..c.n_heads {
        let mask = build_mask(width, length, head_bias(params, c, domain, h));
        let qh = q.columns(h * dk, dk);
        let kh = k.columns(h * dk, dk);
        let vh = v.columns(h * dk, dk);
        let p = attention_weights(&qh, &kh, &mask);
        heads_out.set_columns(h * dk, &p.matmul(&vh));
        probs.push(p);
    }
    let mut mid = heads_out.matmul(&layer.w_o);
    mid.add_assign(x);

    let (normed_mid, ln2) = layer_norm(&mid, &layer.ln2_gain, &layer.ln2_shift);
    let mut pre_act = normed_mid.matmul(&layer.w_ff1);
    pre_act.add_row_vector(layer.b_ff1.as_slice());
    let act = pre_act.map(|z| z.max(T::zero()));
    let mut out = act.matmul(&layer.w_ff2);
    out.add_row_vector(layer.b_ff2.as_slice());
    out.add_assign(&mid);

    (
        out,
        LayerCache {
            ln1,
            normed_in,
            q,
            k,
            v,
            probs,
            heads_out,
            ln2,
            normed_mid,
            pre_act,
            act,
        },
    )
}

/// Runs the encoder stack (no domain embedding) over one padded row.
pub(crate) fn encode_row<T: Scalar>(
    params: &ModelParams<T>,
    c: &ModelConfig,
    ids: &[usize],
    length: usize,
    domain: usize,
) -> (Matrix<T>, Vec<LayerCache<T>>, LnCache<T>) {
    let width = ids.len();
    let mut x = Matrix::zeros(width, c.d_model);
    for (p, &id) in ids.iter().enumerate() {
        let tok = params.token_embedding.row(id);
        let pos = params.position_embedding.row(p);
        for ((o, &a), &b) in x.row_mut(p).iter_mut().zip(tok).zip(pos) {
            *o = a + b;
        }
    }
    let mut caches = Vec::with_capacity(c.n_layers);
    for layer in &params.layers {
        let (next, cache) = layer_forward(&x, layer, params, c, length, domain);
        caches.push(cache);
        x = next;
    }
    let (encoded, final_ln) = layer_norm(&x, &params.final_ln_gain, &params.final_ln_shift);
    (encoded, caches, final_ln)
}

fn head_logits<T: Scalar>(pooled: &[T], w: &Matrix<T>, b: &Matrix<T>) -> Vec<T> {
    let mut out = b.as_slice().to_vec();
    for (i, &x) in pooled.iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(w.row(i)) {
            *o += x * wv;
        }
    }
    out
}

/// Full forward pass for one row: encoder, domain embedding, mean pooling, heads.
pub(crate) fn forward_row<T: Scalar>(
    params: &ModelParams<T>,
    c: &ModelConfig,
    ids: &[usize],
    length: usize,
    domain: usize,
) -> RowCache<T> {
    let (encoded, layers, final_ln) = encode_row(params, c, ids, length, domain);
    let mut hidden = encoded;
    hidden.add_row_vector(params.domain_embedding.row(domain));

    let mut pooled = vec![T::zero(); c.d_model];
    for p in 0..length {
        for (o, &h) in pooled.iter_mut().zip(hidden.row(p)) {
            *o += h;
        }
    }
    let inv_len = T::one() / T::from_usize_lossy(length);
    pooled.iter_mut().for_each(|x| *x *= inv_len);

    let sentiment_logits = head_logits(&pooled, &params.sentiment_w, &params.sentiment_b);
    let aspect_logits = params
        .aspect_w
        .iter()
        .zip(&params.aspect_b)
        .map(|(w, b)| head_logits(&pooled, w, b))
        .collect();
    let domain_logits = head_logits(&pooled, &params.domain_w, &params.domain_b);

    RowCache {
        ids: ids.to_vec(),
        length,
        domain,
        layers,
        final_ln,
        hidden,
        pooled,
        sentiment_logits,
        aspect_logits,
        domain_logits,
    }
}
