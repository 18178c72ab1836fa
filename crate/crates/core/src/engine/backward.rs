//! Hand-written reverse pass through heads, pooling, encoder and embeddings.

use super::attention::relative_bucket;
use super::forward::{LayerCache, LnCache, RowCache};
use super::matrix::Matrix;
use super::params::{LayerParams, ModelConfig, ModelParams};
use crate::scalar::Scalar;

fn column_sums_acc<T: Scalar>(m: &Matrix<T>, acc: &mut Matrix<T>) {
    for r in 0..m.rows() {
        for (a, &x) in acc.as_mut_slice().iter_mut().zip(m.row(r)) {
            *a += x;
        }
    }
}

pub(crate) fn layer_norm_backward<T: Scalar>(
    dy: &Matrix<T>,
    cache: &LnCache<T>,
    gain: &Matrix<T>,
    d_gain: &mut Matrix<T>,
    d_shift: &mut Matrix<T>,
) -> Matrix<T> {
    let (n, d) = dy.shape();
    let inv_d = T::one() / T::from_usize_lossy(d);
    let g = gain.as_slice();
    let mut dx = Matrix::zeros(n, d);
    let mut dxhat = vec![T::zero(); d];
    for r in 0..n {
        let dyr = dy.row(r);
        let xh = cache.xhat.row(r);
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for c in 0..d {
            d_gain.as_mut_slice()[c] += dyr[c] * xh[c];
            d_shift.as_mut_slice()[c] += dyr[c];
            dxhat[c] = dyr[c] * g[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let is = cache.inv_std[r];
        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = is * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Scalar>(
    d_out: &Matrix<T>,
    layer: &LayerParams<T>,
    grads: &mut LayerParams<T>,
    bias_grads: &mut Matrix<T>,
    cache: &LayerCache<T>,
    c: &ModelConfig,
    length: usize,
    domain: usize,
) -> Matrix<T> {
    let width = d_out.rows();
    let dk = c.d_k();
    let nb = c.n_relative_buckets;

    // Feed-forward sublayer: out = relu(LN2(mid)·W1 + b1)·W2 + b2 + mid.
    cache.act.t_matmul_acc(d_out, &mut grads.w_ff2);
    column_sums_acc(d_out, &mut grads.b_ff2);
    let mut d_act = d_out.matmul_t(&layer.w_ff2);
    for (g, &z) in d_act.as_mut_slice().iter_mut().zip(cache.pre_act.as_slice()) {
        if z <= T::zero() {
            *g = T::zero();
        }
    }
    cache.normed_mid.t_matmul_acc(&d_act, &mut grads.w_ff1);
    column_sums_acc(&d_act, &mut grads.b_ff1);
    let d_normed_mid = d_act.matmul_t(&layer.w_ff1);
    let mut d_mid = layer_norm_backward(
        &d_normed_mid,
        &cache.ln2,
        &layer.ln2_gain,
        &mut grads.ln2_gain,
        &mut grads.ln2_shift,
    );
    d_mid.add_assign(d_out);

    // Attention sublayer: mid = concat(heads)·W_O + x.
    cache.heads_out.t_matmul_acc(&d_mid, &mut grads.w_o);
    let d_heads = d_mid.matmul_t(&layer.w_o);
    let scale = T::one() / T::from_usize_lossy(dk).sqrt();
    let mut dq = Matrix::zeros(width, c.d_model);
    let mut dkey = Matrix::zeros(width, c.d_model);
    let mut dv = Matrix::zeros(width, c.d_model);
    for (h, p) in cache.probs.iter().enumerate() {
        let d_oh = d_heads.columns(h * dk, dk);
        let qh = cache.q.columns(h * dk, dk);
        let kh = cache.k.columns(h * dk, dk);
        let vh = cache.v.columns(h * dk, dk);
        let dp = d_oh.matmul_t(&vh);
        dv.set_columns(h * dk, &p.t_matmul(&d_oh));

        let mut ds = Matrix::zeros(width, width);
        for i in 0..width {
            let pr = p.row(i);
            let dpr = dp.row(i);
            let s: T = pr.iter().zip(dpr).map(|(&a, &b)| a * b).sum();
            for (j, o) in ds.row_mut(i).iter_mut().enumerate() {
                *o = pr[j] * (dpr[j] - s);
            }
        }
        let bias_row = bias_grads.row_mut(domain);
        for i in 0..width {
            for j in 0..length {
                bias_row[h * nb + relative_bucket(j as isize - i as isize, nb)] += ds[(i, j)];
            }
        }
        ds.scale(scale);
        dq.set_columns(h * dk, &ds.matmul(&kh));
        dkey.set_columns(h * dk, &ds.t_matmul(&qh));
    }
    cache.normed_in.t_matmul_acc(&dq, &mut grads.w_q);
    cache.normed_in.t_matmul_acc(&dkey, &mut grads.w_k);
    cache.normed_in.t_matmul_acc(&dv, &mut grads.w_v);
    let mut d_normed_in = dq.matmul_t(&layer.w_q);
    d_normed_in.add_assign(&dkey.matmul_t(&layer.w_k));
    d_normed_in.add_assign(&dv.matmul_t(&layer.w_v));
    let mut dx = layer_norm_backward(
        &d_normed_in,
        &cache.ln1,
        &layer.ln1_gain,
        &mut grads.ln1_gain,
        &mut grads.ln1_shift,
    );
    dx.add_assign(&d_mid);
    dx
}

fn head_backward<T: Scalar>(
    pooled: &[T],
    d_logits: &[T],
    w: &Matrix<T>,
    d_w: &mut Matrix<T>,
    d_b: &mut Matrix<T>,
    d_pooled: &mut [T],
) {
    for (b, &g) in d_b.as_mut_slice().iter_mut().zip(d_logits) {
        *b += g;
    }
    for (i, &x) in pooled.iter().enumerate() {
        for (o, &g) in d_w.row_mut(i).iter_mut().zip(d_logits) {
            *o += x * g;
        }
        d_pooled[i] += w.row(i).iter().zip(d_logits).map(|(&a, &b)| a * b).sum::<T>();
    }
}

/// Accumulates the gradients of one row given the (already weighted) logit
/// gradients of each head.
pub(crate) fn backward_row<T: Scalar>(
    params: &ModelParams<T>,
    c: &ModelConfig,
    cache: &RowCache<T>,
    d_sentiment: &[T],
    d_aspects: &[Vec<T>],
    d_domain: &[T],
    grads: &mut ModelParams<T>,
) {
    let d = c.d_model;
    let mut d_pooled = vec![T::zero(); d];
    head_backward(
        &cache.pooled,
        d_sentiment,
        &params.sentiment_w,
        &mut grads.sentiment_w,
        &mut grads.sentiment_b,
        &mut d_pooled,
    );
    for (a, g) in d_aspects.iter().enumerate() {
        head_backward(
            &cache.pooled,
            g,
            &params.aspect_w[a],
            &mut grads.aspect_w[a],
            &mut grads.aspect_b[a],
            &mut d_pooled,
        );
    }
    head_backward(
        &cache.pooled,
        d_domain,
        &params.domain_w,
        &mut grads.domain_w,
        &mut grads.domain_b,
        &mut d_pooled,
    );

    let width = cache.ids.len();
    let inv_len = T::one() / T::from_usize_lossy(cache.length);
    let mut d_hidden = Matrix::zeros(width, d);
    let dom_row = grads.domain_embedding.row_mut(cache.domain);
    for p in 0..cache.length {
        for ((o, e), &g) in d_hidden.row_mut(p).iter_mut().zip(dom_row.iter_mut()).zip(&d_pooled) {
            *o = g * inv_len;
            *e += *o;
        }
    }

    let mut dx = layer_norm_backward(
        &d_hidden,
        &cache.final_ln,
        &params.final_ln_gain,
        &mut grads.final_ln_gain,
        &mut grads.final_ln_shift,
    );
    for l in (0..c.n_layers).rev() {
        dx = layer_backward(
            &dx,
            &params.layers[l],
            &mut grads.layers[l],
            &mut grads.attention_bias,
            &cache.layers[l],
            c,
            cache.length,
            cache.domain,
        );
    }
    for (p, &id) in cache.ids.iter().enumerate() {
        for ((t, q), &g) in grads
            .token_embedding
            .row_mut(id)
            .iter_mut()
            .zip(grads.position_embedding.row_mut(p).iter_mut())
            .zip(dx.row(p))
        {
            *t += g;
            *q += g;
        }
    }
}
