//! Scaled dot-product attention with an additive mask, and the per-domain
//! bucketed relative-position bias that fills the mask.

use super::matrix::Matrix;
use crate::scalar::{softmax_in_place, Scalar};

/// Maps a signed relative distance `j - i` to one of `n_buckets` bins.
///
/// Bucket 0 is distance 0. Each sign gets `m = (n_buckets - 1) / 2` bins: the
/// first `m - 2` hold exact distances, the next holds `[m-1, 2m-3]` and the last
/// everything farther. With 11 buckets that is `{0, ±1, ±2, ±3, ±[4,7], ±≥8}`;
/// with the default 9 it is `{0, ±1, ±2, ±[3,5], ±≥6}`. Positive distances use
/// bins `1..=m`, negative ones `m+1..=2m`.
pub fn relative_bucket(distance: isize, n_buckets: usize) -> usize {
    debug_assert!(n_buckets % 2 == 1, "bucket count must be odd");
    let per_side = (n_buckets - 1) / 2;
    if distance == 0 || per_side == 0 {
        return 0;
    }
    let a = distance.unsigned_abs();
    let bin = if per_side == 1 {
        1
    } else {
        let exact = per_side - 2;
        if a <= exact {
            a
        } else if a <= 2 * exact + 1 {
            exact + 1
        } else {
            per_side
        }
    };
    if distance > 0 {
        bin
    } else {
        per_side + bin
    }
}

/// Additive mask for one head: `M[i][j] = pad(j) + bias[bucket(j - i)]`, where
/// `pad(j)` is `-inf` for `j >= length` and 0 otherwise. `bias` is the row of the
/// bias table for one (domain, head) pair.
pub fn build_mask<T: Scalar>(width: usize, length: usize, bias: &[T]) -> Matrix<T> {
    let n_buckets = bias.len();
    let mut m = Matrix::zeros(width, width);
    for i in 0..width {
        let row = m.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if j >= length {
                T::neg_infinity()
            } else {
                bias[relative_bucket(j as isize - i as isize, n_buckets)]
            };
        }
    }
    m
}

/// Row-wise `softmax(Q·Kᵀ/√d_k + M)`.
///
/// Panics if a row of `mask` is entirely `-inf`.
pub fn attention_weights<T: Scalar>(q: &Matrix<T>, k: &Matrix<T>, mask: &Matrix<T>) -> Matrix<T> {
    assert_eq!(q.cols(), k.cols(), "query/key width mismatch");
    assert_eq!(mask.shape(), (q.rows(), k.rows()), "mask shape mismatch");
    let scale = T::one() / T::from_usize_lossy(q.cols()).sqrt();
    let mut s = q.matmul_t(k);
    for i in 0..s.rows() {
        let mrow = mask.row(i);
        let row = s.row_mut(i);
        for (x, &m) in row.iter_mut().zip(mrow) {
            *x = *x * scale + m;
        }
        softmax_in_place(row);
    }
    s
}

/// `softmax(Q·Kᵀ/√d_k + M)·V`. Returns the output and the weight matrix.
pub fn attention<T: Scalar>(q: &Matrix<T>, k: &Matrix<T>, v: &Matrix<T>, mask: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    assert_eq!(k.rows(), v.rows(), "key/value length mismatch");
    let w = attention_weights(q, k, mask);
    (w.matmul(v), w)
}
