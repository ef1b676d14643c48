//! Additive (tanh) attention scores shared by the semantic aligner and the decoder.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::params::AdditiveAttn;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ScoreTape<T> {
    queries: Array2<T>,
    keys: Array2<T>,
    /// `tanh(Wq·q + Wk·k + b)` for every (query, key) pair: `[Q, K, d]`.
    hidden: Array3<T>,
}

/// Raw scores `s[q, k] = uᵀ tanh(Wq·query_q + Wk·key_k + b)`, shape `[Q × K]`.
pub fn additive_scores<T: Scalar>(
    attn: &AdditiveAttn<T>,
    queries: ArrayView2<T>,
    keys: ArrayView2<T>,
) -> (Array2<T>, ScoreTape<T>) {
    let qp = queries.dot(&attn.wq.t());
    let kp = keys.dot(&attn.wk.t());
    let (nq, nk, d) = (qp.nrows(), kp.nrows(), attn.u.len());
    let mut hidden = Array3::zeros((nq, nk, d));
    let mut scores = Array2::zeros((nq, nk));
    for q in 0..nq {
        let base = &qp.row(q) + &attn.b;
        for k in 0..nk {
            let mut h = hidden.slice_mut(ndarray::s![q, k, ..]);
            let mut acc = T::zero();
            for (((hv, &bv), &kv), &uv) in h.iter_mut().zip(base.iter()).zip(kp.row(k)).zip(attn.u.iter()) {
                let z = (bv + kv).tanh();
                *hv = z;
                acc += uv * z;
            }
            scores[[q, k]] = acc;
        }
    }
    let tape = ScoreTape {
        queries: queries.to_owned(),
        keys: keys.to_owned(),
        hidden,
    };
    (scores, tape)
}

/// Backward of [`additive_scores`]. Accumulates into `grad` and returns
/// `(d_queries, d_keys)`.
pub fn additive_scores_backward<T: Scalar>(
    attn: &AdditiveAttn<T>,
    tape: &ScoreTape<T>,
    d_scores: ArrayView2<T>,
    grad: &mut AdditiveAttn<T>,
) -> (Array2<T>, Array2<T>) {
    let (nq, nk, d) = tape.hidden.dim();
    let mut d_qp = Array2::zeros((nq, d));
    let mut d_kp = Array2::zeros((nk, d));
    for q in 0..nq {
        for k in 0..nk {
            let ds = d_scores[[q, k]];
            if ds == T::zero() {
                continue;
            }
            let h = tape.hidden.slice(ndarray::s![q, k, ..]);
            grad.u.scaled_add(ds, &h);
            let mut dq = d_qp.row_mut(q);
            let mut dk = d_kp.row_mut(k);
            for c in 0..d {
                let z = h[c];
                let dpre = ds * attn.u[c] * (T::one() - z * z);
                dq[c] += dpre;
                dk[c] += dpre;
            }
        }
    }
    grad.b += &d_qp.sum_axis(Axis(0));
    grad.wq += &d_qp.t().dot(&tape.queries);
    grad.wk += &d_kp.t().dot(&tape.keys);
    (d_qp.dot(&attn.wq), d_kp.dot(&attn.wk))
}
