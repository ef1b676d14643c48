//! Cross-entropy, contrastive attention loss and their weighted sum.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grouping::relevance;
use crate::linalg::{log_sum_exp, softmax};
use crate::params::AdditiveAttn;
use crate::scalar::Scalar;

/// Probability floor used by both losses.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce: f64,
    pub ca: f64,
    pub lambda: f64,
    pub p_ca_values: Vec<f64>,
}

impl LossBreakdown {
    pub fn new(ce: f64, ca: f64, lambda: f64, p_ca_values: Vec<f64>) -> Self {
        LossBreakdown {
            total: combine(ce, ca, lambda),
            ce,
            ca,
            lambda,
            p_ca_values,
        }
    }
}

pub fn combine(ce: f64, ca: f64, lambda: f64) -> f64 {
    ce + lambda * ca
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy<T> {
    pub loss: T,
    /// Gold tokens whose probability fell below the floor.
    pub clamped: usize,
}

/// `Σ_t -log p_t(target_t)`, one probability vector per target (EOS included).
pub fn cross_entropy<T: Scalar>(step_probs: &[Array1<T>], targets: &[usize]) -> CrossEntropy<T> {
    assert_eq!(step_probs.len(), targets.len(), "one probability vector per target");
    let floor = T::lit(PROB_FLOOR);
    let mut clamped = 0;
    let mut loss = T::zero();
    for (p, &y) in step_probs.iter().zip(targets) {
        let mut v = p[y];
        if v < floor {
            v = floor;
            clamped += 1;
        }
        loss -= v.ln();
    }
    CrossEntropy { loss, clamped }
}

/// Per-group contrastive term from raw relevance `[M × 2N]` whose first `n_pos`
/// columns are the true video's frames.
#[derive(Debug, Clone)]
pub struct ContrastiveTerm<T> {
    pub loss: T,
    pub p_ca: Vec<T>,
    /// Gradient of `loss` w.r.t. the raw scores.
    pub d_scores: Array2<T>,
}

pub fn contrastive_from_scores<T: Scalar>(scores: ArrayView2<T>, n_pos: usize) -> ContrastiveTerm<T> {
    let max_loss = T::lit(-PROB_FLOOR.ln());
    let mut loss = T::zero();
    let mut p_ca = Vec::with_capacity(scores.nrows());
    let mut d_scores = Array2::zeros(scores.raw_dim());
    for (row, mut d_row) in scores.rows().into_iter().zip(d_scores.rows_mut()) {
        let pos = row.slice(s![..n_pos]);
        // -log p_ca = LSE(all) - LSE(pos)
        let li = log_sum_exp(row) - log_sum_exp(pos);
        if li > max_loss {
            loss += max_loss;
            p_ca.push(T::lit(PROB_FLOOR));
            continue;
        }
        loss += li;
        p_ca.push((-li).exp());
        let q = softmax(row);
        let alpha = softmax(pos);
        d_row.assign(&q);
        let mut d_pos = d_row.slice_mut(s![..n_pos]);
        d_pos -= &alpha;
    }
    ContrastiveTerm { loss, p_ca, d_scores }
}

/// Contrastive attention loss of one decoding step over the surviving phrases.
/// Returns `(Σ_i -log p_ca_i, [p_ca_i])`.
pub fn contrastive_attention<T: Scalar>(
    phrases: ArrayView2<T>,
    pos_frames: ArrayView2<T>,
    neg_frames: ArrayView2<T>,
    attn: &AdditiveAttn<T>,
) -> Result<(T, Vec<T>)> {
    let frames = ndarray::concatenate(ndarray::Axis(0), &[pos_frames, neg_frames])
        .map_err(|e| crate::error::SgnError::Data(e.to_string()))?;
    let scores = relevance(phrases, frames.view(), attn)?;
    let term = contrastive_from_scores(scores.view(), pos_frames.nrows());
    Ok((term.loss, term.p_ca))
}

/// Single-row helper for tests and probes: `-log p_ca` for one score row.
pub fn contrastive_row<T: Scalar>(row: ArrayView1<T>, n_pos: usize) -> T {
    log_sum_exp(row) - log_sum_exp(row.slice(s![..n_pos]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn uniform_ten_way_is_ln_ten() {
        let p = vec![Array1::from_elem(10, 0.1f64)];
        let ce = cross_entropy(&p, &[3]);
        assert_abs_diff_eq!(ce.loss, 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ce.loss, 2.3026, epsilon = 1e-4);
    }

    #[test]
    fn one_hot_is_zero() {
        let p = vec![array![0.0, 1.0, 0.0], array![1.0, 0.0, 0.0]];
        assert_eq!(cross_entropy(&p, &[1, 0]).loss, 0.0);
    }

    #[test]
    fn matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs: Vec<Array1<f64>> = (0..3)
            .map(|_| softmax(Array1::from_shape_simple_fn(5, || StandardNormal.sample(&mut rng)).view()))
            .collect();
        let targets = [4, 0, 2];
        let mut acc = 0.0;
        for t in 0..3 {
            acc += -probs[t][targets[t]].ln();
        }
        assert_abs_diff_eq!(cross_entropy(&probs, &targets).loss, acc, epsilon = 1e-12);
    }

    #[test]
    fn zero_probability_is_clamped_and_counted() {
        let p = vec![array![1.0, 0.0]];
        let ce = cross_entropy(&p, &[1]);
        assert_eq!(ce.clamped, 1);
        assert_abs_diff_eq!(ce.loss, -(PROB_FLOOR.ln()), epsilon = 1e-9);
    }

    #[test]
    fn identical_halves_give_ln_two() {
        let row = array![[0.3, -1.2, 2.0, 0.3, -1.2, 2.0]];
        let t = contrastive_from_scores(row.view(), 3);
        assert_abs_diff_eq!(t.loss, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.p_ca[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn saturated_negatives_vanish() {
        let row = array![[0.3, 1.0, -1e6, -1e6]];
        let t = contrastive_from_scores(row.view(), 2);
        assert!(t.loss < 1e-6);
        assert_abs_diff_eq!(t.p_ca[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn p_ca_matches_naive_softmax() {
        // M = 2, N = 3
        let scores = array![[0.2, -0.4, 1.1, 0.9, -2.0, 0.0], [1.5, 0.3, -0.7, 0.1, 0.2, 2.2]];
        let t = contrastive_from_scores(scores.view(), 3);
        let mut total = 0.0;
        for i in 0..2 {
            let z: f64 = (0..6).map(|j| f64::exp(scores[[i, j]])).sum();
            let p: f64 = (0..3).map(|j| f64::exp(scores[[i, j]]) / z).sum();
            assert_abs_diff_eq!(t.p_ca[i], p, epsilon = 1e-12);
            total -= p.ln();
        }
        assert_abs_diff_eq!(t.loss, total, epsilon = 1e-12);
    }

    #[test]
    fn contrastive_gradient_matches_differences() {
        let scores = array![[0.2, -0.4, 1.1, 0.9, -2.0, 0.0], [1.5, 0.3, -0.7, 0.1, 0.2, 2.2]];
        let t = contrastive_from_scores(scores.view(), 3);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..6 {
                let mut p = scores.clone();
                p[[i, j]] += h;
                let mut m = scores.clone();
                m[[i, j]] -= h;
                let fd = (contrastive_from_scores(p.view(), 3).loss - contrastive_from_scores(m.view(), 3).loss)
                    / (2.0 * h);
                assert_abs_diff_eq!(t.d_scores[[i, j]], fd, epsilon = 1e-8);
                // positive scores lower the loss, negative scores raise it
                if j < 3 {
                    assert!(t.d_scores[[i, j]] < 0.0);
                } else {
                    assert!(t.d_scores[[i, j]] > 0.0);
                }
            }
        }
    }

    #[test]
    fn combine_weights_ca() {
        assert_eq!(combine(1.0, 2.0, 0.0), 1.0);
        assert_abs_diff_eq!(combine(1.0, 2.0, 0.16), 1.32, epsilon = 1e-15);
        assert_eq!(combine(1.0, 0.0, 1.0), 1.0);
        let b = LossBreakdown::new(0.5, 0.25, 0.16, vec![]);
        assert_eq!(b.total, 0.5 + 0.16 * 0.25);
    }

    #[test]
    fn masked_negatives_recover_alignment_softmax() {
        let scores = array![[0.2, -0.4, 1.1, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]];
        let q = softmax(scores.row(0));
        let alpha = softmax(scores.slice(s![0, ..3]));
        for j in 0..3 {
            assert_abs_diff_eq!(q[j], alpha[j], epsilon = 1e-15);
        }
    }
}
