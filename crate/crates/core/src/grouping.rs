//! Semantic grouping: redundant-phrase suppression followed by phrase/frame alignment.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::attention::{additive_scores, additive_scores_backward, ScoreTape};
use crate::error::{Result, SgnError};
use crate::linalg::{softmax_rows, softmax_rows_backward};
use crate::params::AdditiveAttn;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionResult<T> {
    /// Surviving phrase indices, strictly increasing, never empty.
    pub kept: Vec<usize>,
    /// Kept rows of `P`, `[M × d_w]`.
    pub phrases: Array2<T>,
    /// Kept rows of `A`, `[M × (t-1)]`.
    pub attention: Array2<T>,
    /// `A·Aᵀ`
    pub similarity: Array2<T>,
}

/// Discards phrases whose word-attention overlap with another surviving
/// phrase exceeds `tau`.
///
/// Pairs `(i, j)`, `i < j`, are visited in row-major order; a pair with an
/// already discarded member is skipped. For a similar pair the member with the
/// larger row sum of `R` (diagonal included) is discarded; on a tie `j` goes.
pub fn suppress<T: Scalar>(phrases: ArrayView2<T>, attention: ArrayView2<T>, tau: f64) -> SuppressionResult<T> {
    let n = attention.nrows();
    debug_assert_eq!(phrases.nrows(), n);
    let similarity = attention.dot(&attention.t());
    let kept = suppressed_indices(similarity.view(), tau);
    SuppressionResult {
        phrases: phrases.select(Axis(0), &kept),
        attention: attention.select(Axis(0), &kept),
        kept,
        similarity,
    }
}

fn suppressed_indices<T: Scalar>(r: ArrayView2<T>, tau: f64) -> Vec<usize> {
    let n = r.nrows();
    let tau = T::lit(tau);
    let sums: Vec<T> = r.rows().into_iter().map(|row| row.sum()).collect();
    let mut removed = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            if removed[i] {
                break;
            }
            if removed[j] {
                continue;
            }
            if r[[i, j]] > tau {
                if sums[i] > sums[j] {
                    removed[i] = true;
                } else {
                    removed[j] = true;
                }
            }
        }
    }
    (0..n).filter(|&i| !removed[i]).collect()
}

/// Keeps every phrase (suppressor disabled).
pub fn keep_all<T: Scalar>(phrases: ArrayView2<T>, attention: ArrayView2<T>) -> SuppressionResult<T> {
    SuppressionResult {
        kept: (0..phrases.nrows()).collect(),
        phrases: phrases.to_owned(),
        attention: attention.to_owned(),
        similarity: attention.dot(&attention.t()),
    }
}

/// Semantic groups `s_i = [p̂_i ; v^p_i]` with their frame attention.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGroupSet<T> {
    /// `[M × (d_w + d_v)]`
    pub groups: Array2<T>,
    /// `[M × N]`, row-stochastic over the video's own frames.
    pub alpha: Array2<T>,
    /// `[M × d_v]`
    pub aligned: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct AlignTape<T> {
    scores: Array2<T>,
    score_tape: ScoreTape<T>,
    frames: Array2<T>,
    alpha: Array2<T>,
    d_w: usize,
}

impl<T: Scalar> AlignTape<T> {
    /// Raw relevance against the positive frames followed (when present)
    /// by the negative frames: `[M × N]` or `[M × 2N]`.
    pub fn scores(&self) -> ArrayView2<'_, T> {
        self.scores.view()
    }

    pub fn n_pos(&self) -> usize {
        self.frames.nrows()
    }
}

fn check_finite<T: Scalar>(attn: &AdditiveAttn<T>) -> Result<()> {
    let ok = attn.u.iter().chain(&attn.wq).chain(&attn.wk).chain(&attn.b).all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(SgnError::Numeric("non-finite relevance parameters".into()))
    }
}

/// Raw phrase/frame relevance, `[M × N]`, before normalization.
pub fn relevance<T: Scalar>(
    phrases: ArrayView2<T>,
    frames: ArrayView2<T>,
    attn: &AdditiveAttn<T>,
) -> Result<Array2<T>> {
    check_finite(attn)?;
    Ok(additive_scores(attn, phrases, frames).0)
}

/// Aligns frames to phrases. When `negatives` is given their relevance is
/// scored as well (for the contrastive loss) but does not enter `alpha`.
pub fn align<T: Scalar>(
    phrases: ArrayView2<T>,
    frames: ArrayView2<T>,
    negatives: Option<ArrayView2<T>>,
    attn: &AdditiveAttn<T>,
) -> Result<(SemanticGroupSet<T>, AlignTape<T>)> {
    check_finite(attn)?;
    let n = frames.nrows();
    let keys = match negatives {
        Some(neg) => concatenate(Axis(0), &[frames, neg]).map_err(|e| SgnError::Data(e.to_string()))?,
        None => frames.to_owned(),
    };
    let (scores, score_tape) = additive_scores(attn, phrases, keys.view());
    let alpha = softmax_rows(scores.slice(s![.., ..n]));
    let aligned = alpha.dot(&frames);
    let groups = concatenate(Axis(1), &[phrases, aligned.view()]).expect("row counts agree");
    let tape = AlignTape {
        scores,
        score_tape,
        frames: frames.to_owned(),
        alpha: alpha.clone(),
        d_w: phrases.ncols(),
    };
    Ok((SemanticGroupSet { groups, alpha, aligned }, tape))
}

/// Backward of [`align`]. `d_scores_extra` is an additional gradient on the
/// raw scores (the contrastive term). Returns the gradient w.r.t. the phrases.
pub fn align_backward<T: Scalar>(
    attn: &AdditiveAttn<T>,
    tape: &AlignTape<T>,
    d_groups: ArrayView2<T>,
    d_scores_extra: Option<ArrayView2<T>>,
    grad: &mut AdditiveAttn<T>,
) -> Array2<T> {
    let n = tape.frames.nrows();
    let d_aligned = d_groups.slice(s![.., tape.d_w..]);
    let d_alpha = d_aligned.dot(&tape.frames.t());
    let mut d_scores = Array2::zeros(tape.scores.raw_dim());
    d_scores
        .slice_mut(s![.., ..n])
        .assign(&softmax_rows_backward(tape.alpha.view(), d_alpha.view()));
    if let Some(extra) = d_scores_extra {
        d_scores += &extra;
    }
    let (d_q, _) = additive_scores_backward(attn, &tape.score_tape, d_scores.view(), grad);
    d_q + d_groups.slice(s![.., ..tape.d_w])
}
