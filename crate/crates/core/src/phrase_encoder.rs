//! Self-attention over the partially decoded caption.
//!
//! Each output row is a phrase: a convex combination (row of `A`) of the
//! projected word vectors. At step `t` the input has `t - 1` rows (one row,
//! `E[<sos>]`, at `t = 1`).

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SgnError};
use crate::linalg::{softmax_rows, softmax_rows_backward};
use crate::params::SelfAttnLayer;
use crate::scalar::Scalar;

/// Phrase representations and the word-attention matrix that built them.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseState<T> {
    /// `[(t-1) × d_w]`
    pub phrases: Array2<T>,
    /// `[(t-1) × (t-1)]`, row-stochastic.
    pub attention: Array2<T>,
    pub t: usize,
}

#[derive(Debug, Clone)]
struct LayerTape<T> {
    x: Array2<T>,
    qm: Array2<T>,
    km: Array2<T>,
    vm: Array2<T>,
    a: Array2<T>,
}

/// Intermediates retained for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTape<T> {
    layers: Vec<LayerTape<T>>,
}

pub fn encode_phrases<T: Scalar>(
    words: ArrayView2<T>,
    layers: &[SelfAttnLayer<T>],
) -> Result<(PhraseState<T>, EncoderTape<T>)> {
    if words.nrows() == 0 {
        return Err(SgnError::Invalid("phrase encoder needs at least one word".into()));
    }
    let scale = T::one() / T::from_usize(words.ncols()).unwrap().sqrt();
    let mut x = words.to_owned();
    let mut tapes = Vec::with_capacity(layers.len());
    for layer in layers {
        let qm = x.dot(&layer.q);
        let km = x.dot(&layer.k);
        let vm = x.dot(&layer.v);
        let logits = qm.dot(&km.t()) * scale;
        let a = softmax_rows(logits.view());
        let next = a.dot(&vm);
        tapes.push(LayerTape { x, qm, km, vm, a });
        x = next;
    }
    let attention = tapes.last().expect("at least one layer").a.clone();
    let state = PhraseState {
        t: x.nrows() + 1,
        phrases: x,
        attention,
    };
    Ok((state, EncoderTape { layers: tapes }))
}

/// Accumulates parameter gradients into `grads` and returns the gradient
/// with respect to the input word matrix.
pub fn encode_backward<T: Scalar>(
    tape: &EncoderTape<T>,
    layers: &[SelfAttnLayer<T>],
    d_phrases: ArrayView2<T>,
    grads: &mut [SelfAttnLayer<T>],
) -> Array2<T> {
    let mut dx = d_phrases.to_owned();
    for ((lt, layer), g) in tape.layers.iter().zip(layers).zip(grads.iter_mut()).rev() {
        let scale = T::one() / T::from_usize(lt.x.ncols()).unwrap().sqrt();
        // out = A · Vm
        let d_a = dx.dot(&lt.vm.t());
        let d_vm = lt.a.t().dot(&dx);
        let d_logits = softmax_rows_backward(lt.a.view(), d_a.view()) * scale;
        let d_qm = d_logits.dot(&lt.km);
        let d_km = d_logits.t().dot(&lt.qm);
        g.q += &lt.x.t().dot(&d_qm);
        g.k += &lt.x.t().dot(&d_km);
        g.v += &lt.x.t().dot(&d_vm);
        dx = d_qm.dot(&layer.q.t()) + d_km.dot(&layer.k.t()) + d_vm.dot(&layer.v.t());
    }
    dx
}
