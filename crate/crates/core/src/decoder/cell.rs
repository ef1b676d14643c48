//! Group attention, the recurrent cell and the word head.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::attention::{additive_scores, additive_scores_backward, ScoreTape};
use crate::linalg::{add_outer, sigmoid, softmax, softmax_backward};
use crate::params::{AdditiveAttn, LstmCell};
use crate::scalar::Scalar;

/// Recurrent state plus the tokens decoded so far (`t - 1` of them).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<T> {
    pub h: Array1<T>,
    pub c: Array1<T>,
    pub prefix: Vec<usize>,
}

impl<T: Scalar> DecoderState<T> {
    pub fn initial(d_h: usize) -> Self {
        DecoderState {
            h: Array1::zeros(d_h),
            c: Array1::zeros(d_h),
            prefix: Vec::new(),
        }
    }

    /// 1-based index of the word about to be predicted.
    pub fn t(&self) -> usize {
        self.prefix.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    /// Attention over the semantic groups (or frames in TA mode).
    pub beta: Array1<T>,
    pub x: Array1<T>,
    pub logits: Array1<T>,
    pub probs: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct AttendTape<T> {
    keys: Array2<T>,
    beta: Array1<T>,
    score_tape: ScoreTape<T>,
}

/// `beta = softmax_i(u_dᵀ tanh(U_d h + H_d s_i + b_d))`, `x = Σ_i beta_i s_i`.
pub fn attend_groups<T: Scalar>(
    h_prev: ArrayView1<T>,
    keys: ArrayView2<T>,
    attn: &AdditiveAttn<T>,
) -> (Array1<T>, Array1<T>, AttendTape<T>) {
    let query = h_prev.insert_axis(Axis(0));
    let (scores, score_tape) = additive_scores(attn, query, keys);
    let beta = softmax(scores.row(0));
    let x = beta.dot(&keys);
    let tape = AttendTape {
        keys: keys.to_owned(),
        beta: beta.clone(),
        score_tape,
    };
    (beta, x, tape)
}

/// Returns `(d_h_prev, d_keys)`.
pub fn attend_backward<T: Scalar>(
    attn: &AdditiveAttn<T>,
    tape: &AttendTape<T>,
    d_x: ArrayView1<T>,
    grad: &mut AdditiveAttn<T>,
) -> (Array1<T>, Array2<T>) {
    let d_beta = tape.keys.dot(&d_x);
    let mut d_keys = Array2::zeros(tape.keys.raw_dim());
    add_outer(&mut d_keys, tape.beta.view(), d_x);
    let d_scores = softmax_backward(tape.beta.view(), d_beta.view()).insert_axis(Axis(0));
    let (d_q, d_k) = additive_scores_backward(attn, &tape.score_tape, d_scores.view(), grad);
    d_keys += &d_k;
    (d_q.row(0).to_owned(), d_keys)
}

#[derive(Debug, Clone)]
pub struct LstmTape<T> {
    input: Array1<T>,
    h_prev: Array1<T>,
    c_prev: Array1<T>,
    i: Array1<T>,
    f: Array1<T>,
    g: Array1<T>,
    o: Array1<T>,
    tanh_c: Array1<T>,
}

pub fn lstm_forward<T: Scalar>(
    cell: &LstmCell<T>,
    input: ArrayView1<T>,
    h_prev: ArrayView1<T>,
    c_prev: ArrayView1<T>,
) -> (Array1<T>, Array1<T>, LstmTape<T>) {
    let n = h_prev.len();
    let pre = cell.w_ih.dot(&input) + cell.w_hh.dot(&h_prev) + &cell.b;
    let i = pre.slice(s![..n]).mapv(sigmoid);
    let f = pre.slice(s![n..2 * n]).mapv(sigmoid);
    let g = pre.slice(s![2 * n..3 * n]).mapv(T::tanh);
    let o = pre.slice(s![3 * n..]).mapv(sigmoid);
    let c = &f * &c_prev + &i * &g;
    let tanh_c = c.mapv(T::tanh);
    let h = &o * &tanh_c;
    let tape = LstmTape {
        input: input.to_owned(),
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (h, c, tape)
}

/// Returns `(d_input, d_h_prev, d_c_prev)`.
pub fn lstm_backward<T: Scalar>(
    cell: &LstmCell<T>,
    tape: &LstmTape<T>,
    d_h: ArrayView1<T>,
    d_c_next: ArrayView1<T>,
    grad: &mut LstmCell<T>,
) -> (Array1<T>, Array1<T>, Array1<T>) {
    let n = d_h.len();
    let one = T::one();
    let d_o = &d_h * &tape.tanh_c;
    let mut d_c = d_c_next.to_owned();
    for k in 0..n {
        let tc = tape.tanh_c[k];
        d_c[k] += d_h[k] * tape.o[k] * (one - tc * tc);
    }
    let mut d_pre = Array1::zeros(4 * n);
    for k in 0..n {
        let (i, f, g, o) = (tape.i[k], tape.f[k], tape.g[k], tape.o[k]);
        d_pre[k] = d_c[k] * g * i * (one - i);
        d_pre[n + k] = d_c[k] * tape.c_prev[k] * f * (one - f);
        d_pre[2 * n + k] = d_c[k] * i * (one - g * g);
        d_pre[3 * n + k] = d_o[k] * o * (one - o);
    }
    add_outer(&mut grad.w_ih, d_pre.view(), tape.input.view());
    add_outer(&mut grad.w_hh, d_pre.view(), tape.h_prev.view());
    grad.b += &d_pre;
    let d_input = cell.w_ih.t().dot(&d_pre);
    let d_h_prev = cell.w_hh.t().dot(&d_pre);
    let d_c_prev = &d_c * &tape.f;
    (d_input, d_h_prev, d_c_prev)
}

pub fn word_logits<T: Scalar>(w: &Array2<T>, b: &Array1<T>, h: ArrayView1<T>) -> Array1<T> {
    w.dot(&h) + b
}
