use std::cmp::Ordering;

use crate::datamodel::{Specials, VideoFeatures};
use crate::decoder::cell::{DecoderState, StepOutput};
use crate::error::Result;
use crate::model::{Model, StepTape};
use crate::scalar::Scalar;

/// A decoded caption. `tokens` excludes `<eos>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    /// Summed log-probability of the emitted tokens (including `<eos>`).
    pub log_prob: f64,
    /// `log_prob`, divided by the token count when length normalization is on.
    pub score: f64,
    /// Hit `max_len` without emitting `<eos>`.
    pub truncated: bool,
}

impl Hypothesis {
    fn new(tokens: Vec<usize>, log_prob: f64, truncated: bool, length_norm: bool) -> Self {
        let n = tokens.len() + usize::from(!truncated);
        let score = if length_norm { log_prob / n.max(1) as f64 } else { log_prob };
        Hypothesis {
            tokens,
            log_prob,
            score,
            truncated,
        }
    }
}

/// Tokens never emitted by the decoder.
pub fn banned_tokens(s: Specials) -> [usize; 3] {
    [s.pad, s.sos, s.unk]
}

fn log_probs<T: Scalar>(out: &StepOutput<T>, banned: &[usize]) -> Vec<(usize, f64)> {
    out.probs
        .iter()
        .enumerate()
        .filter(|(i, _)| !banned.contains(i))
        .map(|(i, &p)| (i, p.as_f64().ln()))
        .collect()
}

fn by_score_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// One greedy step with its full trace.
#[derive(Debug, Clone)]
pub struct TracedStep<T> {
    pub prefix: Vec<usize>,
    pub output: StepOutput<T>,
    pub tape: StepTape<T>,
    pub predicted: usize,
}

/// Argmax decoding; each predicted word is appended to the prefix that the
/// phrase encoder sees at the next step.
pub fn decode_greedy<T: Scalar>(model: &Model<T>, video: &VideoFeatures<T>, max_len: usize) -> Result<Hypothesis> {
    decode_greedy_traced(model, video, max_len).map(|(h, _)| h)
}

pub fn decode_greedy_traced<T: Scalar>(
    model: &Model<T>,
    video: &VideoFeatures<T>,
    max_len: usize,
) -> Result<(Hypothesis, Vec<TracedStep<T>>)> {
    let banned = banned_tokens(model.specials);
    let eos = model.specials.eos;
    let mut state = model.initial_state();
    let mut log_prob = 0.0;
    let mut trace = Vec::new();
    for _ in 0..max_len {
        let (mut next, out, tape) = model.step(video, &state, None)?;
        let mut lps = log_probs(&out, &banned);
        lps.sort_by(by_score_desc);
        let (best, lp) = lps[0];
        log_prob += lp;
        trace.push(TracedStep {
            prefix: state.prefix.clone(),
            output: out,
            tape,
            predicted: best,
        });
        if best == eos {
            return Ok((Hypothesis::new(state.prefix, log_prob, false, true), trace));
        }
        next.prefix.push(best);
        state = next;
    }
    Ok((Hypothesis::new(state.prefix, log_prob, true, true), trace))
}

struct Open<T> {
    state: DecoderState<T>,
    log_prob: f64,
}

/// Beam search over log-probabilities.
///
/// Each hypothesis keeps its own prefix, so phrases and groups are rebuilt per
/// hypothesis. A hypothesis may finish with `<eos>` when `<eos>` ranks among
/// its own `beam_size` best continuations; the best `beam_size` non-`<eos>`
/// continuations over all hypotheses stay open. Search stops once `beam_size`
/// hypotheses have finished; at the last step every continuation is final.
/// With `beam_size = 1` this is exactly greedy decoding.
pub fn decode_beam<T: Scalar>(
    model: &Model<T>,
    video: &VideoFeatures<T>,
    beam_size: usize,
    max_len: usize,
    length_norm: bool,
) -> Result<Hypothesis> {
    let beam_size = beam_size.max(1);
    let banned = banned_tokens(model.specials);
    let eos = model.specials.eos;
    let mut open = vec![Open {
        state: model.initial_state(),
        log_prob: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 1..=max_len {
        let last = step == max_len;
        let mut children: Vec<(f64, usize, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(open.len());
        for (pi, hyp) in open.iter().enumerate() {
            let (next, out, _) = model.step(video, &hyp.state, None)?;
            let mut lps = log_probs(&out, &banned);
            lps.sort_by(by_score_desc);
            for (rank, &(tok, lp)) in lps.iter().enumerate() {
                let total = hyp.log_prob + lp;
                if tok == eos {
                    if rank < beam_size {
                        finished.push(Hypothesis::new(hyp.state.prefix.clone(), total, false, length_norm));
                    }
                } else {
                    children.push((total, pi, tok));
                }
            }
            next_states.push(next);
        }
        children.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        if last {
            for (total, pi, tok) in children {
                let mut tokens = next_states[pi].prefix.clone();
                tokens.push(tok);
                finished.push(Hypothesis::new(tokens, total, true, length_norm));
            }
            break;
        }
        open = children
            .into_iter()
            .take(beam_size)
            .map(|(total, pi, tok)| {
                let mut state = next_states[pi].clone();
                state.prefix.push(tok);
                Open { state, log_prob: total }
            })
            .collect();
        if finished.len() >= beam_size || open.is_empty() {
            break;
        }
    }
    let mut best: Option<Hypothesis> = None;
    for h in finished {
        if best.as_ref().is_none_or(|b| h.score > b.score) {
            best = Some(h);
        }
    }
    Ok(best.expect("at least one hypothesis finishes"))
}
