//! One decoding step end to end (phrases -> groups -> attention -> LSTM -> word
//! distribution) and its reverse-mode gradient.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::datamodel::{AblationFlags, Caption, Config, SgnRng, Specials, VideoFeatures, Vocabulary};
use crate::decoder::cell::{
    attend_backward, attend_groups, lstm_backward, lstm_forward, word_logits, AttendTape, DecoderState, LstmTape,
    StepOutput,
};
use crate::error::{Result, SgnError};
use crate::grouping::{align, align_backward, keep_all, suppress, AlignTape};
use crate::linalg::{add_outer, softmax};
use crate::objectives::{contrastive_from_scores, cross_entropy};
use crate::params::{ModelDims, Params};
use crate::phrase_encoder::{encode_backward, encode_phrases, EncoderTape};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub dims: ModelDims,
    pub flags: AblationFlags,
    pub tau: f64,
    pub lambda: f64,
    pub specials: Specials,
    pub params: Params<T>,
}

/// Everything one step computed, kept for the backward pass and for inspection.
#[derive(Debug, Clone)]
pub struct StepTape<T> {
    /// Token fed to the LSTM (`<sos>` at `t = 1`).
    pub w_prev: usize,
    /// Rows of the phrase-encoder input.
    pub word_ids: Vec<usize>,
    positions: Vec<usize>,
    /// Full word-attention matrix `A` (identity when grouping by word).
    pub word_attention: Option<Array2<T>>,
    pub kept: Vec<usize>,
    /// Frame attention of the surviving phrases.
    pub alpha: Option<Array2<T>>,
    enc: Option<EncoderTape<T>>,
    align: Option<AlignTape<T>>,
    attend: AttendTape<T>,
    lstm: LstmTape<T>,
    h: Array1<T>,
}

impl<T: Scalar> StepTape<T> {
    /// Raw relevance of the kept phrases (positives then negatives).
    pub fn relevance(&self) -> Option<ndarray::ArrayView2<'_, T>> {
        self.align.as_ref().map(|a| a.scores())
    }
}

/// Teacher-forced pass over one (video, caption) pair.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub steps: Vec<StepTape<T>>,
    pub outputs: Vec<StepOutput<T>>,
    /// Gold tokens followed by `<eos>`.
    pub targets: Vec<usize>,
    pub ce: T,
    pub ce_clamped: usize,
    /// Σ over steps and surviving groups of `-log p_ca`; zero without negatives.
    pub ca: T,
    pub p_ca: Vec<T>,
    pub n_groups: usize,
    ca_grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn n_tokens(&self) -> usize {
        self.targets.len()
    }

    /// `ce + lambda * ca` as optimized for this example.
    pub fn objective(&self, lambda: f64) -> T {
        self.ce + T::lit(lambda) * self.ca
    }
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: &Config, vocab: &Vocabulary, flags: AblationFlags, rng: &mut SgnRng) -> Result<Self> {
        cfg.validate()?;
        flags.validate()?;
        let dims = ModelDims::from_config(cfg, vocab.len(), flags);
        let params = Params::init(&dims, rng);
        Ok(Model {
            dims,
            flags,
            tau: cfg.tau,
            lambda: cfg.lambda,
            specials: vocab.specials(),
            params,
        })
    }

    pub fn initial_state(&self) -> DecoderState<T> {
        DecoderState::initial(self.dims.d_h)
    }

    fn phrase_input(&self, prefix: &[usize]) -> Result<(Array2<T>, Vec<usize>, Vec<usize>)> {
        if prefix.len() > self.dims.max_len {
            return Err(SgnError::Invalid(format!(
                "prefix of {} tokens exceeds max_len {}",
                prefix.len(),
                self.dims.max_len
            )));
        }
        let (ids, positions): (Vec<usize>, Vec<usize>) = if prefix.is_empty() {
            (vec![self.specials.sos], vec![0])
        } else {
            (prefix.to_vec(), (1..=prefix.len()).collect())
        };
        let mut w = self.params.embed.select(Axis(0), &ids);
        if self.dims.positional {
            w += &self.params.pos.select(Axis(0), &positions);
        }
        Ok((w, ids, positions))
    }

    /// Advances one step. `negatives` only adds contrastive scores to the tape.
    pub fn step(
        &self,
        video: &VideoFeatures<T>,
        state: &DecoderState<T>,
        negatives: Option<&VideoFeatures<T>>,
    ) -> Result<(DecoderState<T>, StepOutput<T>, StepTape<T>)> {
        let p = &self.params;
        if video.d_v() != self.dims.d_v {
            return Err(SgnError::Data(format!(
                "{}: frame width {} does not match the model ({})",
                video.video_id,
                video.d_v(),
                self.dims.d_v
            )));
        }
        let w_prev = state.prefix.last().copied().unwrap_or(self.specials.sos);
        let frames = video.frames();

        let mut tape_enc = None;
        let mut tape_align = None;
        let mut word_attention = None;
        let mut kept = Vec::new();
        let mut alpha = None;
        let mut word_ids = Vec::new();
        let mut positions = Vec::new();

        let keys = if self.dims.semantic {
            let (w, ids, pos) = self.phrase_input(&state.prefix)?;
            let (phrases, attention) = if self.flags.group_by_word {
                let n = w.nrows();
                (w, Array2::eye(n))
            } else {
                let (ps, et) = encode_phrases(w.view(), &p.enc)?;
                tape_enc = Some(et);
                (ps.phrases, ps.attention)
            };
            let sup = if self.flags.use_phrase_suppressor {
                suppress(phrases.view(), attention.view(), self.tau)
            } else {
                keep_all(phrases.view(), attention.view())
            };
            let (groups, at) = align(
                sup.phrases.view(),
                frames,
                negatives.map(|n| n.frames()),
                &p.align,
            )?;
            word_ids = ids;
            positions = pos;
            word_attention = Some(attention);
            kept = sup.kept;
            alpha = Some(groups.alpha);
            tape_align = Some(at);
            groups.groups
        } else {
            frames.to_owned()
        };

        let (beta, x, attend) = attend_groups(state.h.view(), keys.view(), &p.group);
        let emb = p.embed.row(w_prev);
        let input = concatenate(Axis(0), &[x.view(), emb]).expect("1-d concat");
        let (h, c, lstm) = lstm_forward(&p.lstm, input.view(), state.h.view(), state.c.view());
        let logits = word_logits(&p.out_w, &p.out_b, h.view());
        let probs = softmax(logits.view());

        let prefix = state.prefix.clone();
        let next = DecoderState {
            h: h.clone(),
            c,
            prefix,
        };
        let tape = StepTape {
            w_prev,
            word_ids,
            positions,
            word_attention,
            kept,
            alpha,
            enc: tape_enc,
            align: tape_align,
            attend,
            lstm,
            h,
        };
        Ok((next, StepOutput { beta, x, logits, probs }, tape))
    }

    /// Teacher-forced pass: the gold prefix feeds every step, targets end with `<eos>`.
    pub fn teacher_forced(
        &self,
        video: &VideoFeatures<T>,
        caption: &Caption,
        negative: Option<&VideoFeatures<T>>,
    ) -> Result<ForwardPass<T>> {
        let mut targets = caption.tokens().to_vec();
        targets.push(self.specials.eos);
        let use_ca = self.flags.use_ca_loss && negative.is_some();
        let negative = if use_ca { negative } else { None };
        let mut state = self.initial_state();
        let mut steps = Vec::with_capacity(targets.len());
        let mut outputs = Vec::with_capacity(targets.len());
        let mut ca = T::zero();
        let mut p_ca = Vec::new();
        let mut ca_grads = Vec::with_capacity(targets.len());
        let mut n_groups = 0;
        for &y in &targets {
            let (mut next, out, tape) = self.step(video, &state, negative)?;
            if use_ca {
                let scores = tape.relevance().expect("semantic mode has relevance");
                let term = contrastive_from_scores(scores, video.n_frames());
                ca += term.loss;
                n_groups += term.p_ca.len();
                p_ca.extend(term.p_ca);
                ca_grads.push(Some(term.d_scores));
            } else {
                ca_grads.push(None);
            }
            next.prefix.push(y);
            state = next;
            steps.push(tape);
            outputs.push(out);
        }
        let probs: Vec<Array1<T>> = outputs.iter().map(|o| o.probs.clone()).collect();
        let ce = cross_entropy(&probs, &targets);
        Ok(ForwardPass {
            steps,
            outputs,
            targets,
            ce: ce.loss,
            ce_clamped: ce.clamped,
            ca,
            p_ca,
            n_groups,
            ca_grads,
        })
    }

    /// Gradient of `ce_weight * CE + ca_weight * CA` for one teacher-forced pass.
    pub fn backward(&self, pass: &ForwardPass<T>, ce_weight: T, ca_weight: T) -> Params<T> {
        let p = &self.params;
        let mut g = p.zeros_like();
        let d_h = self.dims.d_h;
        let key_dim = self.dims.key_dim();
        let mut dh_next = Array1::zeros(d_h);
        let mut dc_next = Array1::zeros(d_h);
        for ((tape, out), (&y, ca_grad)) in pass
            .steps
            .iter()
            .zip(&pass.outputs)
            .zip(pass.targets.iter().zip(&pass.ca_grads))
            .rev()
        {
            let mut d_logits = out.probs.clone();
            d_logits[y] -= T::one();
            d_logits *= ce_weight;
            add_outer(&mut g.out_w, d_logits.view(), tape.h.view());
            g.out_b += &d_logits;
            let d_h_t = p.out_w.t().dot(&d_logits) + &dh_next;
            let (d_input, mut d_h_prev, d_c_prev) =
                lstm_backward(&p.lstm, &tape.lstm, d_h_t.view(), dc_next.view(), &mut g.lstm);
            let mut emb_row = g.embed.row_mut(tape.w_prev);
            emb_row += &d_input.slice(s![key_dim..]);
            let (d_h_attn, d_keys) = attend_backward(&p.group, &tape.attend, d_input.slice(s![..key_dim]), &mut g.group);
            d_h_prev += &d_h_attn;

            if let Some(at) = &tape.align {
                let extra = ca_grad.as_ref().map(|d| d * ca_weight);
                let d_phat = align_backward(&p.align, at, d_keys.view(), extra.as_ref().map(|e| e.view()), &mut g.align);
                let mut d_phr = Array2::zeros((tape.word_ids.len(), self.dims.d_w));
                for (row, &k) in tape.kept.iter().enumerate() {
                    let mut r = d_phr.row_mut(k);
                    r += &d_phat.row(row);
                }
                let d_w = match &tape.enc {
                    Some(et) => encode_backward(et, &p.enc, d_phr.view(), &mut g.enc),
                    None => d_phr,
                };
                for (r, (&id, &pos)) in tape.word_ids.iter().zip(&tape.positions).enumerate() {
                    let mut e = g.embed.row_mut(id);
                    e += &d_w.row(r);
                    if self.dims.positional {
                        let mut q = g.pos.row_mut(pos);
                        q += &d_w.row(r);
                    }
                }
            }
            dh_next = d_h_prev;
            dc_next = d_c_prev;
        }
        g
    }

    /// Objective value and gradient for one example, scaled by `weight`.
    pub fn loss_and_grad(
        &self,
        video: &VideoFeatures<T>,
        caption: &Caption,
        negative: Option<&VideoFeatures<T>>,
        weight: T,
    ) -> Result<(ForwardPass<T>, Params<T>)> {
        let pass = self.teacher_forced(video, caption, negative)?;
        let grads = self.backward(&pass, weight, weight * T::lit(self.lambda));
        Ok((pass, grads))
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            dims: self.dims,
            flags: self.flags,
            tau: self.tau,
            lambda: self.lambda,
            specials: self.specials,
            params: self.params.cast(),
        }
    }
}
