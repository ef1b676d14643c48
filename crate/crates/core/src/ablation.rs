//! Captioning a corpus with a trained model and comparing component
//! ablations trained under identical settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Example};
use crate::datamodel::{AblationFlags, Config, Vocabulary};
use crate::decoder::{decode_beam, decode_greedy};
use crate::error::Result;
use crate::inspect::alignment_mass;
use crate::metrics::{evaluate, EvalReport};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::trainer::{train, TrainOptions};

/// Beam search with `beam` > 1, greedy decoding otherwise.
pub fn caption_videos<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocabulary,
    examples: &[Example<T>],
    beam: usize,
    max_len: usize,
    length_norm: bool,
) -> Result<Vec<String>> {
    examples
        .par_iter()
        .map(|ex| {
            let h = if beam <= 1 {
                decode_greedy(model, &ex.video, max_len)?
            } else {
                decode_beam(model, &ex.video, beam, max_len, length_norm)?
            };
            Ok(vocab.decode_string(&h.tokens))
        })
        .collect()
}

/// Decodes every example and scores it against its reference texts.
pub fn evaluate_model<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocabulary,
    examples: &[Example<T>],
    beam: usize,
    max_len: usize,
    length_norm: bool,
) -> Result<EvalReport> {
    let cands = caption_videos(model, vocab, examples, beam, max_len, length_norm)?;
    let ids: Vec<String> = examples.iter().map(|e| e.id().to_string()).collect();
    let refs: Vec<Vec<String>> = examples.iter().map(|e| e.texts.clone()).collect();
    evaluate(&ids, &cands, &refs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub label: String,
    pub flags: AblationFlags,
    pub seed: u64,
    pub epochs: usize,
    pub final_train_ce: f64,
    pub bleu4: f64,
    pub cider_d: f64,
    pub rouge_l: f64,
    /// Planted-alignment mass on the evaluation split, when segments are known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<f64>,
}

/// Trains one model per `(flags, seed)` and evaluates it on `eval_set`.
/// `concept_of` maps vocabulary indices to planted concepts, if any.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation<T: Scalar>(
    train_set: &Corpus<T>,
    eval_set: &Corpus<T>,
    vocab: &Vocabulary,
    cfg: &Config,
    variants: &[AblationFlags],
    seeds: &[u64],
    concept_of: Option<&(dyn Fn(usize) -> Option<usize> + Sync)>,
    mut on_run: impl FnMut(&AblationRun),
) -> Result<Vec<AblationRun>> {
    let mut runs = Vec::new();
    for &seed in seeds {
        for &flags in variants {
            let cfg = Config { seed, ..cfg.clone() };
            let outcome = train(train_set, None, vocab, &cfg, flags, &TrainOptions::default())?;
            let model = &outcome.last.model;
            let report = evaluate_model(model, vocab, &eval_set.examples, cfg.beam_size, cfg.max_len, cfg.length_norm)?;
            let alignment = match concept_of {
                Some(f) => alignment_mass(model, &eval_set.examples, f)?,
                None => None,
            };
            let run = AblationRun {
                label: flags.label(),
                flags,
                seed,
                epochs: outcome.epochs.len(),
                final_train_ce: outcome.final_train_ce().unwrap_or(f64::NAN),
                bleu4: report.bleu4,
                cider_d: report.cider_d,
                rouge_l: report.rouge_l,
                alignment,
            };
            on_run(&run);
            runs.push(run);
        }
    }
    Ok(runs)
}
