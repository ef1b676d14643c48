//! Attention traces: per-step records of how groups were formed during
//! greedy decoding, and the planted-alignment probe used on synthetic data.

use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::datamodel::Vocabulary;
use crate::decoder::decode_greedy_traced;
use crate::error::Result;
use crate::model::Model;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordWeight {
    pub position: usize,
    pub word: String,
    pub weight: f64,
}

/// One decoding step. `alpha` is `[kept phrases × N]`; `beta` covers the
/// groups (or frames in temporal-attention mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectRecord {
    pub video_id: String,
    pub t: usize,
    pub prefix: Vec<String>,
    pub kept: Vec<usize>,
    pub top_words: Vec<Vec<WordWeight>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub predicted: String,
}

pub fn inspect_video<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocabulary,
    example: &Example<T>,
    max_len: usize,
    top_k: usize,
) -> Result<Vec<InspectRecord>> {
    let (_, trace) = decode_greedy_traced(model, &example.video, max_len)?;
    let mut out = Vec::with_capacity(trace.len());
    for (i, step) in trace.into_iter().enumerate() {
        let tape = &step.tape;
        let mut top_words = Vec::new();
        if let Some(a) = &tape.word_attention {
            for &k in &tape.kept {
                let mut row: Vec<WordWeight> = a
                    .row(k)
                    .iter()
                    .enumerate()
                    .map(|(j, &w)| WordWeight {
                        position: j,
                        word: vocab.token(tape.word_ids[j]).to_string(),
                        weight: w.as_f64(),
                    })
                    .collect();
                row.sort_by(|x, y| y.weight.total_cmp(&x.weight).then(x.position.cmp(&y.position)));
                row.truncate(top_k);
                top_words.push(row);
            }
        }
        let alpha = tape
            .alpha
            .as_ref()
            .map(|a| a.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect())
            .unwrap_or_default();
        out.push(InspectRecord {
            video_id: example.id().to_string(),
            t: i + 1,
            prefix: vocab.decode(&step.prefix),
            kept: tape.kept.clone(),
            top_words,
            alpha,
            beta: step.output.beta.iter().map(|v| v.as_f64()).collect(),
            predicted: vocab.token(step.predicted).to_string(),
        });
    }
    Ok(out)
}

/// Mean alpha mass that phrases place inside their concept's planted
/// segment, over teacher-forced passes of every first caption.
///
/// A kept phrase is scored when the word it attends to most is a concept
/// token (as reported by `concept_of`) whose segment is known for the video.
/// Returns `None` when nothing qualifies, e.g. in temporal-attention mode.
pub fn alignment_mass<T: Scalar>(
    model: &Model<T>,
    examples: &[Example<T>],
    concept_of: impl Fn(usize) -> Option<usize>,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in examples {
        let Some(caption) = ex.captions.first() else { continue };
        let pass = model.teacher_forced(&ex.video, caption, None)?;
        for tape in &pass.steps {
            let (Some(a), Some(alpha)) = (&tape.word_attention, &tape.alpha) else { continue };
            for (row, &k) in tape.kept.iter().enumerate() {
                let arow = a.row(k);
                let top = (0..arow.len())
                    .max_by(|&x, &y| arow[x].partial_cmp(&arow[y]).unwrap_or(std::cmp::Ordering::Equal).then(y.cmp(&x)))
                    .expect("non-empty phrase row");
                let Some(concept) = concept_of(tape.word_ids[top]) else { continue };
                let Some((_, range)) = ex.concept_segments.iter().find(|(c, _)| *c == concept) else { continue };
                total += alpha.row(row).slice(ndarray::s![range.clone()]).iter().map(|v| v.as_f64()).sum::<f64>();
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}
