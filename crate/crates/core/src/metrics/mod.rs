//! Caption-quality metrics: corpus BLEU-4, CIDEr-D and ROUGE-L.
//!
//! Inputs are tokenized with [`metric_tokens`]: lowercase, every character
//! that is neither alphanumeric nor whitespace becomes a separator.

mod bleu;
mod cider;
mod rouge;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu4, sentence_bleu4};
pub use cider::{cider_d, CiderScores, CIDER_SIGMA};
pub use rouge::{rouge_l, rouge_l_with_beta, ROUGE_BETA_SQ};

use crate::error::{Result, SgnError};

pub fn metric_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn check_inputs(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<()> {
    if cands.is_empty() {
        return Err(SgnError::Invalid("no candidates to score".into()));
    }
    if cands.len() != refs.len() {
        return Err(SgnError::Invalid(format!(
            "{} candidates but {} reference sets",
            cands.len(),
            refs.len()
        )));
    }
    if refs.iter().any(|r| r.is_empty()) {
        return Err(SgnError::Invalid("every candidate needs at least one reference".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScores {
    pub video_id: String,
    pub bleu4: f64,
    pub cider_d: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu4: f64,
    pub cider_d: f64,
    pub rouge_l: f64,
    pub n_videos: usize,
    /// Set when only one video was scored and CIDEr-D fell back to uniform idf.
    pub cider_df_fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub per_video: Vec<VideoScores>,
}

/// Scores raw caption strings; `refs[i]` are the references for `cands[i]`.
pub fn evaluate<S: AsRef<str>>(ids: &[String], cands: &[S], refs: &[Vec<S>]) -> Result<EvalReport> {
    if ids.len() != cands.len() {
        return Err(SgnError::Invalid("one video id per candidate is required".into()));
    }
    let c: Vec<Vec<String>> = cands.iter().map(|s| metric_tokens(s.as_ref())).collect();
    let r: Vec<Vec<Vec<String>>> = refs
        .iter()
        .map(|rs| rs.iter().map(|s| metric_tokens(s.as_ref())).collect())
        .collect();
    let bleu = bleu4(&c, &r)?;
    let cider = cider_d(&c, &r, CIDER_SIGMA)?;
    let (rouge, rouge_each) = rouge_l(&c, &r)?;
    let per_video = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            Ok(VideoScores {
                video_id: id.clone(),
                bleu4: sentence_bleu4(&c[i], &r[i])?,
                cider_d: cider.per_video[i],
                rouge_l: rouge_each[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        bleu4: bleu,
        cider_d: cider.score,
        rouge_l: rouge,
        n_videos: ids.len(),
        cider_df_fallback: cider.df_fallback,
        config_hash: None,
        per_video,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization_lowercases_and_strips_punctuation() {
        assert_eq!(metric_tokens("A Man, playing... the guitar!"), vec!["a", "man", "playing", "the", "guitar"]);
        assert_eq!(metric_tokens("don't"), vec!["don", "t"]);
    }

    #[test]
    fn report_lists_every_video() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let cands = vec!["a dog runs", "a cat sits"];
        let refs = vec![vec!["a dog runs"], vec!["a bird sings", "the cat sits down"]];
        let rep = evaluate(&ids, &cands, &refs).unwrap();
        assert_eq!(rep.n_videos, 2);
        assert_eq!(rep.per_video.len(), 2);
        assert!(!rep.cider_df_fallback);
        assert!((0.0..=1.0).contains(&rep.bleu4) && (0.0..=10.0).contains(&rep.cider_d));
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), rep);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let ids = vec!["a".to_string()];
        assert!(evaluate(&ids, &["x", "y"], &[vec!["x"], vec!["y"]]).is_err());
        assert!(evaluate::<&str>(&[], &[], &[]).is_err());
        assert!(evaluate(&ids, &["x"], &[vec![]]).is_err());
    }
}
