use super::check_inputs;
use crate::error::Result;

/// Weight of recall relative to precision in the LCS F-measure.
pub const ROUGE_BETA_SQ: f64 = 1.2;

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn sentence(cand: &[String], refs: &[Vec<String>], beta_sq: f64) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut p_max: f64 = 0.0;
    let mut r_max: f64 = 0.0;
    for r in refs.iter().filter(|r| !r.is_empty()) {
        let l = lcs(cand, r) as f64;
        p_max = p_max.max(l / cand.len() as f64);
        r_max = r_max.max(l / r.len() as f64);
    }
    if p_max == 0.0 || r_max == 0.0 {
        return 0.0;
    }
    (1.0 + beta_sq) * p_max * r_max / (r_max + beta_sq * p_max)
}

/// LCS F-measure with precision and recall each maximised over the
/// references; returns the corpus mean and the per-candidate scores.
pub fn rouge_l(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<(f64, Vec<f64>)> {
    rouge_l_with_beta(cands, refs, ROUGE_BETA_SQ)
}

pub fn rouge_l_with_beta(cands: &[Vec<String>], refs: &[Vec<Vec<String>>], beta_sq: f64) -> Result<(f64, Vec<f64>)> {
    check_inputs(cands, refs)?;
    let each: Vec<f64> = cands.iter().zip(refs).map(|(c, r)| sentence(c, r, beta_sq)).collect();
    Ok((each.iter().sum::<f64>() / each.len() as f64, each))
}
