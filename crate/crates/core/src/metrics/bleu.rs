use std::collections::HashMap;

use super::check_inputs;
use crate::error::Result;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_default() += 1;
        }
    }
    out
}

#[derive(Default)]
struct Stats {
    correct: [usize; 4],
    total: [usize; 4],
    cand_len: usize,
    ref_len: usize,
}

fn accumulate(stats: &mut Stats, cand: &[String], refs: &[Vec<String>]) {
    stats.cand_len += cand.len();
    // closest reference length, ties to the shorter one
    stats.ref_len += refs
        .iter()
        .map(|r| (r.len().abs_diff(cand.len()), r.len()))
        .min()
        .map(|(_, l)| l)
        .unwrap_or(0);
    for n in 1..=4 {
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        for (g, k) in ngram_counts(cand, n) {
            let max_ref = ref_counts.iter().map(|c| c.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            stats.correct[n - 1] += k.min(max_ref);
        }
        stats.total[n - 1] += (cand.len() + 1).saturating_sub(n);
    }
}

fn finish(stats: &Stats) -> f64 {
    if stats.correct.contains(&0) {
        return 0.0;
    }
    let log_p: f64 = (0..4)
        .map(|i| (stats.correct[i] as f64 / stats.total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if stats.cand_len >= stats.ref_len {
        1.0
    } else {
        (1.0 - stats.ref_len as f64 / stats.cand_len as f64).exp()
    };
    bp * log_p.exp()
}

/// Corpus BLEU-4: clipped n-gram counts and lengths are pooled over the
/// corpus before the geometric mean and brevity penalty. No smoothing.
pub fn bleu4(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<f64> {
    check_inputs(cands, refs)?;
    let mut stats = Stats::default();
    for (c, r) in cands.iter().zip(refs) {
        accumulate(&mut stats, c, r);
    }
    Ok(finish(&stats))
}

pub fn sentence_bleu4(cand: &[String], refs: &[Vec<String>]) -> Result<f64> {
    bleu4(&[cand.to_vec()], &[refs.to_vec()])
}
