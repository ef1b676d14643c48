use std::collections::{HashMap, HashSet};

use super::bleu::ngram_counts;
use super::check_inputs;
use crate::error::Result;

/// Width of the Gaussian length penalty.
pub const CIDER_SIGMA: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    pub score: f64,
    pub per_video: Vec<f64>,
    /// Only one video was scored, so document frequencies carry no
    /// information and every n-gram was weighted 1.
    pub df_fallback: bool,
}

type Vector<'a> = [HashMap<&'a [String], f64>; 4];

fn tfidf<'a>(tokens: &'a [String], idf: &dyn Fn(&[String]) -> f64) -> (Vector<'a>, [f64; 4]) {
    let mut vec: Vector<'a> = Default::default();
    let mut norms = [0.0; 4];
    for n in 1..=4 {
        for (g, k) in ngram_counts(tokens, n) {
            let w = k as f64 * idf(g);
            norms[n - 1] += w * w;
            vec[n - 1].insert(g, w);
        }
        norms[n - 1] = norms[n - 1].sqrt();
    }
    (vec, norms)
}

/// CIDEr-D: per n (1..4) a clipped tf-idf cosine between candidate and each
/// reference, damped by `exp(-Δlen² / 2σ²)`, averaged over n and
/// references, scaled by 10, then averaged over the corpus. Document
/// frequencies count the videos whose reference set contains an n-gram.
pub fn cider_d(cands: &[Vec<String>], refs: &[Vec<Vec<String>>], sigma: f64) -> Result<CiderScores> {
    check_inputs(cands, refs)?;
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for rs in refs {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for r in rs {
            for n in 1..=4 {
                seen.extend(ngram_counts(r, n).into_keys());
            }
        }
        for g in seen {
            *df.entry(g).or_default() += 1;
        }
    }
    let df_fallback = refs.len() == 1;
    let log_docs = (refs.len() as f64).ln();
    let idf = |g: &[String]| {
        if df_fallback {
            1.0
        } else {
            log_docs - (df.get(g).copied().unwrap_or(0).max(1) as f64).ln()
        }
    };
    let mut per_video = Vec::with_capacity(cands.len());
    for (c, rs) in cands.iter().zip(refs) {
        let (vc, nc) = tfidf(c, &idf);
        let mut acc = 0.0;
        for r in rs {
            let (vr, nr) = tfidf(r, &idf);
            let delta = c.len() as f64 - r.len() as f64;
            let penalty = (-(delta * delta) / (2.0 * sigma * sigma)).exp();
            let mut s = 0.0;
            for n in 0..4 {
                let mut val: f64 = vc[n]
                    .iter()
                    .map(|(g, &x)| {
                        let y = vr[n].get(g).copied().unwrap_or(0.0);
                        x.min(y) * y
                    })
                    .sum();
                if nc[n] != 0.0 && nr[n] != 0.0 {
                    val /= nc[n] * nr[n];
                }
                s += val * penalty;
            }
            acc += s / 4.0;
        }
        per_video.push(10.0 * acc / rs.len() as f64);
    }
    Ok(CiderScores {
        score: per_video.iter().sum::<f64>() / per_video.len() as f64,
        per_video,
        df_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::metric_tokens as tok;

    #[test]
    fn single_identical_pair_uses_fallback_and_scores_ten() {
        let c = vec![tok("a man is playing a guitar")];
        let r = vec![vec![tok("a man is playing a guitar")]];
        let s = cider_d(&c, &r, CIDER_SIGMA).unwrap();
        assert!(s.df_fallback);
        assert!((s.score - 10.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocabulary_scores_zero() {
        let c = vec![tok("red ball"), tok("blue sky")];
        let r = vec![vec![tok("green grass")], vec![tok("yellow sun")]];
        let s = cider_d(&c, &r, CIDER_SIGMA).unwrap();
        assert!(!s.df_fallback);
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn two_document_hand_example() {
        // refs: v1 {"a b"}, v2 {"c d"}; every n-gram has df 1, idf ln 2.
        // cand 1 "a b" equals its reference: unigram and bigram cosines are 1,
        // trigram and 4-gram vectors are empty -> (1 + 1 + 0 + 0) / 4 * 10 = 5.
        // cand 2 "c" vs "c d": unigram cosine (ln2 * ln2) / (ln2 * sqrt2 ln2) = 1/sqrt2,
        // length penalty exp(-1/72); -> 10 * exp(-1/72) / (4 sqrt2).
        let c = vec![tok("a b"), tok("c")];
        let r = vec![vec![tok("a b")], vec![tok("c d")]];
        let s = cider_d(&c, &r, CIDER_SIGMA).unwrap();
        assert!((s.per_video[0] - 5.0).abs() < 1e-12);
        let expect = 10.0 * (-1.0f64 / 72.0).exp() / (4.0 * 2f64.sqrt());
        assert!((s.per_video[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn order_of_videos_does_not_matter() {
        let c = vec![tok("a dog runs fast"), tok("a cat sleeps"), tok("the man sings")];
        let r = vec![
            vec![tok("a dog is running"), tok("the dog runs")],
            vec![tok("a cat is sleeping")],
            vec![tok("a man sings a song")],
        ];
        let a = cider_d(&c, &r, CIDER_SIGMA).unwrap();
        let idx = [2, 0, 1];
        let c2: Vec<_> = idx.iter().map(|&i| c[i].clone()).collect();
        let r2: Vec<_> = idx.iter().map(|&i| r[i].clone()).collect();
        let b = cider_d(&c2, &r2, CIDER_SIGMA).unwrap();
        assert!((a.score - b.score).abs() < 1e-12);
    }
}
