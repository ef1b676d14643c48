use std::collections::BTreeSet;

use rand::Rng;

use crate::corpus::Example;
use crate::datamodel::{tokenize, STOPWORDS};
use crate::error::{Result, SgnError};

/// Non-stopword tokens across all of an example's captions.
pub fn content_tokens<S: AsRef<str>>(texts: &[S]) -> BTreeSet<String> {
    texts
        .iter()
        .flat_map(|t| tokenize(t.as_ref()))
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Precomputed content-token sets for a pool, so eligibility checks are set
/// intersections rather than re-tokenisation.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    tokens: Vec<BTreeSet<String>>,
}

impl NegativeSampler {
    pub fn new<T>(pool: &[Example<T>]) -> Self {
        NegativeSampler {
            tokens: pool.iter().map(|e| content_tokens(&e.texts)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Pool indices whose captions share no content token with `anchor`.
    pub fn eligible_for(&self, anchor: &BTreeSet<String>) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_disjoint(anchor))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn eligible(&self, anchor: usize) -> Vec<usize> {
        self.eligible_for(&self.tokens[anchor])
    }

    pub fn sample<R: Rng + ?Sized>(&self, anchor: usize, rng: &mut R) -> Result<usize> {
        let eligible = self.eligible(anchor);
        if eligible.is_empty() {
            return Err(SgnError::NoNegative(format!("no negative video for pool item {anchor}")));
        }
        Ok(eligible[rng.random_range(0..eligible.len())])
    }
}

/// Uniform draw over pool examples that share no content token with `anchor`.
pub fn sample_negative<'a, T, R: Rng + ?Sized>(
    pool: &'a [Example<T>],
    anchor: &Example<T>,
    rng: &mut R,
) -> Result<&'a Example<T>> {
    let sampler = NegativeSampler::new(pool);
    let eligible = sampler.eligible_for(&content_tokens(&anchor.texts));
    if eligible.is_empty() {
        return Err(SgnError::NoNegative(format!("no negative video for {}", anchor.video.video_id)));
    }
    Ok(&pool[eligible[rng.random_range(0..eligible.len())]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, SyntheticSpec};
    use crate::datamodel::{SgnRng, VideoFeatures};
    use ndarray::Array2;

    fn example(id: &str, texts: &[&str]) -> Example<f32> {
        Example {
            video: VideoFeatures::new(id, Array2::zeros((1, 2)), 1, 1).unwrap(),
            captions: vec![],
            texts: texts.iter().map(|s| s.to_string()).collect(),
            concept_segments: vec![],
        }
    }

    #[test]
    fn stopwords_do_not_count_as_overlap() {
        let anchor = example("x", &["a dog runs"]);
        let pool = vec![example("y", &["a cat sits"])];
        let mut rng = SgnRng::seed_from_u64(0);
        assert_eq!(sample_negative(&pool, &anchor, &mut rng).unwrap().id(), "y");
    }

    #[test]
    fn shared_content_word_is_ineligible() {
        let anchor = example("x", &["a dog runs"]);
        let pool = vec![example("y", &["the dog sleeps"])];
        let mut rng = SgnRng::seed_from_u64(0);
        assert!(matches!(
            sample_negative(&pool, &anchor, &mut rng),
            Err(SgnError::NoNegative(_))
        ));
    }

    #[test]
    fn every_anchor_caption_is_checked_against_every_candidate_caption() {
        let anchor = example("x", &["a dog runs", "a puppy plays"]);
        let pool = vec![example("y", &["a cat sits", "the puppy naps"]), example("z", &["a bird sings"])];
        let sampler = NegativeSampler::new(&pool);
        assert_eq!(sampler.eligible_for(&content_tokens(&anchor.texts)), vec![1]);
    }

    #[test]
    fn eligibility_matches_brute_force_on_synthetic_pool() {
        let spec = SyntheticSpec {
            n_videos: 20,
            ..SyntheticSpec::default()
        };
        let corpus = generate_corpus::<f32>(&spec, 5).unwrap();
        let pool = &corpus.examples;
        let sampler = NegativeSampler::new(pool);
        for (a, anchor) in pool.iter().enumerate() {
            let mut expected = Vec::new();
            for (c, cand) in pool.iter().enumerate() {
                let mut overlap = false;
                for at in &anchor.texts {
                    for ct in &cand.texts {
                        for aw in at.split_whitespace() {
                            for cw in ct.split_whitespace() {
                                if aw == cw && !STOPWORDS.contains(&aw) {
                                    overlap = true;
                                }
                            }
                        }
                    }
                }
                if !overlap {
                    expected.push(c);
                }
            }
            assert_eq!(sampler.eligible(a), expected, "anchor {a}");
            assert!(!expected.contains(&a));
        }
    }

    #[test]
    fn sampling_is_uniform_over_eligible() {
        let anchor = example("x", &["red"]);
        let pool = vec![
            example("a", &["blue"]),
            example("b", &["red green"]),
            example("c", &["green"]),
            example("d", &["yellow"]),
        ];
        let mut rng = SgnRng::seed_from_u64(9);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..3000 {
            *counts.entry(sample_negative(&pool, &anchor, &mut rng).unwrap().id().to_string()).or_insert(0) += 1;
        }
        assert_eq!(counts.keys().cloned().collect::<Vec<_>>(), vec!["a", "c", "d"]);
        for &n in counts.values() {
            assert!((n as f64 - 1000.0).abs() < 120.0, "{counts:?}");
        }
    }
}
