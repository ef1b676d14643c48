use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::datamodel::{build_vocabulary, tokenize, SgnRng, VideoFeatures, Vocabulary};
use crate::error::{Result, SgnError};
use crate::scalar::Scalar;

/// Parameters of the planted-alignment corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_concepts: usize,
    pub segments_per_video: usize,
    pub frames_per_segment: usize,
    pub noise_sigma: f64,
    pub n_videos: usize,
    pub d_a: usize,
    pub d_m: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_concepts: 12,
            segments_per_video: 4,
            frames_per_segment: 5,
            noise_sigma: 0.05,
            n_videos: 120,
            d_a: 8,
            d_m: 8,
        }
    }
}

impl SyntheticSpec {
    pub fn n_frames(&self) -> usize {
        self.segments_per_video * self.frames_per_segment
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SgnError::Config(format!("synthetic spec: {m}")));
        if self.segments_per_video == 0 || self.frames_per_segment == 0 {
            return bad("segments_per_video and frames_per_segment must be >= 1");
        }
        if self.n_concepts < self.segments_per_video {
            return bad("n_concepts must be >= segments_per_video");
        }
        if self.n_videos == 0 || self.d_a + self.d_m == 0 {
            return bad("n_videos and d_a + d_m must be positive");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma must be a finite value >= 0");
        }
        Ok(())
    }
}

pub fn concept_token(c: usize) -> String {
    format!("concept{c}")
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus<T> {
    pub spec: SyntheticSpec,
    pub vocab: Vocabulary,
    pub examples: Vec<Example<T>>,
    /// One prototype frame vector per concept, `[n_concepts × d_v]`.
    pub prototypes: Array2<T>,
}

impl<T: Scalar> SyntheticCorpus<T> {
    /// Concept named by a vocabulary index, if any.
    pub fn concept_of_token(&self, token: usize) -> Option<usize> {
        self.vocab.token(token).strip_prefix("concept")?.parse().ok()
    }
}

/// Videos are sequences of segments; every frame of a segment is its
/// concept's prototype plus N(0, sigma²) noise. The caption names the
/// concepts in segment order, joined by `then`.
pub fn generate_corpus<T: Scalar>(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus<T>> {
    spec.validate()?;
    let mut rng = SgnRng::seed_from_u64(seed);
    let d_v = spec.d_a + spec.d_m;
    let prototypes: Array2<f64> =
        Array2::from_shape_simple_fn((spec.n_concepts, d_v), || StandardNormal.sample(&mut rng));
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| SgnError::Config(e.to_string()))?;
    let n = spec.n_frames();
    let mut raw = Vec::with_capacity(spec.n_videos);
    for v in 0..spec.n_videos {
        let concepts = sample(&mut rng, spec.n_concepts, spec.segments_per_video).into_vec();
        let mut frames = Array2::<T>::zeros((n, d_v));
        let mut segments = Vec::with_capacity(concepts.len());
        for (s, &c) in concepts.iter().enumerate() {
            let range = s * spec.frames_per_segment..(s + 1) * spec.frames_per_segment;
            for f in range.clone() {
                for k in 0..d_v {
                    let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    frames[[f, k]] = T::lit(prototypes[[c, k]] + eps);
                }
            }
            segments.push((c, range));
        }
        let text = concepts.iter().map(|&c| concept_token(c)).collect::<Vec<_>>().join(" then ");
        raw.push((format!("synth{v:05}"), frames, text, segments));
    }
    let token_lists: Vec<Vec<String>> = raw.iter().map(|r| tokenize(&r.2)).collect();
    let vocab = build_vocabulary(&token_lists, 1)?;
    let max_len = 2 * spec.segments_per_video;
    let mut examples = Vec::with_capacity(raw.len());
    for ((id, frames, text, segments), toks) in raw.into_iter().zip(token_lists) {
        examples.push(Example {
            video: VideoFeatures::new(id, frames, spec.d_a, spec.d_m)?,
            captions: vec![vocab.encode(&toks, max_len)?],
            texts: vec![text],
            concept_segments: segments,
        });
    }
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        vocab,
        examples,
        prototypes: prototypes.mapv(T::lit),
    })
}

/// Mean squared deviation of a segment's frames from their mean, summed over columns.
pub fn segment_variance<T: Scalar>(frames: ndarray::ArrayView2<T>) -> f64 {
    let mean: Array1<f64> = frames.mapv(|v| v.as_f64()).mean_axis(ndarray::Axis(0)).expect("non-empty");
    let mut acc = 0.0;
    for row in frames.rows() {
        for (v, m) in row.iter().zip(mean.iter()) {
            acc += (v.as_f64() - m).powi(2);
        }
    }
    acc / frames.nrows() as f64
}
