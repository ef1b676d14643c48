//! Video/caption corpora: synthetic generation with planted alignments,
//! feature-file ingestion and negative-video sampling.

mod features_io;
mod negative;
mod store;
mod synth;

use std::ops::Range;

use crate::datamodel::{Caption, VideoFeatures};

pub use features_io::{load_features, read_features, resample_indices, write_features, FeatureFormat, RawFeatures};
pub use negative::{content_tokens, sample_negative, NegativeSampler};
pub use store::{load_corpus_dir, read_manifest, write_corpus_dir, Corpus};
pub use synth::{concept_token, generate_corpus, segment_variance, SyntheticCorpus, SyntheticSpec};

/// One video with its captions and, for synthetic data, the planted
/// concept/frame-range alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub video: VideoFeatures<T>,
    pub captions: Vec<Caption>,
    pub texts: Vec<String>,
    pub concept_segments: Vec<(usize, Range<usize>)>,
}

impl<T> Example<T> {
    pub fn id(&self) -> &str {
        &self.video.video_id
    }
}
