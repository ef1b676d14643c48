//! Shared types: vocabulary, configuration, captions, features and the seeded RNG.

mod config;
mod rng;
mod types;
mod vocab;

pub use config::{AblationFlags, Config, OptimConfig, Precision};
pub use rng::{RngState, SgnRng};
pub use types::{Caption, EmbeddingTable, VideoFeatures};
pub use vocab::{build_vocabulary, tokenize, Specials, Vocabulary, STOPWORDS};
