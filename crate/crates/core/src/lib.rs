//! Video captioning with semantic grouping: a phrase encoder over the
//! partially decoded caption, a suppressor that drops redundant phrases, an
//! aligner that attaches frames to each surviving phrase, and an LSTM decoder
//! that attends over the resulting phrase/frame groups.

pub mod ablation;
pub mod attention;
pub mod bench;
pub mod corpus;
pub mod datamodel;
pub mod decoder;
pub mod error;
pub mod grouping;
pub mod inspect;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod params;
pub mod phrase_encoder;
pub mod scalar;
pub mod trainer;

pub use ndarray;
pub use rand;
pub use datamodel::{AblationFlags, Caption, Config, Precision, SgnRng, VideoFeatures, Vocabulary};
pub use error::{Result, SgnError};
pub use model::Model;
pub use scalar::Scalar;

pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type Features32 = VideoFeatures<f32>;
pub type Features64 = VideoFeatures<f64>;
