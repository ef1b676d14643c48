//! Semantic attention decoder and caption search.

pub mod cell;
mod search;

pub use cell::{attend_groups, DecoderState, StepOutput};
pub use search::{banned_tokens, decode_beam, decode_greedy, decode_greedy_traced, Hypothesis, TracedStep};
