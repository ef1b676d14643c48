use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Result, SgnError};
use crate::scalar::Scalar;

/// Gold caption as token indices, without `<sos>`/`<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Caption {
    tokens: Vec<usize>,
}

impl Caption {
    pub fn new(tokens: Vec<usize>, max_len: usize, pad: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(SgnError::Invalid("caption must contain at least one token".into()));
        }
        if tokens.len() > max_len {
            return Err(SgnError::Invalid(format!(
                "caption of {} tokens exceeds max_len {max_len}",
                tokens.len()
            )));
        }
        if tokens.contains(&pad) {
            return Err(SgnError::Invalid("caption contains <pad>".into()));
        }
        Ok(Caption { tokens })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Per-video frame representations; each row is `[appearance ; motion]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures<T> {
    pub video_id: String,
    frames: Array2<T>,
    d_a: usize,
    d_m: usize,
}

impl<T: Scalar> VideoFeatures<T> {
    /// Concatenates appearance and motion rows frame by frame.
    pub fn from_parts(
        video_id: impl Into<String>,
        appearance: ArrayView2<T>,
        motion: ArrayView2<T>,
    ) -> Result<Self> {
        if appearance.nrows() != motion.nrows() {
            return Err(SgnError::Data(format!(
                "appearance has {} frames but motion has {}",
                appearance.nrows(),
                motion.nrows()
            )));
        }
        let frames = concatenate(Axis(1), &[appearance, motion])
            .map_err(|e| SgnError::Data(e.to_string()))?;
        Self::new(video_id, frames, appearance.ncols(), motion.ncols())
    }

    pub fn new(video_id: impl Into<String>, frames: Array2<T>, d_a: usize, d_m: usize) -> Result<Self> {
        let video_id = video_id.into();
        if frames.ncols() != d_a + d_m {
            return Err(SgnError::Data(format!(
                "{video_id}: frame width {} != d_a + d_m = {}",
                frames.ncols(),
                d_a + d_m
            )));
        }
        if frames.nrows() == 0 {
            return Err(SgnError::Data(format!("{video_id}: no frames")));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(SgnError::Data(format!("{video_id}: non-finite feature value")));
        }
        Ok(VideoFeatures {
            video_id,
            frames,
            d_a,
            d_m,
        })
    }

    pub fn frames(&self) -> ArrayView2<'_, T> {
        self.frames.view()
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn d_v(&self) -> usize {
        self.d_a + self.d_m
    }

    pub fn cast<U: Scalar>(&self) -> VideoFeatures<U> {
        VideoFeatures {
            video_id: self.video_id.clone(),
            frames: self.frames.mapv(|v| U::lit(v.as_f64())),
            d_a: self.d_a,
            d_m: self.d_m,
        }
    }
}

/// Word embedding matrix, one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub weights: Array2<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }
}
