use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SgnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of videos held out for model selection.
    pub val_fraction: f64,
    /// Stop once the epoch's mean per-token training CE drops below this.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_train_ce: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            batch_size: 16,
            epochs: 300,
            val_fraction: 0.1,
            target_train_ce: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Frames per video after resampling.
    pub n_frames: usize,
    pub d_a: usize,
    pub d_m: usize,
    pub d_w: usize,
    pub d_h: usize,
    /// Width of the phrase/frame relevance attention; defaults to `d_h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_s: Option<usize>,
    /// Width of the decoder's group attention; defaults to `d_h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_att: Option<usize>,
    /// Phrase suppression threshold.
    pub tau: f64,
    /// Weight of the contrastive attention loss.
    pub lambda: f64,
    pub beam_size: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Self-attention layers in the phrase encoder; the word-attention
    /// matrix is taken from the last one.
    pub enc_layers: usize,
    /// Learned positional vectors added to word embeddings before phrase encoding.
    pub positional: bool,
    /// Divide beam scores by hypothesis length.
    pub length_norm: bool,
    pub min_count: usize,
    pub precision: Precision,
    pub optim: OptimConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n_frames: 30,
            d_a: 8,
            d_m: 8,
            d_w: 32,
            d_h: 64,
            d_s: None,
            d_att: None,
            tau: 0.2,
            lambda: 0.16,
            beam_size: 5,
            max_len: 20,
            seed: 42,
            enc_layers: 1,
            positional: true,
            length_norm: true,
            min_count: 1,
            precision: Precision::F32,
            optim: OptimConfig::default(),
        }
    }
}

impl Config {
    pub fn d_v(&self) -> usize {
        self.d_a + self.d_m
    }

    pub fn d_s(&self) -> usize {
        self.d_s.unwrap_or(self.d_h)
    }

    pub fn d_att(&self) -> usize {
        self.d_att.unwrap_or(self.d_h)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(SgnError::Config(m.to_string()));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return err("tau must lie in (0, 1)");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return err("lambda must be a finite value >= 0");
        }
        if self.n_frames == 0 {
            return err("n_frames must be >= 1");
        }
        if self.beam_size == 0 {
            return err("beam_size must be >= 1");
        }
        if self.max_len == 0 {
            return err("max_len must be >= 1");
        }
        if self.d_a + self.d_m == 0 || self.d_w == 0 || self.d_h == 0 || self.d_s() == 0 || self.d_att() == 0 {
            return err("all widths must be positive");
        }
        if self.enc_layers == 0 {
            return err("enc_layers must be >= 1");
        }
        let o = &self.optim;
        if !(o.lr > 0.0) || o.batch_size == 0 {
            return err("optim.lr must be > 0 and optim.batch_size >= 1");
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return err("optimizer betas must lie in [0, 1) and eps must be > 0");
        }
        if !(0.0..1.0).contains(&o.val_fraction) || o.clip_norm < 0.0 {
            return err("optim.val_fraction must lie in [0, 1) and clip_norm >= 0");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SgnError::io(path, e))?;
        text.parse()
    }
}

impl FromStr for Config {
    type Err = SgnError;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| SgnError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Switches for the component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Phrase encoder + semantic aligner. Off means temporal attention over raw frames.
    pub use_semantic_aligner: bool,
    pub use_phrase_suppressor: bool,
    pub use_ca_loss: bool,
    /// Raw word embeddings act as phrases; no encoder, no suppressor.
    pub group_by_word: bool,
}

impl AblationFlags {
    pub const FULL: AblationFlags = AblationFlags {
        use_semantic_aligner: true,
        use_phrase_suppressor: true,
        use_ca_loss: true,
        group_by_word: false,
    };

    pub const TA_BASELINE: AblationFlags = AblationFlags {
        use_semantic_aligner: false,
        use_phrase_suppressor: false,
        use_ca_loss: false,
        group_by_word: false,
    };

    pub fn validate(&self) -> Result<()> {
        if self.group_by_word && self.use_phrase_suppressor {
            return Err(SgnError::Config("group_by_word requires the phrase suppressor to be off".into()));
        }
        if !self.use_semantic_aligner && (self.use_phrase_suppressor || self.use_ca_loss || self.group_by_word) {
            return Err(SgnError::Config(
                "phrase suppressor, CA loss and group-by-word all need the semantic aligner".into(),
            ));
        }
        Ok(())
    }

    /// Parses a comma list of enabled components, e.g. `sa,ps,ca` or `sa,word`.
    /// `none` or an empty string selects the temporal-attention baseline.
    pub fn parse_list(s: &str) -> Result<Self> {
        let mut f = AblationFlags::TA_BASELINE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "sa" => f.use_semantic_aligner = true,
                "ps" => f.use_phrase_suppressor = true,
                "ca" => f.use_ca_loss = true,
                "word" => f.group_by_word = true,
                "none" | "ta" => {}
                other => return Err(SgnError::Invalid(format!("unknown ablation component `{other}`"))),
            }
        }
        f.validate()?;
        Ok(f)
    }

    pub fn label(&self) -> String {
        if !self.use_semantic_aligner {
            return "TA baseline".to_string();
        }
        let mut parts = vec!["SA"];
        if self.group_by_word {
            parts.push("word");
        }
        if self.use_phrase_suppressor {
            parts.push("PS");
        }
        if self.use_ca_loss {
            parts.push("CA");
        }
        parts.join("+")
    }
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags::FULL
    }
}

impl fmt::Display for AblationFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.tau, 0.2);
        assert_eq!(c.lambda, 0.16);
        assert_eq!(c.n_frames, 30);
        assert_eq!(c.beam_size, 5);
        let back: Config = c.to_toml().parse().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c: Config = "tau = 0.3\n[optim]\nlr = 0.01\n".parse().unwrap();
        assert_eq!(c.tau, 0.3);
        assert_eq!(c.optim.lr, 0.01);
        assert_eq!(c.optim.batch_size, 16);
    }

    #[test]
    fn rejects_bad_values() {
        assert!("tau = 1.0".parse::<Config>().is_err());
        assert!("tau = 0.0".parse::<Config>().is_err());
        assert!("lambda = -0.1".parse::<Config>().is_err());
        assert!("n_frames = 0".parse::<Config>().is_err());
        assert!("beam_size = 0".parse::<Config>().is_err());
        assert!("bogus = 1".parse::<Config>().is_err());
    }

    #[test]
    fn ablation_lists() {
        assert_eq!(AblationFlags::parse_list("sa,ps,ca").unwrap(), AblationFlags::FULL);
        assert_eq!(AblationFlags::parse_list("").unwrap().label(), "TA baseline");
        assert_eq!(AblationFlags::parse_list("sa,ps").unwrap().label(), "SA+PS");
        assert!(AblationFlags::parse_list("ps").is_err());
        assert!(AblationFlags::parse_list("sa,ps,word").is_err());
        assert!(AblationFlags::parse_list("sa,xx").is_err());
    }
}
