//! Versioned checkpoint files.
//!
//! Layout: the ASCII line `SGN-CHECKPOINT 1\n`, a `u64` little-endian length,
//! that many bytes of JSON metadata, then every tensor as little-endian `f64`
//! (parameters, then Adam first and second moments when present). Offsets in
//! the metadata index are in elements from the start of the blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{AblationFlags, Config, Precision, RngState, SgnRng, Vocabulary};
use crate::error::{Result, SgnError};
use crate::model::Model;
use crate::params::Params;
use crate::scalar::Scalar;
use crate::trainer::optim::Adam;

pub const FORMAT_HEADER: &str = "SGN-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub config: Config,
    pub vocab: Vocabulary,
    pub model: Model<T>,
    pub optimizer: Option<Adam<T>>,
    /// Epochs completed.
    pub epoch: usize,
    pub rng: Option<RngState>,
    pub best_val: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerMeta {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    precision: Precision,
    config: Config,
    flags: AblationFlags,
    vocab: String,
    vocab_hash: String,
    epoch: usize,
    rng: Option<RngState>,
    best_val: Option<f64>,
    optimizer: Option<OptimizerMeta>,
    tensors: Vec<TensorEntry>,
}

fn push_params<T: Scalar>(blob: &mut Vec<u8>, index: &mut Vec<TensorEntry>, prefix: &str, p: &Params<T>) {
    for ((name, shape), data) in p.shapes().into_iter().zip(p.slices()) {
        index.push(TensorEntry {
            name: format!("{prefix}{name}"),
            shape,
            offset: blob.len() / 8,
        });
        for &x in data {
            blob.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
}

fn fill_params<T: Scalar>(p: &mut Params<T>, prefix: &str, index: &[TensorEntry], blob: &[u8]) -> Result<()> {
    let shapes = p.shapes();
    for ((name, shape), dst) in shapes.into_iter().zip(p.slices_mut()) {
        let full = format!("{prefix}{name}");
        let entry = index
            .iter()
            .find(|e| e.name == full)
            .ok_or_else(|| SgnError::Data(format!("checkpoint is missing tensor {full}")))?;
        if entry.shape != shape {
            return Err(SgnError::Data(format!(
                "checkpoint tensor {full} has shape {:?}, expected {shape:?}",
                entry.shape
            )));
        }
        let start = entry.offset * 8;
        let end = start + dst.len() * 8;
        let bytes = blob
            .get(start..end)
            .ok_or_else(|| SgnError::Data(format!("checkpoint tensor {full} runs past the end of the file")))?;
        for (x, b) in dst.iter_mut().zip(bytes.chunks_exact(8)) {
            *x = T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes")));
        }
    }
    Ok(())
}

fn parse(buf: &[u8]) -> Result<(Meta, &[u8])> {
    let nl = buf
        .iter()
        .position(|&b| b == b'\n')
        .filter(|&p| p < 64)
        .ok_or_else(|| SgnError::Data("not a checkpoint file".into()))?;
    let header = std::str::from_utf8(&buf[..nl]).map_err(|_| SgnError::Data("not a checkpoint file".into()))?;
    match header.split_once(' ') {
        Some((FORMAT_HEADER, v)) if v == FORMAT_VERSION.to_string() => {}
        Some((FORMAT_HEADER, v)) => return Err(SgnError::Data(format!("unsupported checkpoint version {v}"))),
        _ => return Err(SgnError::Data("not a checkpoint file".into())),
    }
    let rest = &buf[nl + 1..];
    let len_bytes: [u8; 8] = rest
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| SgnError::Data("truncated checkpoint".into()))?;
    let len = u64::from_le_bytes(len_bytes) as usize;
    let json = rest
        .get(8..8usize.saturating_add(len))
        .ok_or_else(|| SgnError::Data("truncated checkpoint".into()))?;
    let blob = &rest[8 + len..];
    let meta: Meta = serde_json::from_slice(json).map_err(|e| SgnError::Data(format!("checkpoint metadata: {e}")))?;
    Ok((meta, blob))
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blob = Vec::new();
        let mut tensors = Vec::new();
        push_params(&mut blob, &mut tensors, "", &self.model.params);
        if let Some(opt) = &self.optimizer {
            push_params(&mut blob, &mut tensors, "adam.m.", &opt.m);
            push_params(&mut blob, &mut tensors, "adam.v.", &opt.v);
        }
        let meta = Meta {
            precision: if T::NAME == "f64" { Precision::F64 } else { Precision::F32 },
            config: self.config.clone(),
            flags: self.model.flags,
            vocab: self.vocab.to_text(),
            vocab_hash: self.vocab.hash(),
            epoch: self.epoch,
            rng: self.rng.clone(),
            best_val: self.best_val,
            optimizer: self.optimizer.as_ref().map(|o| OptimizerMeta {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                step: o.step,
            }),
            tensors,
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut out = format!("{FORMAT_HEADER} {FORMAT_VERSION}\n").into_bytes();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (meta, blob) = parse(buf)?;
        let vocab = Vocabulary::from_text(&meta.vocab)?;
        if vocab.hash() != meta.vocab_hash {
            return Err(SgnError::Data("checkpoint vocabulary hash mismatch".into()));
        }
        let mut model = Model::<T>::new(&meta.config, &vocab, meta.flags, &mut SgnRng::seed_from_u64(0))?;
        fill_params(&mut model.params, "", &meta.tensors, blob)?;
        let optimizer = match meta.optimizer {
            Some(o) => {
                let mut m = model.params.zeros_like();
                let mut v = model.params.zeros_like();
                fill_params(&mut m, "adam.m.", &meta.tensors, blob)?;
                fill_params(&mut v, "adam.v.", &meta.tensors, blob)?;
                Some(Adam {
                    lr: o.lr,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    eps: o.eps,
                    step: o.step,
                    m,
                    v,
                })
            }
            None => None,
        };
        Ok(Checkpoint {
            config: meta.config,
            vocab,
            model,
            optimizer,
            epoch: meta.epoch,
            rng: meta.rng,
            best_val: meta.best_val,
        })
    }

    /// Writes to a sibling temporary file and renames it into place, so an
    /// interrupted save never clobbers the previous checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| SgnError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| SgnError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| SgnError::io(path, e))?;
        Self::from_bytes(&buf).map_err(|e| match e {
            SgnError::Data(m) => SgnError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Reads just the stored precision, so callers can pick the scalar type.
pub fn checkpoint_precision(path: &Path) -> Result<Precision> {
    let buf = fs::read(path).map_err(|e| SgnError::io(path, e))?;
    Ok(parse(&buf)?.0.precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::OptimConfig;

    fn sample() -> Checkpoint<f32> {
        let vocab = Vocabulary::from_words(["red", "ball"]).unwrap();
        let cfg = Config {
            d_w: 3,
            d_h: 4,
            d_a: 2,
            d_m: 1,
            n_frames: 3,
            max_len: 4,
            ..Config::default()
        };
        let mut rng = SgnRng::seed_from_u64(4);
        let model = Model::new(&cfg, &vocab, AblationFlags::FULL, &mut rng).unwrap();
        let mut opt = Adam::new(&OptimConfig::default(), &model.params);
        opt.step = 7;
        opt.m.embed[[1, 1]] = 0.125;
        opt.v.out_b[2] = 1e-30;
        Checkpoint {
            config: cfg,
            vocab,
            model,
            optimizer: Some(opt),
            epoch: 3,
            rng: Some(rng.state()),
            best_val: Some(1.5),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::<f32>::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.model, ck.model);
        assert_eq!(back.optimizer, ck.optimizer);
        assert_eq!(back.epoch, 3);
        assert_eq!(back.rng, ck.rng);
        assert_eq!(back.best_val, Some(1.5));
        assert_eq!(back.vocab.tokens(), ck.vocab.tokens());
        assert!(back.to_bytes().starts_with(b"SGN-CHECKPOINT 1\n"));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        assert!(Checkpoint::<f32>::from_bytes(b"hello\n").is_err());
        let mut v2 = bytes.clone();
        v2[15] = b'2';
        assert!(Checkpoint::<f32>::from_bytes(&v2).is_err());
    }

    #[test]
    fn save_and_load_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let ck = sample();
        ck.save(&p).unwrap();
        let back = Checkpoint::<f32>::load(&p).unwrap();
        assert_eq!(back.model, ck.model);
        assert_eq!(checkpoint_precision(&p).unwrap(), Precision::F32);
    }
}
