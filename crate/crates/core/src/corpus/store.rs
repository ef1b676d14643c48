//! On-disk corpus directories.
//!
//! ```text
//! <dir>/manifest.tsv        video_id<TAB>caption, one line per caption
//! <dir>/features/<id>.sgnf  binary feature file (or <id>.txt)
//! <dir>/segments.tsv        optional: video_id<TAB>concept<TAB>start<TAB>end
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::corpus::features_io::{load_features, write_features, FeatureFormat};
use crate::corpus::Example;
use crate::datamodel::{build_vocabulary, tokenize, SgnRng, Vocabulary};
use crate::error::{Result, SgnError};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Corpus<T> {
    pub examples: Vec<Example<T>>,
}

impl<T: Scalar> Corpus<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn build_vocabulary(&self, min_count: usize) -> Result<Vocabulary> {
        let sentences: Vec<Vec<String>> = self
            .examples
            .iter()
            .flat_map(|e| e.texts.iter().map(|t| tokenize(t)))
            .collect();
        build_vocabulary(&sentences, min_count)
    }

    /// Re-encodes every caption with `vocab`, truncating to `max_len` tokens.
    /// Captions with no tokens are dropped.
    pub fn encode_captions(&mut self, vocab: &Vocabulary, max_len: usize) -> Result<()> {
        for ex in &mut self.examples {
            ex.captions.clear();
            for text in &ex.texts {
                let mut toks = tokenize(text);
                toks.truncate(max_len);
                if !toks.is_empty() {
                    ex.captions.push(vocab.encode(&toks, max_len)?);
                }
            }
            if ex.captions.is_empty() {
                return Err(SgnError::Data(format!("{}: no usable caption", ex.id())));
            }
        }
        Ok(())
    }

    /// Seeded shuffle, then the first `round(fraction * len)` videos become
    /// the held-out split. At least one video stays in training.
    pub fn split(mut self, fraction: f64, seed: u64) -> (Corpus<T>, Corpus<T>) {
        let mut rng = SgnRng::seed_from_u64(seed);
        self.examples.shuffle(&mut rng);
        let n_val = ((fraction * self.examples.len() as f64).round() as usize).min(self.examples.len().saturating_sub(1));
        let train = self.examples.split_off(n_val);
        (Corpus { examples: train }, Corpus { examples: self.examples })
    }
}

/// `(video_id, caption)` pairs in file order. A line holding only an id
/// lists a video without a caption (for captioning unseen videos).
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| SgnError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, caption) = line.split_once('\t').unwrap_or((line.trim(), ""));
        if id.is_empty() {
            return Err(SgnError::Data(format!("{}:{}: empty video id", path.display(), n + 1)));
        }
        out.push((id.to_string(), caption.trim().to_string()));
    }
    if out.is_empty() {
        return Err(SgnError::Data(format!("{}: manifest is empty", path.display())));
    }
    Ok(out)
}

fn feature_path(dir: &Path, id: &str) -> Result<PathBuf> {
    for ext in ["sgnf", "txt"] {
        let p = dir.join("features").join(format!("{id}.{ext}"));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(SgnError::Data(format!("{}: no feature file for {id}", dir.display())))
}

fn read_segments(path: &Path) -> Result<HashMap<String, Vec<(usize, std::ops::Range<usize>)>>> {
    let mut out: HashMap<String, Vec<_>> = HashMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let text = fs::read_to_string(path).map_err(|e| SgnError::io(path, e))?;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || SgnError::Data(format!("{}:{}: expected video_id<TAB>concept<TAB>start<TAB>end", path.display(), n + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        out.entry(f[0].to_string())
            .or_default()
            .push((num(f[1])?, num(f[2])?..num(f[3])?));
    }
    Ok(out)
}

/// Loads a corpus directory, resampling features to `n_frames`. Captions
/// are left empty; see [`Corpus::encode_captions`].
pub fn load_corpus_dir<T: Scalar>(dir: &Path, n_frames: usize, d_a: usize, d_m: usize) -> Result<Corpus<T>> {
    let manifest = read_manifest(&dir.join("manifest.tsv"))?;
    let mut segments = read_segments(&dir.join("segments.tsv"))?;
    let mut order: Vec<String> = Vec::new();
    let mut texts: HashMap<String, Vec<String>> = HashMap::new();
    for (id, caption) in manifest {
        if !texts.contains_key(&id) {
            order.push(id.clone());
        }
        let entry = texts.entry(id).or_default();
        if !caption.is_empty() {
            entry.push(caption);
        }
    }
    let mut examples = Vec::with_capacity(order.len());
    for id in order {
        let mut video = load_features(&feature_path(dir, &id)?, n_frames, d_a, d_m)?;
        video.video_id = id.clone();
        examples.push(Example {
            video,
            captions: Vec::new(),
            texts: texts.remove(&id).unwrap_or_default(),
            concept_segments: segments.remove(&id).unwrap_or_default(),
        });
    }
    Ok(Corpus { examples })
}

pub fn write_corpus_dir<T: Scalar>(dir: &Path, examples: &[Example<T>], format: FeatureFormat) -> Result<()> {
    let features = dir.join("features");
    fs::create_dir_all(&features).map_err(|e| SgnError::io(&features, e))?;
    let ext = match format {
        FeatureFormat::Binary => "sgnf",
        FeatureFormat::Text => "txt",
    };
    let mut manifest = String::new();
    let mut segs = String::new();
    for ex in examples {
        if ex.id().contains(['\t', '\n', '/']) {
            return Err(SgnError::Data(format!("video id {:?} cannot be written", ex.id())));
        }
        write_features(&features.join(format!("{}.{ext}", ex.id())), &ex.video, format)?;
        for t in &ex.texts {
            manifest.push_str(&format!("{}\t{}\n", ex.id(), t));
        }
        for (c, r) in &ex.concept_segments {
            segs.push_str(&format!("{}\t{c}\t{}\t{}\n", ex.id(), r.start, r.end));
        }
    }
    let p = dir.join("manifest.tsv");
    fs::write(&p, manifest).map_err(|e| SgnError::io(&p, e))?;
    if !segs.is_empty() {
        let p = dir.join("segments.tsv");
        fs::write(&p, segs).map_err(|e| SgnError::io(&p, e))?;
    }
    Ok(())
}
