#![allow(dead_code)]

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use sgn::corpus::{generate_corpus, Corpus, SyntheticSpec};
use sgn::datamodel::{AblationFlags, Config, SgnRng, VideoFeatures, Vocabulary};
use sgn::model::Model;
use sgn::Scalar;

pub fn small_config(max_len: usize) -> Config {
    Config {
        n_frames: 5,
        d_a: 2,
        d_m: 2,
        d_w: 4,
        d_h: 6,
        d_s: Some(5),
        d_att: Some(3),
        max_len,
        ..Config::default()
    }
}

/// Model with weights drawn from U(-scale, scale) so distributions are far from uniform.
pub fn random_model<T: Scalar>(cfg: &Config, vocab: &Vocabulary, flags: AblationFlags, seed: u64, scale: f64) -> Model<T> {
    let mut rng = SgnRng::seed_from_u64(seed);
    let mut model = Model::<f64>::new(cfg, vocab, flags, &mut rng).unwrap();
    for s in model.params.slices_mut() {
        for x in s.iter_mut() {
            *x = rng.random_range(-scale..scale);
        }
    }
    model.cast()
}

pub fn random_video<T: Scalar>(cfg: &Config, seed: u64) -> VideoFeatures<T> {
    let mut rng = SgnRng::seed_from_u64(seed);
    let f = Array2::from_shape_simple_fn((cfg.n_frames, cfg.d_v()), || T::lit(rng.random_range(-1.0..1.0)));
    VideoFeatures::new(format!("v{seed}"), f, cfg.d_a, cfg.d_m).unwrap()
}

/// A small planted-alignment corpus plus a matching configuration.
pub fn tiny_corpus(n_videos: usize, seed: u64) -> (Corpus<f64>, Vocabulary, Config) {
    let spec = SyntheticSpec {
        n_concepts: 5,
        segments_per_video: 2,
        frames_per_segment: 2,
        noise_sigma: 0.05,
        n_videos,
        d_a: 2,
        d_m: 2,
    };
    let synth = generate_corpus::<f64>(&spec, seed).unwrap();
    let cfg = Config {
        n_frames: spec.n_frames(),
        d_a: 2,
        d_m: 2,
        d_w: 6,
        d_h: 8,
        max_len: 4,
        precision: sgn::Precision::F64,
        optim: sgn::datamodel::OptimConfig {
            epochs: 4,
            batch_size: 3,
            lr: 5e-3,
            ..Default::default()
        },
        ..Config::default()
    };
    (Corpus { examples: synth.examples }, synth.vocab, cfg)
}

/// Direct transcription: R = A Aᵀ, visit pairs i < j in row-major order,
/// ignore pairs touching an already-removed phrase, remove p_i when its row
/// sum (diagonal included) is strictly larger, else p_j.
pub fn brute_force_suppress(a: &Array2<f64>, tau: f64) -> Vec<usize> {
    let n = a.nrows();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..a.ncols() {
                r[i][j] += a[[i, k]] * a[[j, k]];
            }
        }
    }
    let sum = |i: usize| -> f64 { r[i].iter().sum() };
    let mut removed = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if j <= i || removed.contains(&i) || removed.contains(&j) {
                continue;
            }
            if r[i][j] > tau {
                if sum(i) > sum(j) {
                    removed.insert(i);
                } else {
                    removed.insert(j);
                }
            }
        }
    }
    (0..n).filter(|i| !removed.contains(i)).collect()
}

pub fn softmax_rows(raw: Vec<Vec<f64>>) -> Array2<f64> {
    let n = raw.len();
    let m = raw[0].len();
    Array2::from_shape_fn((n, m), |(i, j)| {
        let mx = raw[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = raw[i].iter().map(|x| (x - mx).exp()).sum();
        (raw[i][j] - mx).exp() / z
    })
}

/// Scores every sequence over the allowed tokens by calling the model one step
/// at a time on explicit prefixes. Returns (tokens, score) of the best one.
pub fn exhaustive(model: &Model<f64>, video: &VideoFeatures<f64>, max_len: usize, allowed: &[usize], eos: usize, norm: bool) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut consider = |tokens: Vec<usize>, lp: f64, n: usize| {
        let score = if norm { lp / n as f64 } else { lp };
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((tokens, score));
        }
    };
    // stack of (prefix, state, log-prob)
    let mut stack = vec![(Vec::new(), model.initial_state(), 0.0)];
    while let Some((prefix, state, lp)) = stack.pop() {
        let (next, out, _) = model.step(video, &state, None).unwrap();
        for &tok in allowed {
            let total = lp + out.probs[tok].ln();
            if tok == eos {
                consider(prefix.clone(), total, prefix.len() + 1);
                continue;
            }
            let mut p = prefix.clone();
            p.push(tok);
            if p.len() == max_len {
                let n = p.len();
                consider(p, total, n);
            } else {
                let mut s = next.clone();
                s.prefix = p.clone();
                stack.push((p, s, total));
            }
        }
    }
    best.unwrap()
}

