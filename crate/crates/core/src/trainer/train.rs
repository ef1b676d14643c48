use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, NegativeSampler};
use crate::datamodel::{AblationFlags, Config, SgnRng, Vocabulary};
use crate::error::{Result, SgnError};
use crate::model::Model;
use crate::params::Params;
use crate::scalar::Scalar;
use crate::trainer::checkpoint::Checkpoint;
use crate::trainer::embed::embed_init;
use crate::trainer::optim::{clip_global_norm, Adam};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory for the metrics log and checkpoints; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Return after this many epochs in this call, as if interrupted.
    pub stop_after_epochs: Option<usize>,
}

/// One optimizer update. `ce` is per token and `ca` per semantic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    pub ce: f64,
    pub ca: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub ca: f64,
    pub val_ce: Option<f64>,
    pub best: bool,
    /// Items that had no eligible negative video and trained on CE alone.
    pub no_negative: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogLine<'a> {
    Step(&'a StepRecord),
    Epoch(&'a EpochRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EpochLimit,
    TargetReached,
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub last: Checkpoint<T>,
    pub best: Checkpoint<T>,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub stop: StopReason,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn final_train_ce(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.ce)
    }
}

/// Summed teacher-forced CE and token count over every caption of `corpus`.
pub fn corpus_ce<T: Scalar>(model: &Model<T>, corpus: &Corpus<T>) -> Result<(f64, usize)> {
    let items: Vec<(usize, usize)> = corpus
        .examples
        .iter()
        .enumerate()
        .flat_map(|(e, ex)| (0..ex.captions.len()).map(move |c| (e, c)))
        .collect();
    let parts: Vec<Result<(f64, usize)>> = items
        .par_iter()
        .map(|&(e, c)| {
            let ex = &corpus.examples[e];
            let pass = model.teacher_forced(&ex.video, &ex.captions[c], None)?;
            Ok((pass.ce.as_f64(), pass.n_tokens()))
        })
        .collect();
    let mut sum = 0.0;
    let mut n = 0;
    for p in parts {
        let (c, t) = p?;
        sum += c;
        n += t;
    }
    Ok((sum, n))
}

struct MetricsLog {
    out: Option<BufWriter<File>>,
}

impl MetricsLog {
    fn open(dir: Option<&Path>, append: bool) -> Result<Self> {
        let Some(dir) = dir else { return Ok(MetricsLog { out: None }) };
        fs::create_dir_all(dir).map_err(|e| SgnError::io(dir, e))?;
        let path = dir.join(METRICS_FILE);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&path)
            .map_err(|e| SgnError::io(&path, e))?;
        Ok(MetricsLog {
            out: Some(BufWriter::new(file)),
        })
    }

    fn write(&mut self, line: LogLine<'_>) -> Result<()> {
        if let Some(out) = &mut self.out {
            let s = serde_json::to_string(&line).expect("log line serializes");
            writeln!(out, "{s}").map_err(|e| SgnError::io(METRICS_FILE, e))?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(out) = &mut self.out {
            out.flush().map_err(|e| SgnError::io(METRICS_FILE, e))?;
        }
        Ok(())
    }
}

/// Teacher-forced training with Adam, global-norm clipping and per-epoch
/// validation. Captions must already be encoded with `vocab`.
pub fn train<T: Scalar>(
    train_set: &Corpus<T>,
    val_set: Option<&Corpus<T>>,
    vocab: &Vocabulary,
    cfg: &Config,
    flags: AblationFlags,
    opts: &TrainOptions,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    flags.validate()?;
    if train_set.is_empty() {
        return Err(SgnError::Data("training corpus is empty".into()));
    }
    for ex in &train_set.examples {
        if ex.captions.is_empty() {
            return Err(SgnError::Data(format!("{}: captions are not encoded", ex.id())));
        }
        if ex.video.n_frames() != cfg.n_frames || ex.video.d_a() != cfg.d_a || ex.video.d_m() != cfg.d_m {
            return Err(SgnError::Data(format!("{}: feature shape does not match the configuration", ex.id())));
        }
    }
    let val_set = val_set.filter(|v| !v.is_empty());
    let out_dir = opts.out_dir.as_deref();

    let (mut model, mut adam, mut rng, start_epoch, mut best_val, mut best) = match &opts.resume {
        Some(path) => {
            let ck = Checkpoint::<T>::load(path)?;
            if ck.vocab.hash() != vocab.hash() {
                return Err(SgnError::Data("checkpoint vocabulary differs from the corpus vocabulary".into()));
            }
            if ck.model.flags != flags {
                return Err(SgnError::Config(format!(
                    "checkpoint was trained as {}, not {}",
                    ck.model.flags.label(),
                    flags.label()
                )));
            }
            let rng = match &ck.rng {
                Some(s) => SgnRng::from_state(s)?,
                None => return Err(SgnError::Data("checkpoint has no RNG state to resume from".into())),
            };
            let mut adam = ck
                .optimizer
                .clone()
                .ok_or_else(|| SgnError::Data("checkpoint has no optimizer state to resume from".into()))?;
            // moments carry over; step sizes follow the current configuration
            adam.lr = cfg.optim.lr;
            adam.beta1 = cfg.optim.beta1;
            adam.beta2 = cfg.optim.beta2;
            adam.eps = cfg.optim.eps;
            let best_path = path.with_file_name(BEST_CHECKPOINT);
            let best = match Checkpoint::<T>::load(&best_path) {
                Ok(b) if best_path != *path => b,
                _ => ck.clone(),
            };
            (ck.model.clone(), adam, rng, ck.epoch, ck.best_val, best)
        }
        None => {
            let base = SgnRng::seed_from_u64(cfg.seed);
            let mut model = Model::<T>::new(cfg, vocab, flags, &mut base.fork(1))?;
            model.params.embed = embed_init(vocab, cfg.d_w, opts.embeddings.as_deref(), &mut base.fork(2))?.weights;
            let adam = Adam::new(&cfg.optim, &model.params);
            let ck = Checkpoint {
                config: cfg.clone(),
                vocab: vocab.clone(),
                model: model.clone(),
                optimizer: None,
                epoch: 0,
                rng: None,
                best_val: None,
            };
            (model, adam, base.fork(3), 0, None, ck)
        }
    };

    let mut log = MetricsLog::open(out_dir, opts.resume.is_some())?;
    let sampler = NegativeSampler::new(&train_set.examples);
    let canonical: Vec<(usize, usize)> = train_set
        .examples
        .iter()
        .enumerate()
        .flat_map(|(e, ex)| (0..ex.captions.len()).map(move |c| (e, c)))
        .collect();
    let batch_size = cfg.optim.batch_size.max(1);
    let lambda = cfg.lambda;

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut stop = StopReason::EpochLimit;
    let mut epochs_this_call = 0;
    let mut last = None;

    for epoch in start_epoch + 1..=cfg.optim.epochs {
        if opts.stop_after_epochs.is_some_and(|n| epochs_this_call >= n) {
            stop = StopReason::Interrupted;
            break;
        }
        let mut items = canonical.clone();
        items.shuffle(&mut rng);
        let (mut ce_sum, mut ca_sum, mut tokens, mut groups, mut loss_sum) = (0.0, 0.0, 0usize, 0usize, 0.0);
        let mut no_negative = 0;
        for batch in items.chunks(batch_size) {
            let negatives: Vec<Option<usize>> = batch
                .iter()
                .map(|&(e, _)| {
                    if !flags.use_ca_loss {
                        return None;
                    }
                    let n = sampler.sample(e, &mut rng).ok();
                    if n.is_none() {
                        no_negative += 1;
                    }
                    n
                })
                .collect();
            let weight = T::lit(1.0 / batch.len() as f64);
            let results: Vec<Result<_>> = batch
                .par_iter()
                .zip(negatives.par_iter())
                .map(|(&(e, c), neg)| {
                    let ex = &train_set.examples[e];
                    let negative = neg.map(|n| &train_set.examples[n].video);
                    model.loss_and_grad(&ex.video, &ex.captions[c], negative, weight)
                })
                .collect();
            let mut grads: Option<Params<T>> = None;
            let (mut b_ce, mut b_ca, mut b_tok, mut b_grp) = (0.0, 0.0, 0usize, 0usize);
            for r in results {
                let (pass, g) = r?;
                b_ce += pass.ce.as_f64();
                b_ca += pass.ca.as_f64();
                b_tok += pass.n_tokens();
                b_grp += pass.n_groups;
                match &mut grads {
                    Some(acc) => acc.add_assign(&g),
                    None => grads = Some(g),
                }
            }
            let mut grads = grads.expect("non-empty batch");
            let loss = (b_ce + lambda * b_ca) / batch.len() as f64;
            if !loss.is_finite() || !grads.all_finite() {
                log.flush()?;
                return Err(SgnError::Numeric(format!(
                    "non-finite loss at epoch {epoch}, step {}; last good checkpoint left in place",
                    adam.step + 1
                )));
            }
            let grad_norm = clip_global_norm(&mut grads, cfg.optim.clip_norm);
            adam.update(&mut model.params, &grads);
            let rec = StepRecord {
                epoch,
                step: adam.step,
                loss,
                ce: b_ce / b_tok.max(1) as f64,
                ca: if b_grp > 0 { b_ca / b_grp as f64 } else { 0.0 },
                grad_norm,
            };
            log.write(LogLine::Step(&rec))?;
            steps.push(rec);
            ce_sum += b_ce;
            ca_sum += b_ca;
            tokens += b_tok;
            groups += b_grp;
            loss_sum += loss * batch.len() as f64;
        }
        if !model.params.all_finite() {
            log.flush()?;
            return Err(SgnError::Numeric(format!("parameters became non-finite in epoch {epoch}")));
        }
        let train_ce = ce_sum / tokens.max(1) as f64;
        let val_ce = match val_set {
            Some(v) => {
                let (s, n) = corpus_ce(&model, v)?;
                Some(s / n.max(1) as f64)
            }
            None => None,
        };
        let select = val_ce.unwrap_or(train_ce);
        let improved = best_val.is_none_or(|b| select < b);
        if improved {
            best_val = Some(select);
        }
        let snapshot = Checkpoint {
            config: cfg.clone(),
            vocab: vocab.clone(),
            model: model.clone(),
            optimizer: Some(adam.clone()),
            epoch,
            rng: Some(rng.state()),
            best_val,
        };
        if improved {
            best = snapshot.clone();
        }
        let rec = EpochRecord {
            epoch,
            loss: loss_sum / items.len() as f64,
            ce: train_ce,
            ca: if groups > 0 { ca_sum / groups as f64 } else { 0.0 },
            val_ce,
            best: improved,
            no_negative,
        };
        log.write(LogLine::Epoch(&rec))?;
        log.flush()?;
        if let Some(dir) = out_dir {
            snapshot.save(&dir.join(LAST_CHECKPOINT))?;
            if improved {
                snapshot.save(&dir.join(BEST_CHECKPOINT))?;
            }
        }
        epochs.push(rec);
        last = Some(snapshot);
        epochs_this_call += 1;
        if cfg.optim.target_train_ce.is_some_and(|t| train_ce < t) {
            stop = StopReason::TargetReached;
            break;
        }
    }
    let last = last.unwrap_or_else(|| Checkpoint {
        config: cfg.clone(),
        vocab: vocab.clone(),
        model: model.clone(),
        optimizer: Some(adam.clone()),
        epoch: start_epoch,
        rng: Some(rng.state()),
        best_val,
    });
    Ok(TrainOutcome {
        last,
        best,
        steps,
        epochs,
        stop,
    })
}
