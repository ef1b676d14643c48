//! Command-line front end: `sgn <subcommand>`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sgn::ablation::{caption_videos, run_ablation};
use sgn::bench::bench_decode;
use sgn::corpus::{generate_corpus, load_corpus_dir, read_manifest, write_corpus_dir, Corpus, FeatureFormat, SyntheticSpec};
use sgn::inspect::inspect_video;
use sgn::metrics::evaluate;
use sgn::trainer::{checkpoint_precision, train, Checkpoint, TrainOptions};
use sgn::{AblationFlags, Config, Precision, Scalar, SgnError, SgnRng, VideoFeatures};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "sgn", version, about = "Semantic grouping video captioner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a corpus directory.
    Train(TrainArgs),
    /// Caption the videos of a corpus directory.
    Generate(GenerateArgs),
    /// Score candidate captions against references.
    Eval(EvalArgs),
    /// Dump per-step attention records as JSON lines.
    Inspect(InspectArgs),
    /// Train and evaluate several component ablations.
    Ablate(AblateArgs),
    /// Time per-step decoding against the step index.
    Bench(BenchArgs),
    /// Write a synthetic corpus with planted alignments.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Enabled components, e.g. `sa,ps,ca`; `none` trains the temporal-attention baseline.
    #[arg(long, default_value = "sa,ps,ca")]
    ablation: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Pretrained word vectors, one `token v1 .. vd` line per word.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, conflicts_with = "greedy")]
    beam: Option<usize>,
    #[arg(long)]
    greedy: bool,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write attention records (JSON lines) to this file.
    #[arg(long)]
    dump_attn: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// `video_id<TAB>caption`, one line per video.
    #[arg(long)]
    candidates: PathBuf,
    /// `video_id<TAB>caption`, any number of lines per video.
    #[arg(long)]
    references: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Only this video; all videos by default.
    #[arg(long)]
    video: Option<String>,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    /// Semicolon-separated component lists.
    #[arg(long, default_value = "none;sa;sa,ps;sa,ps,ca")]
    variants: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Held-out fraction of videos used for scoring.
    #[arg(long, default_value_t = 0.25)]
    eval_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    /// Vocabulary size of the randomly initialised benchmark models.
    #[arg(long, default_value_t = 1000)]
    vocab: usize,
    /// Critical |t| below which the temporal-attention slope counts as zero.
    #[arg(long, default_value_t = 2.576)]
    critical_t: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 120)]
    videos: usize,
    #[arg(long, default_value_t = 12)]
    concepts: usize,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    #[arg(long, default_value_t = 5)]
    frames_per_segment: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 8)]
    d_a: usize,
    #[arg(long, default_value_t = 8)]
    d_m: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    text: bool,
}

pub fn exit_code(e: &SgnError) -> i32 {
    match e {
        SgnError::Config(_) | SgnError::Invalid(_) => EXIT_USAGE,
        SgnError::Data(_) | SgnError::NoNegative(_) | SgnError::Io { .. } => EXIT_DATA,
        SgnError::Numeric(_) => EXIT_NUMERIC,
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sgn: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> sgn::Result<()> {
    match cmd {
        Command::Train(a) => {
            let cfg = load_config(a.config.as_deref(), a.seed)?;
            match cfg.precision {
                Precision::F32 => cmd_train::<f32>(&a, cfg),
                Precision::F64 => cmd_train::<f64>(&a, cfg),
            }
        }
        Command::Generate(a) => match checkpoint_precision(&a.checkpoint)? {
            Precision::F32 => cmd_generate::<f32>(&a),
            Precision::F64 => cmd_generate::<f64>(&a),
        },
        Command::Eval(a) => cmd_eval(&a),
        Command::Inspect(a) => match checkpoint_precision(&a.checkpoint)? {
            Precision::F32 => cmd_inspect::<f32>(&a),
            Precision::F64 => cmd_inspect::<f64>(&a),
        },
        Command::Ablate(a) => {
            let cfg = load_config(a.config.as_deref(), None)?;
            match cfg.precision {
                Precision::F32 => cmd_ablate::<f32>(&a, cfg),
                Precision::F64 => cmd_ablate::<f64>(&a, cfg),
            }
        }
        Command::Bench(a) => {
            let cfg = load_config(a.config.as_deref(), None)?;
            match cfg.precision {
                Precision::F32 => cmd_bench::<f32>(&a, cfg),
                Precision::F64 => cmd_bench::<f64>(&a, cfg),
            }
        }
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> sgn::Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> sgn::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| SgnError::io(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| SgnError::io("<stdout>", e)),
    }
}

fn cmd_train<T: Scalar>(a: &TrainArgs, mut cfg: Config) -> sgn::Result<()> {
    if let Some(e) = a.epochs {
        cfg.optim.epochs = e;
    }
    let flags = AblationFlags::parse_list(&a.ablation)?;
    let corpus: Corpus<T> = load_corpus_dir(&a.corpus, cfg.n_frames, cfg.d_a, cfg.d_m)?;
    let (mut train_set, mut val_set) = corpus.split(cfg.optim.val_fraction, cfg.seed);
    let vocab = train_set.build_vocabulary(cfg.min_count)?;
    train_set.encode_captions(&vocab, cfg.max_len)?;
    if !val_set.is_empty() {
        val_set.encode_captions(&vocab, cfg.max_len)?;
    }
    fs::create_dir_all(&a.out).map_err(|e| SgnError::io(&a.out, e))?;
    let cfg_path = a.out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(|e| SgnError::io(&cfg_path, e))?;
    let vocab_path = a.out.join("vocab.txt");
    fs::write(&vocab_path, vocab.to_text()).map_err(|e| SgnError::io(&vocab_path, e))?;
    let opts = TrainOptions {
        out_dir: Some(a.out.clone()),
        resume: a.resume.clone(),
        embeddings: a.embeddings.clone(),
        stop_after_epochs: None,
    };
    let outcome = train(&train_set, Some(&val_set), &vocab, &cfg, flags, &opts)?;
    let summary = serde_json::json!({
        "model": flags.label(),
        "epochs": outcome.last.epoch,
        "stop": format!("{:?}", outcome.stop),
        "train_ce": outcome.final_train_ce(),
        "best_val": outcome.best.best_val,
        "best_epoch": outcome.best.epoch,
    });
    println!("{summary}");
    Ok(())
}

fn load_for_decoding<T: Scalar>(checkpoint: &Path, corpus: &Path) -> sgn::Result<(Checkpoint<T>, Corpus<T>)> {
    let ck = Checkpoint::<T>::load(checkpoint)?;
    let c = &ck.config;
    let corpus = load_corpus_dir(corpus, c.n_frames, c.d_a, c.d_m)?;
    Ok((ck, corpus))
}

fn cmd_generate<T: Scalar>(a: &GenerateArgs) -> sgn::Result<()> {
    let (ck, corpus) = load_for_decoding::<T>(&a.checkpoint, &a.corpus)?;
    let beam = if a.greedy { 1 } else { a.beam.unwrap_or(ck.config.beam_size) };
    if beam == 0 {
        return Err(SgnError::Invalid("--beam must be >= 1".into()));
    }
    let max_len = a.max_len.unwrap_or(ck.config.max_len).min(ck.config.max_len);
    let caps = caption_videos(&ck.model, &ck.vocab, &corpus.examples, beam, max_len, ck.config.length_norm)?;
    let mut text = String::new();
    for (ex, c) in corpus.examples.iter().zip(&caps) {
        text.push_str(&format!("{}\t{c}\n", ex.id()));
    }
    emit(a.out.as_deref(), &text)?;
    if let Some(path) = &a.dump_attn {
        write_inspect(&ck, &corpus, None, 3, max_len, Some(path))?;
    }
    Ok(())
}

fn write_inspect<T: Scalar>(
    ck: &Checkpoint<T>,
    corpus: &Corpus<T>,
    video: Option<&str>,
    top_k: usize,
    max_len: usize,
    out: Option<&Path>,
) -> sgn::Result<()> {
    let mut text = String::new();
    let mut found = false;
    for ex in corpus.examples.iter().filter(|e| video.is_none_or(|v| e.id() == v)) {
        found = true;
        for rec in inspect_video(&ck.model, &ck.vocab, ex, max_len, top_k)? {
            text.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            text.push('\n');
        }
    }
    if !found {
        return Err(SgnError::Data(format!("video {} is not in the corpus", video.unwrap_or("?"))));
    }
    emit(out, &text)
}

fn cmd_inspect<T: Scalar>(a: &InspectArgs) -> sgn::Result<()> {
    let (ck, corpus) = load_for_decoding::<T>(&a.checkpoint, &a.corpus)?;
    let max_len = a.max_len.unwrap_or(ck.config.max_len).min(ck.config.max_len);
    write_inspect(&ck, &corpus, a.video.as_deref(), a.top_k, max_len, a.out.as_deref())
}

fn cmd_eval(a: &EvalArgs) -> sgn::Result<()> {
    let cands = read_manifest(&a.candidates)?;
    let refs = read_manifest(&a.references)?;
    let mut ids = Vec::new();
    let mut cand_text = Vec::new();
    let mut ref_text = Vec::new();
    for (id, c) in cands {
        if ids.contains(&id) {
            return Err(SgnError::Data(format!("{}: more than one candidate for {id}", a.candidates.display())));
        }
        let rs: Vec<String> = refs
            .iter()
            .filter(|(rid, r)| *rid == id && !r.is_empty())
            .map(|(_, r)| r.clone())
            .collect();
        if rs.is_empty() {
            return Err(SgnError::Data(format!("no reference caption for {id}")));
        }
        ids.push(id);
        cand_text.push(c);
        ref_text.push(rs);
    }
    let mut report = evaluate(&ids, &cand_text, &ref_text)?;
    if let Some(p) = &a.config {
        report.config_hash = Some(Config::load(p)?.hash());
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(a.out.as_deref(), &(json + "\n"))
}

fn cmd_ablate<T: Scalar>(a: &AblateArgs, mut cfg: Config) -> sgn::Result<()> {
    if let Some(e) = a.epochs {
        cfg.optim.epochs = e;
    }
    if !(0.0..1.0).contains(&a.eval_fraction) || a.eval_fraction == 0.0 {
        return Err(SgnError::Invalid("--eval-fraction must lie in (0, 1)".into()));
    }
    let variants = a
        .variants
        .split(';')
        .map(AblationFlags::parse_list)
        .collect::<sgn::Result<Vec<_>>>()?;
    if a.seeds.is_empty() {
        return Err(SgnError::Invalid("at least one seed is required".into()));
    }
    let corpus: Corpus<T> = load_corpus_dir(&a.corpus, cfg.n_frames, cfg.d_a, cfg.d_m)?;
    let (mut train_set, mut eval_set) = corpus.split(a.eval_fraction, cfg.seed);
    let vocab = train_set.build_vocabulary(cfg.min_count)?;
    train_set.encode_captions(&vocab, cfg.max_len)?;
    eval_set.encode_captions(&vocab, cfg.max_len)?;
    let concept = |tok: usize| vocab.token(tok).strip_prefix("concept")?.parse::<usize>().ok();
    let has_segments = eval_set.examples.iter().any(|e| !e.concept_segments.is_empty());
    let concept_ref: &(dyn Fn(usize) -> Option<usize> + Sync) = &concept;
    let mut lines = String::new();
    let runs = run_ablation(
        &train_set,
        &eval_set,
        &vocab,
        &cfg,
        &variants,
        &a.seeds,
        has_segments.then_some(concept_ref),
        |r| {
            let line = serde_json::to_string(r).expect("run serializes");
            eprintln!("{line}");
            lines.push_str(&line);
            lines.push('\n');
        },
    )?;
    let mut summary = Vec::new();
    for v in &variants {
        let of: Vec<_> = runs.iter().filter(|r| r.flags == *v).collect();
        let mean = |f: &dyn Fn(&sgn::ablation::AblationRun) -> f64| of.iter().map(|r| f(r)).sum::<f64>() / of.len() as f64;
        summary.push(serde_json::json!({
            "label": v.label(),
            "runs": of.len(),
            "bleu4": mean(&|r| r.bleu4),
            "cider_d": mean(&|r| r.cider_d),
            "rouge_l": mean(&|r| r.rouge_l),
        }));
    }
    lines.push_str(&serde_json::to_string(&serde_json::json!({ "summary": summary })).expect("summary serializes"));
    lines.push('\n');
    emit(a.out.as_deref(), &lines)
}

fn cmd_bench<T: Scalar>(a: &BenchArgs, cfg: Config) -> sgn::Result<()> {
    if a.vocab < 1 {
        return Err(SgnError::Invalid("--vocab must be >= 1".into()));
    }
    let cfg = Config {
        n_frames: a.frames,
        max_len: cfg.max_len.max(a.max_len),
        ..cfg
    };
    let words: Vec<String> = (0..a.vocab).map(|i| format!("w{i}")).collect();
    let vocab = sgn::Vocabulary::from_words(words)?;
    let mut rng = SgnRng::seed_from_u64(cfg.seed);
    let frames = ndarray_random(a.frames, cfg.d_v(), &mut rng);
    let video = VideoFeatures::<T>::new("bench", frames, cfg.d_a, cfg.d_m)?;
    let sgn_model = sgn::Model::<T>::new(&cfg, &vocab, AblationFlags::FULL, &mut rng.fork(1))?;
    let ta_model = sgn::Model::<T>::new(&cfg, &vocab, AblationFlags::TA_BASELINE, &mut rng.fork(2))?;
    let s = bench_decode(&sgn_model, &video, a.max_len, a.repeats, a.warmup)?;
    let t = bench_decode(&ta_model, &video, a.max_len, a.repeats, a.warmup)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let report = serde_json::json!({
        "sgn": s,
        "ta": t,
        "sgn_slope_positive": s.fit.slope > 0.0 && !s.fit.slope_is_zero(a.critical_t),
        "ta_slope_zero": t.fit.slope_is_zero(a.critical_t),
        "critical_t": a.critical_t,
        "mean_step_ratio": mean(&s.median_us) / mean(&t.median_us),
    });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(a.out.as_deref(), &(json + "\n"))
}

fn ndarray_random<T: Scalar>(rows: usize, cols: usize, rng: &mut SgnRng) -> sgn::ndarray::Array2<T> {
    use sgn::rand::Rng;
    sgn::ndarray::Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-1.0..1.0)))
}

fn cmd_synth(a: &SynthArgs) -> sgn::Result<()> {
    let spec = SyntheticSpec {
        n_concepts: a.concepts,
        segments_per_video: a.segments,
        frames_per_segment: a.frames_per_segment,
        noise_sigma: a.sigma,
        n_videos: a.videos,
        d_a: a.d_a,
        d_m: a.d_m,
    };
    let synth = generate_corpus::<f32>(&spec, a.seed)?;
    let format = if a.text { FeatureFormat::Text } else { FeatureFormat::Binary };
    write_corpus_dir(&a.out, &synth.examples, format)?;
    println!(
        "{}",
        serde_json::json!({ "videos": synth.examples.len(), "n_frames": spec.n_frames(), "vocab": synth.vocab.len() })
    );
    Ok(())
}
