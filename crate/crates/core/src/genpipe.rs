//! Training loop, temperature sampling and the parallel generation
//! pipeline with prefilter, parse, canonicalization and dedup.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{
    build_vocabulary, corpus_text, EncodedCorpus, LexiconError, NormalizedSmiles, Vocabulary, DEFAULT_SEQ_LEN,
    DEFAULT_STRIDE,
};
use crate::molparse::{canonical_form, parse_str, syntactic_prefilter};
use crate::neural::{
    backward, batch_loss, clip_global_norm, forward_batch, one_hot_steps, predict, rmsprop_step, step, InitInfo,
    LstmParams, NeuralError, OptimizerState, StepState, DEFAULT_DROPOUT, DEFAULT_UNITS1, DEFAULT_UNITS2,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("checkpoint has {params} output classes but the vocabulary has {vocab} symbols")]
    VocabularyMismatch { params: usize, vocab: usize },
    #[error("prompt symbol {0:?} is not in the vocabulary")]
    PromptSymbol(char),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seq_len: usize,
    pub stride: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub dropout_rate: f64,
    pub units1: usize,
    pub units2: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: DEFAULT_SEQ_LEN,
            stride: DEFAULT_STRIDE,
            epochs: 10,
            batch_size: 128,
            lr_start: 0.01,
            lr_end: 0.0002,
            seed: 0,
            dropout_rate: DEFAULT_DROPOUT,
            units1: DEFAULT_UNITS1,
            units2: DEFAULT_UNITS2,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if self.seq_len == 0 {
            return bad("seq_len must be at least 1");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return bad("learning rates must satisfy lr_start >= lr_end > 0");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.units1 == 0 || self.units2 == 0 {
            return bad("layer widths must be positive");
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// `lr_start · (lr_end / lr_start)^(e / (E − 1))`, constant when `E = 1`.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    if cfg.epochs <= 1 {
        return cfg.lr_start;
    }
    let frac = epoch as f64 / (cfg.epochs - 1) as f64;
    cfg.lr_start * (cfg.lr_end / cfg.lr_start).powf(frac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub windows: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: LstmParams,
    pub vocab: Vocabulary,
    pub loss_history: Vec<f64>,
    pub init: InitInfo,
}

/// The weights `train` starts from for a given vocabulary size and config.
pub fn initial_params(vocab_size: usize, cfg: &TrainConfig) -> (LstmParams, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = LstmParams::new(vocab_size, cfg.units1, cfg.units2, cfg.dropout_rate, &mut rng);
    (params, rng)
}

pub fn train(corpus: &[NormalizedSmiles], cfg: &TrainConfig) -> Result<TrainOutcome, GenError> {
    train_with_progress(corpus, cfg, |_| {})
}

/// [`train`], calling `progress` after every epoch.
pub fn train_with_progress(
    corpus: &[NormalizedSmiles],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochReport),
) -> Result<TrainOutcome, GenError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(GenError::EmptyCorpus);
    }
    let vocab = build_vocabulary(corpus)?;
    let text = corpus_text(corpus);
    let encoded = EncodedCorpus::new(&text, &vocab, cfg.seq_len, cfg.stride)?;
    let (mut params, mut rng) = initial_params(vocab.len(), cfg);
    let mut opt = OptimizerState::new(&params, cfg.lr_start);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        opt.learning_rate = learning_rate(cfg, epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut inputs = Vec::with_capacity(chunk.len());
            let mut targets = Vec::with_capacity(chunk.len());
            for &w in chunk {
                let (input, target) = encoded.window_slices(w);
                inputs.push(input);
                targets.push(target);
            }
            let xs = one_hot_steps(&inputs, vocab.len());
            let trace = forward_batch(&params, &xs, true, &mut rng)?;
            let loss = batch_loss(&trace.probs, &targets)?;
            if !loss.is_finite() {
                return Err(GenError::NonFiniteLoss { epoch });
            }
            let mut grads = backward(&params, &trace, &targets)?;
            if let Some(cap) = cfg.clip_norm {
                clip_global_norm(&mut grads, cap);
            }
            rmsprop_step(&mut params, &grads, &mut opt)?;
            total += loss * chunk.len() as f64;
        }
        let mean_loss = total / order.len() as f64;
        if !mean_loss.is_finite() {
            return Err(GenError::NonFiniteLoss { epoch });
        }
        history.push(mean_loss);
        progress(&EpochReport {
            epoch,
            learning_rate: opt.learning_rate,
            mean_loss,
            windows: order.len(),
        });
    }
    Ok(TrainOutcome {
        params,
        vocab,
        loss_history: history,
        init: InitInfo {
            kernel: "glorot_uniform".into(),
            forget_bias: 1.0,
            seed: cfg.seed,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub temperature: f64,
    pub max_len: usize,
    pub seed: u64,
    pub count: usize,
    /// Sampling window; the model sees at most this many trailing symbols.
    pub seq_len: usize,
    /// Text every sample starts with.
    pub prompt: String,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            temperature: 1.0,
            max_len: 120,
            seed: 0,
            count: 1000,
            seq_len: DEFAULT_SEQ_LEN,
            prompt: String::new(),
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(GenError::Config("temperature must be finite and positive".into()));
        }
        if self.max_len == 0 {
            return Err(GenError::Config("max_len must be at least 1".into()));
        }
        if self.seq_len == 0 {
            return Err(GenError::Config("seq_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sampled string without its terminator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSample {
    pub text: String,
    /// Stopped at `max_len` rather than at a newline.
    pub truncated: bool,
}

/// `p'_i ∝ exp(ln p_i / T)`
pub fn reweight(probs: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        let sum: f64 = probs.iter().sum();
        return probs.iter().map(|p| p / sum).collect();
    }
    let logs: Vec<f64> = probs.iter().map(|p| p.ln() / temperature).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

fn draw<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn check_vocab(params: &LstmParams, vocab: &Vocabulary) -> Result<(), GenError> {
    if params.vocab_size() != vocab.len() || params.tensors.layer1.input_dim() != vocab.len() {
        return Err(GenError::VocabularyMismatch {
            params: params.vocab_size(),
            vocab: vocab.len(),
        });
    }
    Ok(())
}

/// Samples `n` strings in lockstep.
///
/// Every sample begins after a newline, the symbol that precedes each
/// molecule in the training text, followed by the prompt. The network runs
/// from zero state on the last `seq_len` symbols of the context, as during
/// training; while the context is no longer than that, this is a plain
/// recurrent step.
pub fn sample_batch<R: Rng>(
    params: &LstmParams,
    vocab: &Vocabulary,
    cfg: &SampleConfig,
    n: usize,
    rng: &mut R,
) -> Result<Vec<RawSample>, GenError> {
    cfg.validate()?;
    check_vocab(params, vocab)?;
    let newline = vocab.newline_index();
    let mut start = vec![newline];
    for c in cfg.prompt.chars() {
        start.push(vocab.index_of(c).ok_or(GenError::PromptSymbol(c))?);
    }
    let mut contexts: Vec<Vec<usize>> = vec![start.clone(); n];
    let mut done: Vec<Option<bool>> = vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut state = StepState::zeros(params, n);

    let mut fed = 0;

    while !active.is_empty() {
        let len = contexts[active[0]].len();
        let probs = if len <= cfg.seq_len {
            let mut last = None;
            while fed < len {
                let syms: Vec<usize> = active.iter().map(|&i| contexts[i][fed]).collect();
                last = Some(step(params, &mut state, &syms)?);
                fed += 1;
            }
            last.expect("context grows by one symbol per round")
        } else {
            let windows: Vec<&[usize]> = active.iter().map(|&i| &contexts[i][len - cfg.seq_len..]).collect();
            predict(params, &windows)?
        };
        let mut keep = Vec::with_capacity(active.len());
        let mut still = Vec::with_capacity(active.len());
        for (row, &i) in active.iter().enumerate() {
            let dist = reweight(probs.row(row).as_slice().expect("contiguous row"), cfg.temperature);
            let sym = draw(&dist, rng);
            if sym == newline {
                done[i] = Some(false);
                continue;
            }
            contexts[i].push(sym);
            if contexts[i].len() > cfg.max_len {
                done[i] = Some(true);
                continue;
            }
            keep.push(row);
            still.push(i);
        }
        if still.len() != active.len() && len <= cfg.seq_len {
            state.retain_rows(&keep);
        }
        active = still;
    }

    contexts
        .into_iter()
        .zip(done)
        .map(|(ctx, d)| {
            Ok(RawSample {
                text: vocab.decode(&ctx[1..])?,
                truncated: d == Some(true),
            })
        })
        .collect()
}

pub fn sample_one<R: Rng>(
    params: &LstmParams,
    vocab: &Vocabulary,
    cfg: &SampleConfig,
    rng: &mut R,
) -> Result<RawSample, GenError> {
    Ok(sample_batch(params, vocab, cfg, 1, rng)?.remove(0))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub requested: usize,
    pub syntactic_rejects: usize,
    pub parse_rejects: usize,
    pub valid: usize,
    pub duplicates_of_training: usize,
    pub unique_canonical: usize,
    pub truncated: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl GenerationStats {
    pub fn valid_fraction(&self) -> f64 {
        self.valid as f64 / self.requested.max(1) as f64
    }

    pub fn syntactic_pass_fraction(&self) -> f64 {
        (self.requested - self.syntactic_rejects) as f64 / self.requested.max(1) as f64
    }
}

/// What happened to one raw sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    SyntacticReject,
    ParseReject,
    Valid(String),
}

pub fn classify(raw: &str) -> Outcome {
    if syntactic_prefilter(raw).is_err() {
        return Outcome::SyntacticReject;
    }
    match parse_str(raw) {
        Ok(g) => Outcome::Valid(canonical_form(&g)),
        Err(_) => Outcome::ParseReject,
    }
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub raw: Vec<RawSample>,
    pub outcomes: Vec<Outcome>,
    /// Canonical strings of valid samples in sample order, repeats included.
    pub valid: Vec<String>,
    pub stats: GenerationStats,
}

impl Generation {
    /// Distinct canonical strings in first-seen order.
    pub fn unique_valid(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.valid.iter().filter(|s| seen.insert(s.as_str())).cloned().collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of worker `index`: `splitmix64(base ^ splitmix64(index))`.
pub fn worker_seed(base: u64, index: usize) -> u64 {
    splitmix64(base ^ splitmix64(index as u64))
}

/// Samples per lockstep batch inside a worker.
pub const SAMPLE_CHUNK: usize = 128;

fn worker_run(
    params: &LstmParams,
    vocab: &Vocabulary,
    cfg: &SampleConfig,
    index: usize,
    count: usize,
) -> Result<Vec<(RawSample, Outcome)>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, index));
    let mut out = Vec::with_capacity(count);
    let mut left = count;
    while left > 0 {
        let n = left.min(SAMPLE_CHUNK);
        for s in sample_batch(params, vocab, cfg, n, &mut rng)? {
            let o = classify(&s.text);
            out.push((s, o));
        }
        left -= n;
    }
    Ok(out)
}

/// Generates `cfg.count` raw strings across `workers` threads and runs them
/// through the validity pipeline. Worker `w` draws from its own stream seeded
/// by [`worker_seed`]; results are merged in worker order.
pub fn generate_batch(
    params: &LstmParams,
    vocab: &Vocabulary,
    cfg: &SampleConfig,
    workers: usize,
    training_canonicals: &HashSet<String>,
) -> Result<Generation, GenError> {
    cfg.validate()?;
    check_vocab(params, vocab)?;
    if workers == 0 {
        return Err(GenError::Config("workers must be at least 1".into()));
    }
    let started = Instant::now();
    let share = |w: usize| cfg.count / workers + usize::from(w < cfg.count % workers);
    let parts: Vec<Result<Vec<(RawSample, Outcome)>, GenError>> = if workers == 1 {
        vec![worker_run(params, vocab, cfg, 0, cfg.count)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| scope.spawn(move || worker_run(params, vocab, cfg, w, share(w))))
                .collect();
            handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
        })
    };

    let mut raw = Vec::with_capacity(cfg.count);
    let mut outcomes = Vec::with_capacity(cfg.count);
    for part in parts {
        for (s, o) in part? {
            raw.push(s);
            outcomes.push(o);
        }
    }
    let mut stats = GenerationStats {
        requested: raw.len(),
        truncated: raw.iter().filter(|s| s.truncated).count(),
        ..Default::default()
    };
    let mut valid = Vec::new();
    for o in &outcomes {
        match o {
            Outcome::SyntacticReject => stats.syntactic_rejects += 1,
            Outcome::ParseReject => stats.parse_rejects += 1,
            Outcome::Valid(c) => valid.push(c.clone()),
        }
    }
    stats.valid = valid.len();
    let (_, duplicates) = dedup(&valid, training_canonicals);
    stats.duplicates_of_training = duplicates;
    stats.unique_canonical = valid.iter().collect::<HashSet<_>>().len();
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(Generation {
        raw,
        outcomes,
        valid,
        stats,
    })
}

/// Distinct generated strings absent from the training set, in first-seen
/// order, and the number of generated strings (with multiplicity) that
/// occur in it.
pub fn dedup(valid_canonicals: &[String], training_canonicals: &HashSet<String>) -> (Vec<String>, usize) {
    let mut seen = HashSet::new();
    let mut novel = Vec::new();
    let mut duplicates = 0;
    for s in valid_canonicals {
        if training_canonicals.contains(s) {
            duplicates += 1;
        } else if seen.insert(s.as_str()) {
            novel.push(s.clone());
        }
    }
    (novel, duplicates)
}
