use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use molgen_core::baseline;
use molgen_core::chemstats::compare_sets;
use molgen_core::genpipe::{generate_batch, train_with_progress, EpochReport};
use molgen_core::lexicon::{build_vocabulary, normalize, NormalizedSmiles, RejectionReason};
use molgen_core::molparse::{canonical_form, parse_str, MoleculeGraph};
use molgen_core::neural::{checkpoint_json, load_checkpoint};
use molgen_core::toycorpus::toy_corpus;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

mod settings;

use settings::{BaselineKnobs, ReportKnobs, SampleKnobs, TrainKnobs};

#[derive(Parser)]
#[command(name = "molgen", version, about = "SMILES language model pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw SMILES file into a training corpus and vocabulary.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the two-layer LSTM on a normalized corpus.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        knobs: TrainKnobs,
    },
    /// Sample molecules from a checkpoint.
    Generate {
        /// Checkpoint file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training corpus, for duplicate counting and a vocabulary check.
        #[arg(long)]
        training: Option<PathBuf>,
        #[command(flatten)]
        knobs: SampleKnobs,
    },
    /// Fit the random-string control model and generate a control set.
    Baseline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        knobs: BaselineKnobs,
    },
    /// Compare generated and control sets against the training set.
    Analyze {
        /// Training molecules.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        knobs: ReportKnobs,
    },
    /// Write a synthetic drug-like SMILES file for trying the pipeline.
    ToyCorpus {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { input, output, config } => preprocess(&input, &output, config.as_deref()),
        Command::Train { input, output, config, knobs } => train(&input, &output, config.as_deref(), &knobs),
        Command::Generate {
            input,
            output,
            config,
            training,
            knobs,
        } => generate(&input, &output, config.as_deref(), training.as_deref(), &knobs),
        Command::Baseline { input, output, config, knobs } => run_baseline(&input, &output, config.as_deref(), &knobs),
        Command::Analyze {
            input,
            generated,
            baseline,
            output,
            config,
            knobs,
        } => analyze(&input, generated.as_deref(), baseline.as_deref(), &output, config.as_deref(), &knobs),
        Command::ToyCorpus { output, count, seed } => {
            ensure!(count > 0, "--count must be at least 1");
            prepare_dir(&output)?;
            write_lines(&output.join("toy.smi"), &toy_corpus(count, seed))?;
            record(&output, "toy-corpus", json!({}), json!({ "count": count, "seed": seed }))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    write(path, &text)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Writes `run_config.json`: tool version, inputs and resolved settings.
fn record(dir: &Path, command: &str, inputs: serde_json::Value, config: serde_json::Value) -> Result<()> {
    write_json(
        &dir.join("run_config.json"),
        &json!({
            "tool": "molgen",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "inputs": inputs,
            "config": config,
        }),
    )
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// A corpus file that must already be in normalized form.
fn read_corpus(path: &Path) -> Result<Vec<NormalizedSmiles>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (n, line) in lines(&text) {
        match normalize(line) {
            Ok(s) => out.push(s),
            Err(reason) => bail!("{}:{n}: not a corpus line ({reason})", path.display()),
        }
    }
    ensure!(!out.is_empty(), "{} contains no molecules", path.display());
    Ok(out)
}

fn preprocess(input: &Path, output: &Path, config: Option<&Path>) -> Result<()> {
    if let Some(c) = config {
        read(c)?;
    }
    let text = read(input)?;
    let mut corpus = Vec::new();
    let mut log = String::new();
    let mut counts: BTreeMap<String, usize> = RejectionReason::ALL.iter().map(|r| (r.to_string(), 0)).collect();
    for (n, line) in lines(&text) {
        match normalize(line) {
            Ok(s) => corpus.push(s.into_string()),
            Err(reason) => {
                *counts.entry(reason.to_string()).or_default() += 1;
                log.push_str(&format!("{n}\t{reason}\t{line}\n"));
            }
        }
    }
    ensure!(!corpus.is_empty(), "no molecules in {} survived normalization", input.display());
    let vocab = build_vocabulary(&corpus)?;
    prepare_dir(output)?;
    write_lines(&output.join("corpus.smi"), &corpus)?;
    write(&output.join("vocabulary.json"), &vocab.to_json())?;
    write(&output.join("rejections.tsv"), &log)?;
    let rejected: usize = counts.values().sum();
    write_json(
        &output.join("preprocess_stats.json"),
        &json!({ "kept": corpus.len(), "rejected": rejected, "rejections": counts }),
    )?;
    eprintln!("kept {} molecules, rejected {rejected}", corpus.len());
    record(output, "preprocess", json!({ "input": input }), json!({}))
}

fn train(input: &Path, output: &Path, config: Option<&Path>, flags: &TrainKnobs) -> Result<()> {
    let cfg = settings::load::<TrainKnobs>(config)?.resolve(flags);
    cfg.validate()?;
    let corpus = read_corpus(input)?;
    prepare_dir(output)?;
    record(output, "train", json!({ "input": input }), serde_json::to_value(&cfg)?)?;
    let mut history: Vec<EpochReport> = Vec::new();
    let outcome = train_with_progress(&corpus, &cfg, |r| {
        eprintln!(
            "epoch {}/{}: lr {:.6} loss {:.4} ({} windows)",
            r.epoch + 1,
            cfg.epochs,
            r.learning_rate,
            r.mean_loss,
            r.windows
        );
        history.push(*r);
    })?;
    write(
        &output.join("checkpoint.json"),
        &checkpoint_json(&outcome.params, &outcome.vocab, Some(outcome.init.clone())),
    )?;
    write(&output.join("vocabulary.json"), &outcome.vocab.to_json())?;
    write_json(&output.join("loss_history.json"), &history)
}

fn generate(
    input: &Path,
    output: &Path,
    config: Option<&Path>,
    training: Option<&Path>,
    flags: &SampleKnobs,
) -> Result<()> {
    let (cfg, workers) = settings::load::<SampleKnobs>(config)?.resolve(flags);
    cfg.validate()?;
    ensure!(workers > 0, "--workers must be at least 1");
    let (params, vocab) = load_checkpoint(input).with_context(|| format!("cannot load checkpoint {}", input.display()))?;
    let mut known = HashSet::new();
    if let Some(path) = training {
        let corpus = read_corpus(path)?;
        ensure!(
            build_vocabulary(&corpus)? == vocab,
            "checkpoint vocabulary does not match the vocabulary of {}",
            path.display()
        );
        known = corpus
            .iter()
            .filter_map(|s| parse_str(s.as_str()).ok())
            .map(|g| canonical_form(&g))
            .collect();
    }
    let run = generate_batch(&params, &vocab, &cfg, workers, &known)?;
    prepare_dir(output)?;
    write_lines(&output.join("molecules.smi"), &run.valid)?;
    write_json(&output.join("stats.json"), &run.stats)?;
    let s = &run.stats;
    eprintln!(
        "{} samples: {} valid, {} rejected by the prefilter, {} by the parser",
        s.requested, s.valid, s.syntactic_rejects, s.parse_rejects
    );
    let mut resolved = serde_json::to_value(&cfg)?;
    resolved["workers"] = json!(workers);
    record(output, "generate", json!({ "input": input, "training": training }), resolved)
}

fn run_baseline(input: &Path, output: &Path, config: Option<&Path>, flags: &BaselineKnobs) -> Result<()> {
    let cfg = settings::load::<BaselineKnobs>(config)?.resolve(flags);
    ensure!(cfg.count > 0, "--count must be at least 1");
    let corpus = read_corpus(input)?;
    let model = baseline::fit(&corpus.iter().map(NormalizedSmiles::as_str).collect::<Vec<_>>())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let limit = cfg.count.saturating_mul(1000);
    let mut molecules = Vec::with_capacity(cfg.count);
    let mut tries = 0;
    while molecules.len() < cfg.count && tries < limit {
        tries += 1;
        if let Ok(g) = parse_str(&baseline::generate(&model, &mut rng)) {
            molecules.push(canonical_form(&g));
        }
    }
    ensure!(
        molecules.len() == cfg.count,
        "only {} of {} baseline strings parsed after {tries} tries",
        molecules.len(),
        cfg.count
    );
    prepare_dir(output)?;
    write(&output.join("baseline_model.json"), &model.to_json())?;
    write_lines(&output.join("molecules.smi"), &molecules)?;
    write_json(&output.join("stats.json"), &json!({ "parsed": molecules.len(), "generated": tries }))?;
    eprintln!("{} molecules from {tries} generated strings", molecules.len());
    record(output, "baseline", json!({ "input": input }), serde_json::to_value(cfg)?)
}

struct MoleculeSet {
    graphs: Vec<MoleculeGraph>,
    skipped: usize,
}

fn read_molecules(path: &Path) -> Result<MoleculeSet> {
    let text = read(path)?;
    let mut graphs = Vec::new();
    let mut skipped = 0;
    for (_, line) in lines(&text) {
        match normalize(line).ok().and_then(|s| parse_str(s.as_str()).ok()) {
            Some(g) => graphs.push(g),
            None => skipped += 1,
        }
    }
    ensure!(!graphs.is_empty(), "{} contains no parseable molecules", path.display());
    Ok(MoleculeSet { graphs, skipped })
}

fn analyze(
    input: &Path,
    generated: Option<&Path>,
    baseline: Option<&Path>,
    output: &Path,
    config: Option<&Path>,
    flags: &ReportKnobs,
) -> Result<()> {
    let cfg = settings::load::<ReportKnobs>(config)?.resolve(flags);
    let training = read_molecules(input)?;
    let mut others = Vec::new();
    for (name, path) in [("generated", generated), ("baseline", baseline)] {
        if let Some(p) = path {
            others.push((name, read_molecules(p)?));
        }
    }
    let named: Vec<(&str, &[MoleculeGraph])> = others.iter().map(|(n, s)| (*n, s.graphs.as_slice())).collect();
    let report = compare_sets(&training.graphs, &named, &cfg)?;
    prepare_dir(output)?;
    write(&output.join("report.json"), &(report.to_json() + "\n"))?;
    write(&output.join("table1.csv"), &report.table1_csv())?;
    let mut skipped = json!({ "training": training.skipped });
    for (name, set) in &others {
        skipped[*name] = json!(set.skipped);
        if set.skipped > 0 {
            eprintln!("{name}: skipped {} unparseable lines", set.skipped);
        }
    }
    for k in &report.ks {
        eprintln!(
            "KS {} {} vs {}: D = {:.4}, critical {:.4}{}",
            k.quantity,
            k.first,
            k.second,
            k.result.d,
            k.result.critical,
            if k.result.reject { ", distributions differ" } else { "" }
        );
    }
    record(
        output,
        "analyze",
        json!({ "input": input, "generated": generated, "baseline": baseline, "skipped_lines": skipped }),
        serde_json::to_value(cfg)?,
    )
}
