//! `minictx` command-line interface.

pub mod config;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::squad::write_squad_json;
use crate::corpus::{load_squad_json, read_distractors, truncate_document, CorpusStats, QaExample};
use crate::embed::{load_embedding_file, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::measure_speed;
use crate::exec::{with_workers, Execution};
use crate::neural::checkpoint;
use crate::neural::params::to_named;
use crate::pipeline::{adversarial_run, evaluate, predict_dataset, select_dataset, selection_map, Scorer};
use crate::policy::{read_selection_dump, write_selection_dump, Policy};
use crate::reader::{self, train_reader, InputMode, Reader, ReaderParams};
use crate::selector::{self, build_selector_training_set, train_selector, transfer_encoder_weights, SelectorParams};
use crate::synthetic::{generate, SyntheticConfig};
use crate::train::TrainHistory;

pub use config::{Paths, RunConfig, ScorerKind, SelectorConfig};

#[derive(Debug, Parser)]
#[command(name = "minictx", version, about = "Sentence selection for fast extractive question answering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic lexical-overlap dataset in SQuAD format.
    GenSynthetic(GenArgs),
    /// Train the span reader.
    TrainReader(RunArgs),
    /// Train the sentence selector.
    TrainSelector(RunArgs),
    /// Score and select sentences; writes a selection dump.
    Select(RunArgs),
    /// Answer questions; writes a predictions file.
    Predict(RunArgs),
    /// Select, answer and report metrics.
    Evaluate(RunArgs),
    /// Compare clean and distractor-injected runs.
    Adversarial(RunArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_questions: usize,
    #[arg(long, default_value_t = 5)]
    pub sentences: usize,
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one adversarial sentence per question here.
    #[arg(long)]
    pub distractors: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub reader_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub selector_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub distractors: Option<PathBuf>,
    #[arg(long)]
    pub train_log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = parse_input_mode)]
    pub input_mode: Option<InputMode>,
    /// Keep the k best sentences.
    #[arg(long, conflicts_with = "th")]
    pub top_k: Option<usize>,
    /// Dynamic threshold in [0, 1].
    #[arg(long)]
    pub th: Option<f64>,
    #[arg(long, value_parser = parse_scorer)]
    pub scorer: Option<ScorerKind>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub transfer: Option<bool>,
    #[arg(long)]
    pub modify: Option<bool>,
    #[arg(long)]
    pub normalize: Option<bool>,
}

fn parse_input_mode(s: &str) -> std::result::Result<InputMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown input mode `{s}`"))
}

fn parse_scorer(s: &str) -> std::result::Result<ScorerKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown scorer `{s}`"))
}

impl RunArgs {
    /// Config file (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.paths;
        for (slot, flag) in [
            (&mut p.dataset, &self.dataset),
            (&mut p.embeddings, &self.embeddings),
            (&mut p.reader_checkpoint, &self.reader_checkpoint),
            (&mut p.selector_checkpoint, &self.selector_checkpoint),
            (&mut p.selection, &self.selection),
            (&mut p.predictions, &self.predictions),
            (&mut p.metrics, &self.metrics),
            (&mut p.distractors, &self.distractors),
            (&mut p.train_log, &self.train_log),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.hyperparams.epochs = e;
            if let Some(h) = cfg.selector.hyperparams.as_mut() {
                h.epochs = e;
            }
        }
        if let Some(m) = self.input_mode {
            cfg.input_mode = m;
        }
        if let Some(k) = self.top_k {
            cfg.policy = Policy::TopK(k);
        }
        if let Some(th) = self.th {
            cfg.policy = Policy::Dyn(th);
        }
        if let Some(s) = self.scorer {
            cfg.scorer = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(t) = self.transfer {
            cfg.selector.transfer = t;
        }
        if let Some(m) = self.modify {
            cfg.selector.modify = m;
        }
        if let Some(n) = self.normalize {
            cfg.selector.normalize = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse arguments, run, and map the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("minictx: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic(a) => cmd_gen_synthetic(&a),
        Command::TrainReader(a) => with_config(&a, cmd_train_reader),
        Command::TrainSelector(a) => with_config(&a, cmd_train_selector),
        Command::Select(a) => with_config(&a, cmd_select),
        Command::Predict(a) => with_config(&a, cmd_predict),
        Command::Evaluate(a) => with_config(&a, cmd_evaluate),
        Command::Adversarial(a) => with_config(&a, cmd_adversarial),
    }
}

fn with_config(args: &RunArgs, f: fn(&RunConfig) -> Result<()>) -> Result<()> {
    let cfg = args.resolve()?;
    with_workers(cfg.workers, || f(&cfg))
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.workers == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn cmd_gen_synthetic(a: &GenArgs) -> Result<()> {
    let corpus = generate(&SyntheticConfig {
        n_questions: a.n_questions,
        sentences_per_doc: a.sentences,
        vocab_size: a.vocab_size,
        seed: a.seed,
    })?;
    write_squad_json(&a.out, &corpus.file)?;
    if let Some(path) = &a.distractors {
        let mut text = corpus.distractors.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<Vec<QaExample>> {
    let examples = load_squad_json(cfg.require(&cfg.paths.dataset, "dataset")?)?;
    if examples.is_empty() {
        return Err(Error::Data("dataset has no questions".into()));
    }
    if !cfg.truncate {
        return Ok(examples);
    }
    let stats = CorpusStats::from_examples(&examples);
    Ok(examples.iter().map(|e| truncate_document(e, &stats)).collect())
}

fn load_table(cfg: &RunConfig) -> Result<EmbeddingTable> {
    match &cfg.paths.embeddings {
        Some(p) => load_embedding_file(p, cfg.hyperparams.h_d, cfg.oov_seed),
        None => Ok(EmbeddingTable::hashed(cfg.hyperparams.h_d, cfg.oov_seed)),
    }
}

fn check_width(what: &str, h_d: usize, table: &EmbeddingTable) -> Result<()> {
    if h_d != table.dim() {
        return Err(Error::Config(format!(
            "{what} checkpoint expects {h_d}-dimensional embeddings, configured width is {}",
            table.dim()
        )));
    }
    Ok(())
}

fn load_reader(cfg: &RunConfig, table: &EmbeddingTable) -> Result<ReaderParams> {
    let p = ReaderParams::from_named(&checkpoint::load(cfg.require(&cfg.paths.reader_checkpoint, "reader checkpoint")?)?)?;
    check_width("reader", p.encoder.h_d(), table)?;
    Ok(p)
}

fn load_selector(cfg: &RunConfig, table: &EmbeddingTable) -> Result<SelectorParams> {
    let p = SelectorParams::from_named(&checkpoint::load(
        cfg.require(&cfg.paths.selector_checkpoint, "selector checkpoint")?,
    )?)?;
    check_width("selector", p.encoder.h_d(), table)?;
    Ok(p)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_log(cfg: &RunConfig, history: &TrainHistory) -> Result<()> {
    let mut text = String::new();
    for s in &history.steps {
        text.push_str(&serde_json::to_string(s).expect("log line serializes"));
        text.push('\n');
    }
    match &cfg.paths.train_log {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            eprint!("{text}");
            if history.skipped > 0 {
                eprintln!("skipped {} examples without a usable gold span", history.skipped);
            }
            Ok(())
        }
    }
}

fn read_selections(cfg: &RunConfig) -> Result<HashMap<String, Vec<usize>>> {
    Ok(selection_map(&read_selection_dump(cfg.require(&cfg.paths.selection, "selection dump")?)?))
}

pub fn cmd_train_reader(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require(&cfg.paths.reader_checkpoint, "reader checkpoint")?;
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let selections = match cfg.input_mode {
        InputMode::Minimal => Some(read_selections(cfg)?),
        _ => None,
    };
    let hp = cfg.reader_hyperparams();
    let mut params = ReaderParams::new(hp.h_d, hp.h, hp.seed);
    let history = train_reader(&dataset, &table, &mut params, &hp, cfg.input_mode, selections.as_ref(), execution(cfg))?;
    checkpoint::save(out, &to_named(&params, reader::PREFIX), cfg.checkpoint_dtype)?;
    write_log(cfg, &history)
}

pub fn cmd_train_selector(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require(&cfg.paths.selector_checkpoint, "selector checkpoint")?;
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let hp = cfg.selector_hyperparams();
    let reader_params = if cfg.selector.transfer || cfg.selector.modify {
        Some(load_reader(cfg, &table)?)
    } else {
        None
    };
    let mut params = match (&reader_params, cfg.selector.transfer) {
        (Some(r), true) => transfer_encoder_weights(&to_named(r, reader::PREFIX), hp.h_d, hp.h, hp.seed)?,
        _ => SelectorParams::new(hp.h_d, hp.h, hp.seed),
    };
    let reader = reader_params.as_ref().map(|p| Reader {
        params: p,
        table: &table,
        max_answer_len: cfg.max_answer_len,
    });
    let set = build_selector_training_set(
        &dataset,
        reader.as_ref().map(|r| r as &dyn selector::SentenceReader),
        cfg.selector.modify,
    )?;
    let history = train_selector(&set, &table, &mut params, &hp, cfg.selector.objective, execution(cfg))?;
    checkpoint::save(out, &to_named(&params, selector::PREFIX), cfg.checkpoint_dtype)?;
    write_log(cfg, &history)
}

fn with_scorer<R>(cfg: &RunConfig, table: &EmbeddingTable, f: impl FnOnce(Scorer<'_>) -> Result<R>) -> Result<R> {
    match cfg.scorer {
        ScorerKind::Tfidf => f(Scorer::Tfidf { n_max: cfg.tfidf_n_max }),
        ScorerKind::Neural => {
            let params = load_selector(cfg, table)?;
            f(Scorer::Neural {
                params: &params,
                table,
                normalize: cfg.selector.normalize,
            })
        }
    }
}

pub fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require(&cfg.paths.selection, "selection dump")?;
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let results = with_scorer(cfg, &table, |s| {
        select_dataset(&dataset, s, cfg.policy, cfg.candidate_sentences, execution(cfg))
    })?;
    write_selection_dump(out, &results)
}

fn predictions_json(preds: &BTreeMap<String, String>) -> String {
    serde_json::to_string_pretty(preds).expect("predictions serialize")
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require(&cfg.paths.predictions, "predictions")?;
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let params = load_reader(cfg, &table)?;
    let selections = match cfg.input_mode {
        InputMode::Minimal => Some(read_selections(cfg)?),
        _ => None,
    };
    let reader = Reader {
        params: &params,
        table: &table,
        max_answer_len: cfg.max_answer_len,
    };
    let preds = predict_dataset(&dataset, reader, cfg.input_mode, selections.as_ref(), execution(cfg))?;
    write_text(Some(out), &predictions_json(&preds))
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let exec = execution(cfg);
    let scorer_available = cfg.scorer == ScorerKind::Tfidf || cfg.paths.selector_checkpoint.is_some();
    let selector_params = match (cfg.scorer, scorer_available) {
        (ScorerKind::Neural, true) => Some(load_selector(cfg, &table)?),
        _ => None,
    };
    let scorer = match (&selector_params, cfg.scorer) {
        (_, ScorerKind::Tfidf) => Some(Scorer::Tfidf { n_max: cfg.tfidf_n_max }),
        (Some(p), ScorerKind::Neural) => Some(Scorer::Neural {
            params: p,
            table: &table,
            normalize: cfg.selector.normalize,
        }),
        _ => None,
    };
    let selections = scorer
        .map(|s| select_dataset(&dataset, s, cfg.policy, cfg.candidate_sentences, exec))
        .transpose()?;
    if cfg.input_mode == InputMode::Minimal && selections.is_none() {
        return Err(Error::Config("minimal input mode needs a selector checkpoint or the tfidf scorer".into()));
    }
    let reader_params = match &cfg.paths.reader_checkpoint {
        Some(_) => Some(load_reader(cfg, &table)?),
        None => None,
    };
    let reader = reader_params.as_ref().map(|p| Reader {
        params: p,
        table: &table,
        max_answer_len: cfg.max_answer_len,
    });
    let sel_map = selections.as_deref().map(selection_map);
    let predictions = reader
        .map(|r| predict_dataset(&dataset, r, cfg.input_mode, sel_map.as_ref(), exec))
        .transpose()?;
    if let (Some(p), Some(preds)) = (&cfg.paths.predictions, &predictions) {
        write_text(Some(p), &predictions_json(preds))?;
    }
    let mut report = evaluate(&dataset, selections.as_deref(), predictions.as_ref())?;
    if cfg.speed_repeats > 0 {
        let (Some(r), Some(s)) = (reader, scorer) else {
            return Err(Error::Config("speed measurement needs a reader and a scorer".into()));
        };
        let m = measure_speed(
            || {
                let _ = predict_dataset(&dataset, r, InputMode::Full, None, exec);
            },
            || {
                if let Ok(sel) = select_dataset(&dataset, s, cfg.policy, cfg.candidate_sentences, exec) {
                    let _ = predict_dataset(&dataset, r, InputMode::Minimal, Some(&selection_map(&sel)), exec);
                }
            },
            cfg.speed_repeats,
        )?;
        report.speed_ratio = m.ratio;
    }
    write_text(cfg.paths.metrics.as_deref(), &report.to_json())
}

pub fn cmd_adversarial(cfg: &RunConfig) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let table = load_table(cfg)?;
    let distractors = read_distractors(cfg.require(&cfg.paths.distractors, "distractor list")?)?;
    let params = load_reader(cfg, &table)?;
    let reader = Reader {
        params: &params,
        table: &table,
        max_answer_len: cfg.max_answer_len,
    };
    let report = with_scorer(cfg, &table, |s| {
        adversarial_run(
            &dataset,
            &distractors,
            cfg.inject_position,
            s,
            cfg.policy,
            reader,
            cfg.candidate_sentences,
            execution(cfg),
        )
    })?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(cfg.paths.metrics.as_deref(), &text)
}
