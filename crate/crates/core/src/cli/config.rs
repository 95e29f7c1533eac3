//! Run configuration: one JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::InjectPosition;
use crate::error::{Error, Result};
use crate::neural::checkpoint::Dtype;
use crate::neural::Hyperparams;
use crate::policy::Policy;
use crate::reader::{InputMode, DEFAULT_MAX_ANSWER_LEN};
use crate::selector::Objective;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub reader_checkpoint: Option<PathBuf>,
    pub selector_checkpoint: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub distractors: Option<PathBuf>,
    pub train_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Neural,
    Tfidf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    /// Softmax of answerable logits across a paragraph's sentences.
    pub normalize: bool,
    pub objective: Objective,
    /// Start the selector encoder from the reader checkpoint.
    pub transfer: bool,
    /// Relabel oracle sentences the reader gets 0 F1 on.
    pub modify: bool,
    /// Selector sizes and optimizer settings; defaults to the reader's.
    pub hyperparams: Option<Hyperparams>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            normalize: true,
            objective: Objective::PerSentence,
            transfer: false,
            modify: false,
            hyperparams: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Seed for hashed out-of-vocabulary vectors.
    pub oov_seed: u64,
    pub hyperparams: Hyperparams,
    pub selector: SelectorConfig,
    pub policy: Policy,
    pub input_mode: InputMode,
    pub scorer: ScorerKind,
    pub tfidf_n_max: usize,
    /// Documents longer than this many sentences are pre-filtered with
    /// TF-IDF before neural scoring.
    pub candidate_sentences: usize,
    pub max_answer_len: usize,
    pub truncate: bool,
    /// Worker threads (0 = all cores, 1 = sequential).
    pub workers: usize,
    pub checkpoint_dtype: Dtype,
    pub inject_position: InjectPosition,
    /// Repeats for the Full vs Minimal timing in `evaluate` (0 = skip).
    pub speed_repeats: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            oov_seed: 0,
            hyperparams: Hyperparams::default(),
            selector: SelectorConfig::default(),
            policy: Policy::TopK(1),
            input_mode: InputMode::Full,
            scorer: ScorerKind::Neural,
            tfidf_n_max: crate::retrieval::DEFAULT_N_MAX,
            candidate_sentences: 200,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            truncate: true,
            workers: 0,
            checkpoint_dtype: Dtype::F64,
            inject_position: InjectPosition::Append,
            speed_repeats: 0,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
                hint: "config file not found".into(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn reader_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: self.seed,
            ..self.hyperparams.clone()
        }
    }

    pub fn selector_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: self.seed,
            ..self.selector.hyperparams.clone().unwrap_or_else(|| self.hyperparams.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.reader_hyperparams().validate()?;
        let shp = self.selector_hyperparams();
        shp.validate()?;
        if shp.h_d != self.hyperparams.h_d {
            return Err(Error::Config(format!(
                "selector h_d {} differs from the embedding width {}",
                shp.h_d, self.hyperparams.h_d
            )));
        }
        if self.selector.transfer && shp.h != self.hyperparams.h {
            return Err(Error::Config(format!(
                "weight transfer needs equal encoder widths (reader h {}, selector h {})",
                self.hyperparams.h, shp.h
            )));
        }
        self.policy.validate()?;
        if self.max_answer_len == 0 || self.tfidf_n_max == 0 || self.candidate_sentences == 0 {
            return Err(Error::Config(
                "max_answer_len, tfidf_n_max and candidate_sentences must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Path that must be set for the current command.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("no {what} path given (config `paths` or flag)")))
    }
}
