//! End-to-end helpers: score, select, read, and evaluate a dataset.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::{inject_adversarial, injected_index, InjectPosition, QaExample};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{self, MetricsReport};
use crate::exec::Execution;
use crate::policy::{merge_selected, select, Policy, SelectionResult};
use crate::reader::{input_sentences, InputMode, Reader, SpanPrediction};
use crate::retrieval::{build_index, rank_by_tfidf, tfidf_sentence_scores};
use crate::selector::{score_paragraph, SelectorParams, SentenceScore};

/// How sentences are scored before a policy is applied.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    Neural {
        params: &'a SelectorParams,
        table: &'a EmbeddingTable,
        normalize: bool,
    },
    Tfidf {
        n_max: usize,
    },
}

/// Sentence scores for one example. When the document has more than
/// `max_candidates` sentences, only the TF-IDF top candidates are scored by
/// the neural selector; the rest get score 0.
pub fn score_example(ex: &QaExample, scorer: Scorer<'_>, max_candidates: usize, exec: Execution) -> Vec<SentenceScore> {
    match scorer {
        Scorer::Tfidf { n_max } => tfidf_sentence_scores(ex, n_max),
        Scorer::Neural {
            params,
            table,
            normalize,
        } => {
            let n = ex.sentences.len();
            let mut candidates: Vec<usize> = (0..n).collect();
            if n > max_candidates {
                let units: Vec<Vec<&str>> = (0..n)
                    .map(|i| ex.sentence_tokens(i).iter().map(|t| t.text.as_str()).collect())
                    .collect();
                let index = build_index(&units, crate::retrieval::DEFAULT_N_MAX);
                let q: Vec<&str> = ex.question_tokens.iter().map(|t| t.text.as_str()).collect();
                candidates = rank_by_tfidf(&index, &q, &units);
                candidates.truncate(max_candidates.max(1));
                candidates.sort_unstable();
            }
            let sentences: Vec<_> = candidates.iter().map(|&i| table.embed_tokens(ex.sentence_tokens(i))).collect();
            let question = table.embed_tokens(&ex.question_tokens);
            let scored = score_paragraph(&sentences, &question, params, normalize, exec);
            let mut out: Vec<SentenceScore> = (0..n)
                .map(|i| SentenceScore {
                    sentence_index: i,
                    raw_logits: None,
                    score: 0.0,
                })
                .collect();
            for (s, &i) in scored.into_iter().zip(&candidates) {
                out[i] = SentenceScore { sentence_index: i, ..s };
            }
            out
        }
    }
}

/// Score and select every example. Examples are processed in order; the
/// sentences of each are scored with `exec`.
pub fn select_dataset(
    dataset: &[QaExample],
    scorer: Scorer<'_>,
    policy: Policy,
    max_candidates: usize,
    exec: Execution,
) -> Result<Vec<SelectionResult>> {
    policy.validate()?;
    dataset
        .iter()
        .map(|ex| {
            if ex.sentences.is_empty() {
                return Err(Error::Data(format!("example `{}` has no sentences", ex.id)));
            }
            Ok(select(&ex.id, &score_example(ex, scorer, max_candidates, exec), policy))
        })
        .collect()
}

pub fn selection_map(results: &[SelectionResult]) -> HashMap<String, Vec<usize>> {
    results
        .iter()
        .map(|r| (r.question_id.clone(), r.selected_indices.clone()))
        .collect()
}

/// Reader predictions keyed by question id. Examples with nothing to feed
/// in the chosen mode get an empty answer.
pub fn predict_dataset(
    dataset: &[QaExample],
    reader: Reader<'_>,
    mode: InputMode,
    selections: Option<&HashMap<String, Vec<usize>>>,
    exec: Execution,
) -> Result<BTreeMap<String, String>> {
    if mode == InputMode::Minimal && selections.is_none() {
        return Err(Error::Config("minimal input mode needs a selection".into()));
    }
    if let Some(sel) = selections.filter(|_| mode == InputMode::Minimal) {
        if let Some(ex) = dataset.iter().find(|e| !sel.contains_key(&e.id)) {
            return Err(Error::Data(format!("no selection for question `{}`", ex.id)));
        }
    }
    let answers = exec.map(dataset, |ex| match input_sentences(ex, mode, selections) {
        Some(s) => reader.predict(ex, Some(&s)).text,
        None => String::new(),
    });
    Ok(dataset.iter().map(|e| e.id.clone()).zip(answers).collect())
}

/// Metrics for one run. Selection metrics are filled only when
/// `selections` is given; answer metrics only when `predictions` is.
pub fn evaluate(
    dataset: &[QaExample],
    selections: Option<&[SelectionResult]>,
    predictions: Option<&BTreeMap<String, String>>,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    let mut report = MetricsReport {
        n_questions: dataset.len(),
        ..Default::default()
    };
    if let Some(sel) = selections {
        for k in [1, 2, 3] {
            report.top_k_accuracy.insert(k, eval::top_k_accuracy(sel, dataset, k)?);
        }
        report.map_score = eval::selection_map(sel, dataset)?.map;
        report.selection_accuracy = eval::selection_accuracy(sel, dataset)?;
        report.mean_selected = eval::mean_selected(sel);
    }
    if let Some(preds) = predictions {
        let (em, f1) = eval::answer_metrics(preds, dataset)?;
        report.em = em;
        report.f1 = f1;
    }
    Ok(report)
}

/// Bitwise equality of two predictions, scores included.
pub fn same_prediction(a: &SpanPrediction, b: &SpanPrediction) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    a.start == b.start
        && a.end == b.end
        && a.text == b.text
        && bits(&a.start_scores) == bits(&b.start_scores)
        && bits(&a.end_scores) == bits(&b.end_scores)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialOutcome {
    pub id: String,
    pub injected_index: usize,
    pub injected_selected: bool,
    /// Full-document answer differs between clean and adversarial inputs.
    pub full_changed: bool,
    /// Minimal answer differs from the clean run's Minimal answer.
    pub minimal_changed: bool,
    /// When the injected sentence was not selected: the Minimal prediction
    /// differs from reading the same sentences of the clean document.
    pub minimal_changed_same_selection: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialReport {
    pub clean_full: MetricsReport,
    pub adversarial_full: MetricsReport,
    pub clean_minimal: MetricsReport,
    pub adversarial_minimal: MetricsReport,
    pub injected_selected_rate: f64,
    pub full_change_rate: f64,
    pub minimal_change_rate: f64,
    /// Over questions whose injected sentence was excluded.
    pub excluded: usize,
    pub minimal_change_rate_when_excluded: f64,
    pub outcomes: Vec<AdversarialOutcome>,
}

fn rate(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        hit += usize::from(f);
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// Inject `distractors[i % len]` into example `i`, then compare Full and
/// Minimal predictions against the clean runs.
pub fn adversarial_run(
    dataset: &[QaExample],
    distractors: &[String],
    position: InjectPosition,
    scorer: Scorer<'_>,
    policy: Policy,
    reader: Reader<'_>,
    max_candidates: usize,
    exec: Execution,
) -> Result<AdversarialReport> {
    if distractors.is_empty() {
        return Err(Error::Data("no distractor sentences".into()));
    }
    let attacked: Vec<QaExample> = dataset
        .iter()
        .enumerate()
        .map(|(i, ex)| inject_adversarial(ex, &distractors[i % distractors.len()], position))
        .collect::<Result<_>>()?;
    let clean_sel = select_dataset(dataset, scorer, policy, max_candidates, exec)?;
    let adv_sel = select_dataset(&attacked, scorer, policy, max_candidates, exec)?;

    let outcomes: Vec<(AdversarialOutcome, [String; 4])> = exec.map_indexed(dataset, |i, ex| {
        let adv = &attacked[i];
        let injected = injected_index(ex, position);
        let clean_full = reader.predict(ex, None);
        let adv_full = reader.predict(adv, None);
        let clean_min = reader.predict(ex, Some(&clean_sel[i].selected_indices));
        let adv_min = reader.predict(adv, Some(&adv_sel[i].selected_indices));
        let injected_selected = adv_sel[i].selected_indices.contains(&injected);
        let same_selection = (!injected_selected).then(|| {
            let original: Vec<usize> = adv_sel[i]
                .selected_indices
                .iter()
                .map(|&s| if position == InjectPosition::Prepend { s - 1 } else { s })
                .collect();
            let reference = reader.predict_merged(ex, &merge_selected(ex, &original));
            !same_prediction(&adv_min, &reference)
        });
        (
            AdversarialOutcome {
                id: ex.id.clone(),
                injected_index: injected,
                injected_selected,
                full_changed: clean_full.text != adv_full.text,
                minimal_changed: clean_min.text != adv_min.text,
                minimal_changed_same_selection: same_selection,
            },
            [clean_full.text, adv_full.text, clean_min.text, adv_min.text],
        )
    });

    let mut preds: [BTreeMap<String, String>; 4] = Default::default();
    for (o, texts) in &outcomes {
        for (p, t) in preds.iter_mut().zip(texts) {
            p.insert(o.id.clone(), t.clone());
        }
    }
    let outcomes: Vec<AdversarialOutcome> = outcomes.into_iter().map(|(o, _)| o).collect();
    let excluded: Vec<bool> = outcomes.iter().filter_map(|o| o.minimal_changed_same_selection).collect();
    Ok(AdversarialReport {
        clean_full: evaluate(dataset, None, Some(&preds[0]))?,
        adversarial_full: evaluate(&attacked, None, Some(&preds[1]))?,
        clean_minimal: evaluate(dataset, Some(&clean_sel), Some(&preds[2]))?,
        adversarial_minimal: evaluate(&attacked, Some(&adv_sel), Some(&preds[3]))?,
        injected_selected_rate: rate(outcomes.iter().map(|o| o.injected_selected)),
        full_change_rate: rate(outcomes.iter().map(|o| o.full_changed)),
        minimal_change_rate: rate(outcomes.iter().map(|o| o.minimal_changed)),
        excluded: excluded.len(),
        minimal_change_rate_when_excluded: rate(excluded.into_iter()),
        outcomes,
    })
}
