//! Selection, answer and speed metrics.

pub mod ranking;
pub mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::oracle::contains_subsequence;
use crate::corpus::QaExample;
use crate::error::{Error, Result};
use crate::policy::{merge_selected, SelectionResult};

pub use ranking::{average_precision, hit_at_k, mean_average_precision, MapResult};
pub use text::{exact_match, normalize_answer, normalize_tokens, token_f1};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub map_score: f64,
    pub selection_accuracy: f64,
    pub em: f64,
    pub f1: f64,
    pub mean_selected: f64,
    pub speed_ratio: f64,
    pub n_questions: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

fn index(dataset: &[QaExample]) -> HashMap<&str, &QaExample> {
    dataset.iter().map(|e| (e.id.as_str(), e)).collect()
}

fn lookup<'a>(idx: &HashMap<&str, &'a QaExample>, id: &str) -> Result<&'a QaExample> {
    idx.get(id)
        .copied()
        .ok_or_else(|| Error::Data(format!("selection for unknown question id `{id}`")))
}

/// Whether any gold answer's normalized tokens occur contiguously in the
/// merged selected sentences.
pub fn selection_contains_answer(ex: &QaExample, selected: &[usize]) -> bool {
    let merged = merge_selected(ex, selected);
    let words: Vec<&str> = merged.tokens.iter().map(|t| t.text.as_str()).collect();
    let hay = normalize_tokens(&words.join(" "));
    ex.answers.iter().any(|a| contains_subsequence(&hay, &normalize_tokens(&a.text)))
}

/// Fraction of questions whose selected context contains an answer.
pub fn selection_accuracy(results: &[SelectionResult], dataset: &[QaExample]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Data("no selections to evaluate".into()));
    }
    let idx = index(dataset);
    let mut hits = 0usize;
    for r in results {
        if selection_contains_answer(lookup(&idx, &r.question_id)?, &r.selected_indices) {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

fn ranked_with_oracle(
    results: &[SelectionResult],
    dataset: &[QaExample],
) -> Result<Vec<(Vec<usize>, BTreeSet<usize>)>> {
    let idx = index(dataset);
    results
        .iter()
        .map(|r| {
            let ex = lookup(&idx, &r.question_id)?;
            Ok((r.ranking(), ex.oracle_sentence_indices.iter().copied().collect()))
        })
        .collect()
}

/// Fraction of questions with an oracle sentence among the top `k` ranked;
/// questions without oracle sentences are left out.
pub fn top_k_accuracy(results: &[SelectionResult], dataset: &[QaExample], k: usize) -> Result<f64> {
    let pairs = ranked_with_oracle(results, dataset)?;
    let scored: Vec<_> = pairs.iter().filter(|(_, rel)| !rel.is_empty()).collect();
    if scored.is_empty() {
        return Err(Error::Data("no question has an oracle sentence".into()));
    }
    let hits = scored.iter().filter(|(r, rel)| hit_at_k(r, rel, k)).count();
    Ok(hits as f64 / scored.len() as f64)
}

/// MAP of the selector rankings against oracle sentences.
pub fn selection_map(results: &[SelectionResult], dataset: &[QaExample]) -> Result<MapResult> {
    Ok(mean_average_precision(&ranked_with_oracle(results, dataset)?))
}

pub fn mean_selected(results: &[SelectionResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(|r| r.selected_indices.len()).sum::<usize>() as f64 / results.len() as f64
}

/// Mean EM and F1 of `predictions` (id → answer) over `dataset`. Missing
/// predictions score zero.
pub fn answer_metrics(predictions: &BTreeMap<String, String>, dataset: &[QaExample]) -> Result<(f64, f64)> {
    let scored: Vec<&QaExample> = dataset.iter().filter(|e| !e.answers.is_empty()).collect();
    if scored.is_empty() {
        return Err(Error::Data("no question with gold answers to evaluate".into()));
    }
    let (mut em, mut f1) = (0.0, 0.0);
    for ex in &scored {
        let golds = ex.gold_texts();
        let pred = predictions.get(&ex.id).map_or("", String::as_str);
        em += exact_match(pred, &golds);
        f1 += token_f1(pred, &golds);
    }
    let n = scored.len() as f64;
    Ok((em / n, f1 / n))
}

/// Timing of a baseline and a variant workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedMeasurement {
    pub baseline_median: Duration,
    pub variant_median: Duration,
    /// `baseline_median / variant_median`; above 1 means the variant is faster.
    pub ratio: f64,
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Median wall-clock of `repeats` alternating runs of each workload.
pub fn measure_speed(mut baseline: impl FnMut(), mut variant: impl FnMut(), repeats: usize) -> Result<SpeedMeasurement> {
    if repeats < 3 {
        return Err(Error::Config(format!("speed measurement needs at least 3 repeats, got {repeats}")));
    }
    let mut a = Vec::with_capacity(repeats);
    let mut b = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        baseline();
        a.push(t.elapsed());
        let t = Instant::now();
        variant();
        b.push(t.elapsed());
    }
    let (baseline_median, variant_median) = (median(a), median(b));
    Ok(SpeedMeasurement {
        baseline_median,
        variant_median,
        ratio: baseline_median.as_secs_f64() / variant_median.as_secs_f64().max(1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_example, RawAnswer};
    use crate::policy::{select_dyn, select_top_k};
    use crate::selector::SentenceScore;

    fn scores(v: &[f64]) -> Vec<SentenceScore> {
        v.iter()
            .enumerate()
            .map(|(i, &score)| SentenceScore {
                sentence_index: i,
                raw_logits: None,
                score,
            })
            .collect()
    }

    fn example() -> QaExample {
        let ctx = "Rain fell. Tesla was born in 1856. Birds sang.";
        build_example(
            "q1",
            ctx,
            "When was Tesla born?",
            &[RawAnswer {
                text: "1856",
                char_start: Some(ctx.find("1856").unwrap()),
            }],
        )
    }

    #[test]
    fn selection_fixtures() {
        let ds = vec![example()];
        let oracle = select_top_k(&scores(&[0.1, 0.8, 0.1]), 1).with_id("q1");
        assert_eq!(selection_accuracy(&[oracle], &ds).unwrap(), 1.0);
        let wrong = select_top_k(&scores(&[0.8, 0.1, 0.1]), 1).with_id("q1");
        assert_eq!(selection_accuracy(std::slice::from_ref(&wrong), &ds).unwrap(), 0.0);
        let two = select_dyn(&scores(&[0.45, 0.45, 0.1]), 0.6).with_id("q1");
        assert_eq!(two.selected_indices, vec![0, 1]);
        assert_eq!(selection_accuracy(&[two], &ds).unwrap(), 1.0);
        let stray = wrong.with_id("nope");
        assert!(selection_accuracy(&[stray], &ds).is_err());
    }

    #[test]
    fn top_k_and_map() {
        let ds = vec![example()];
        let r = select_top_k(&scores(&[0.5, 0.3, 0.2]), 1).with_id("q1");
        assert_eq!(top_k_accuracy(std::slice::from_ref(&r), &ds, 1).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(std::slice::from_ref(&r), &ds, 2).unwrap(), 1.0);
        assert!((selection_map(&[r], &ds).unwrap().map - 0.5).abs() < 1e-15);
    }

    #[test]
    fn answers() {
        let ds = vec![example()];
        let mut preds = BTreeMap::new();
        preds.insert("q1".to_string(), "in 1856".to_string());
        let (em, f1) = answer_metrics(&preds, &ds).unwrap();
        assert_eq!(em, 0.0);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(answer_metrics(&BTreeMap::new(), &ds).unwrap(), (0.0, 0.0));
        assert!(answer_metrics(&preds, &[]).is_err());
    }

    #[test]
    fn report_json_field_names() {
        let mut r = MetricsReport::default();
        r.top_k_accuracy.insert(1, 0.5);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "top_k_accuracy",
            "map_score",
            "selection_accuracy",
            "em",
            "f1",
            "mean_selected",
            "speed_ratio",
            "n_questions",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(r.to_json().contains('\n'));
    }

    fn spin(n: u64) -> u64 {
        let mut x = 0u64;
        for i in 0..n {
            x = std::hint::black_box(x.wrapping_mul(31).wrapping_add(i));
        }
        x
    }

    #[test]
    fn speed_ratio_of_doubled_workload() {
        assert!(measure_speed(|| (), || (), 2).is_err());
        let m = measure_speed(
            || {
                spin(2_000_000);
            },
            || {
                spin(2_000_000);
                spin(2_000_000);
            },
            5,
        )
        .unwrap();
        assert!(m.ratio > 0.3 && m.ratio < 0.8, "{m:?}");
    }
}
