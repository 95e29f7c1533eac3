//! Selection policies over sentence scores, and merging the selected
//! sentences into the reader's input.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{QaExample, Token, TokenSpan};
use crate::error::{Error, Result};
use crate::selector::SentenceScore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "th_or_k", rename_all = "snake_case")]
pub enum Policy {
    TopK(usize),
    Dyn(f64),
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Policy::TopK(0) => Err(Error::Config("top-k policy needs k >= 1".into())),
            Policy::Dyn(th) if !(0.0..=1.0).contains(&th) => {
                Err(Error::Config(format!("dyn threshold {th} is outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::TopK(_) => "top_k",
            Policy::Dyn(_) => "dyn",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Policy::TopK(k) => k as f64,
            Policy::Dyn(th) => th,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub question_id: String,
    /// Descending by score, ties by lower sentence index.
    pub ranked: Vec<SentenceScore>,
    /// Ascending original sentence indices; never empty.
    pub selected_indices: Vec<usize>,
    pub policy: Policy,
}

impl SelectionResult {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.question_id = id.into();
        self
    }

    pub fn ranking(&self) -> Vec<usize> {
        self.ranked.iter().map(|s| s.sentence_index).collect()
    }
}

pub fn rank(scores: &[SentenceScore]) -> Vec<SentenceScore> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    ranked
}

fn result(ranked: Vec<SentenceScore>, mut selected: Vec<usize>, policy: Policy) -> SelectionResult {
    selected.sort_unstable();
    SelectionResult {
        question_id: String::new(),
        ranked,
        selected_indices: selected,
        policy,
    }
}

/// The `k` highest-scoring sentences (all of them when `k >= n`).
pub fn select_top_k(scores: &[SentenceScore], k: usize) -> SelectionResult {
    assert!(k >= 1 && !scores.is_empty(), "select_top_k needs k >= 1 and some scores");
    let ranked = rank(scores);
    let selected = ranked.iter().take(k).map(|s| s.sentence_index).collect();
    result(ranked, selected, Policy::TopK(k))
}

/// Every sentence scoring at least `1 - th`; the single best sentence when
/// none does.
pub fn select_dyn(scores: &[SentenceScore], th: f64) -> SelectionResult {
    assert!(!scores.is_empty(), "select_dyn needs some scores");
    let ranked = rank(scores);
    let cut = 1.0 - th;
    let mut selected: Vec<usize> = scores
        .iter()
        .filter(|s| s.score >= cut)
        .map(|s| s.sentence_index)
        .collect();
    if selected.is_empty() {
        selected.push(ranked[0].sentence_index);
    }
    result(ranked, selected, Policy::Dyn(th))
}

pub fn select(id: &str, scores: &[SentenceScore], policy: Policy) -> SelectionResult {
    match policy {
        Policy::TopK(k) => select_top_k(scores, k),
        Policy::Dyn(th) => select_dyn(scores, th),
    }
    .with_id(id)
}

/// Selected sentences concatenated in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedContext {
    pub tokens: Vec<Token>,
    /// `remap[i]` is the document token index of merged token `i`.
    pub remap: Vec<usize>,
    /// Merged index where each selected sentence begins.
    pub sentence_starts: Vec<usize>,
}

impl MergedContext {
    /// Merged position of a document token, if it was selected.
    pub fn to_merged(&self, doc_index: usize) -> Option<usize> {
        self.remap.binary_search(&doc_index).ok()
    }

    /// Half-open document span mapped into merged coordinates; `None` unless
    /// every token of the span is present.
    pub fn span_to_merged(&self, span: TokenSpan) -> Option<TokenSpan> {
        let start = self.to_merged(span.start)?;
        let end = self.to_merged(span.end - 1)? + 1;
        (end - start == span.end - span.start).then_some(TokenSpan { start, end })
    }

    /// Answer text for merged tokens `[start, end]`: contiguous document runs
    /// are sliced from the original context, runs are joined by one space.
    pub fn text(&self, ex: &QaExample, start: usize, end: usize) -> String {
        let mut parts: Vec<&str> = Vec::new();
        let mut run_start = start;
        for i in start..=end {
            if i == end || self.remap[i + 1] != self.remap[i] + 1 {
                parts.push(ex.text_of(self.remap[run_start], self.remap[i]));
                run_start = i + 1;
            }
        }
        parts.join(" ")
    }
}

pub fn merge_selected(ex: &QaExample, selected: &[usize]) -> MergedContext {
    let mut merged = MergedContext {
        tokens: Vec::new(),
        remap: Vec::new(),
        sentence_starts: Vec::with_capacity(selected.len()),
    };
    for &i in selected {
        let s = &ex.sentences[i];
        merged.sentence_starts.push(merged.tokens.len());
        merged.tokens.extend_from_slice(&ex.document_tokens[s.token_start..s.token_end]);
        merged.remap.extend(s.token_start..s.token_end);
    }
    merged
}

/// One line of a selection dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: String,
    #[serde(flatten)]
    pub policy: Policy,
    /// Scores in sentence order.
    pub scores: Vec<f64>,
    pub selected: Vec<usize>,
}

impl From<&SelectionResult> for SelectionRecord {
    fn from(r: &SelectionResult) -> Self {
        let mut scores = vec![0.0; r.ranked.len()];
        for s in &r.ranked {
            scores[s.sentence_index] = s.score;
        }
        Self {
            id: r.question_id.clone(),
            policy: r.policy,
            scores,
            selected: r.selected_indices.clone(),
        }
    }
}

impl From<SelectionRecord> for SelectionResult {
    fn from(r: SelectionRecord) -> Self {
        let scores: Vec<SentenceScore> = r
            .scores
            .iter()
            .enumerate()
            .map(|(i, &score)| SentenceScore {
                sentence_index: i,
                raw_logits: None,
                score,
            })
            .collect();
        SelectionResult {
            question_id: r.id,
            ranked: rank(&scores),
            selected_indices: r.selected,
            policy: r.policy,
        }
    }
}

pub fn write_selection_dump(path: &Path, results: &[SelectionResult]) -> Result<()> {
    let mut out = Vec::new();
    for r in results {
        serde_json::to_writer(&mut out, &SelectionRecord::from(r)).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_selection_dump(path: &Path) -> Result<Vec<SelectionResult>> {
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile {
            path: path.to_path_buf(),
            hint: "run `minictx select` first".into(),
        },
        _ => Error::io(path, e),
    })?;
    let mut results = Vec::new();
    for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SelectionRecord = serde_json::from_str(&line).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if record.selected.is_empty() || record.selected.iter().any(|&i| i >= record.scores.len()) {
            return Err(Error::Data(format!(
                "{}:{}: selection for `{}` is empty or out of range",
                path.display(),
                n + 1,
                record.id
            )));
        }
        results.push(record.into());
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_example, RawAnswer};

    pub(crate) fn scores(v: &[f64]) -> Vec<SentenceScore> {
        v.iter()
            .enumerate()
            .map(|(i, &score)| SentenceScore {
                sentence_index: i,
                raw_logits: None,
                score,
            })
            .collect()
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(select_top_k(&scores(&[0.2, 0.9, 0.9]), 1).selected_indices, vec![1]);
        assert_eq!(select_top_k(&scores(&[0.5, 0.1, 0.7]), 2).selected_indices, vec![0, 2]);
        assert_eq!(select_top_k(&scores(&[0.5, 0.1]), 5).selected_indices, vec![0, 1]);
    }

    #[test]
    fn dyn_examples() {
        assert_eq!(select_dyn(&scores(&[0.9, 0.4, 0.8]), 0.3).selected_indices, vec![0, 2]);
        assert_eq!(select_dyn(&scores(&[0.1, 0.2]), 0.0).selected_indices, vec![1]);
        assert_eq!(select_dyn(&scores(&[0.0, 0.2, 0.0]), 1.0).selected_indices, vec![0, 1, 2]);
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::TopK(0).validate().is_err());
        assert!(Policy::Dyn(1.5).validate().is_err());
        assert!(Policy::Dyn(0.5).validate().is_ok());
    }

    fn example() -> QaExample {
        let ctx = "Ann met Bob. They ate. Bob left town. Rain fell. Ann slept.";
        let start = ctx.find("left town").unwrap();
        build_example(
            "q",
            ctx,
            "Where did Bob go?",
            &[RawAnswer {
                text: "left town",
                char_start: Some(start),
            }],
        )
    }

    #[test]
    fn merge_all_is_identity() {
        let ex = example();
        let all: Vec<usize> = (0..ex.sentences.len()).collect();
        let m = merge_selected(&ex, &all);
        assert_eq!(m.tokens, ex.document_tokens);
        assert_eq!(m.remap, (0..ex.document_tokens.len()).collect::<Vec<_>>());
    }

    #[test]
    fn merge_single_and_round_trip() {
        let ex = example();
        assert_eq!(ex.sentences.len(), 5);
        let m = merge_selected(&ex, &[2]);
        assert_eq!(m.tokens, ex.sentence_tokens(2));
        let m = merge_selected(&ex, &[0, 2]);
        let gold = ex.first_aligned_span().unwrap();
        let merged = m.span_to_merged(gold).unwrap();
        assert_eq!(m.text(&ex, merged.start, merged.end - 1), "left town");
        assert_eq!(m.remap[merged.start], gold.start);
        assert!(merge_selected(&ex, &[0, 1]).span_to_merged(gold).is_none());
    }

    #[test]
    fn text_across_gap_joins_runs() {
        let ex = example();
        let m = merge_selected(&ex, &[0, 2]);
        let last_of_first = m.sentence_starts[1] - 1;
        assert_eq!(m.text(&ex, last_of_first, last_of_first + 1), ". Bob");
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sel.jsonl");
        let results = vec![
            select("a", &scores(&[0.1, 0.7, 0.2]), Policy::Dyn(0.5)),
            select("b", &scores(&[0.4, 0.6]), Policy::TopK(1)),
        ];
        write_selection_dump(&path, &results).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"id":"a","policy":"dyn","th_or_k":0.5,"scores":[0.1,0.7,0.2],"selected":[1]}"#));
        assert_eq!(read_selection_dump(&path).unwrap(), results);
    }
}
