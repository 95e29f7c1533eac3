//! SQuAD v1.1 JSON reading and writing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::example::{Answer, ExampleFlags, QaExample, TokenSpan};
use super::oracle::label_oracle_sentences;
use super::sentences::{split_sentences, SentenceSpan};
use super::tokenize::{tokenize, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadFile {
    pub version: String,
    pub data: Vec<SquadArticle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadArticle {
    pub title: String,
    pub paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadParagraph {
    pub context: String,
    pub qas: Vec<SquadQa>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadQa {
    pub id: String,
    pub question: String,
    pub answers: Vec<SquadAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadAnswer {
    pub text: String,
    /// Offset in Unicode scalar values, as produced by Python tooling.
    pub answer_start: usize,
}

/// Gold answer as given in the input, before alignment.
#[derive(Debug, Clone)]
pub struct RawAnswer<'a> {
    pub text: &'a str,
    pub char_start: Option<usize>,
}

/// Byte span of code points `[start, start + len)`, if it lies in `text`.
fn codepoint_range(text: &str, start: usize, len: usize) -> Option<(usize, usize)> {
    let mut bounds = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let bs = bounds.nth(start)?;
    if len == 0 {
        return Some((bs, bs));
    }
    let be = bounds.nth(len - 1)?;
    Some((bs, be))
}

/// Smallest token range covering bytes `[bs, be)`.
pub fn covering_tokens(tokens: &[Token], bs: usize, be: usize) -> Option<TokenSpan> {
    let first = tokens.iter().position(|t| t.char_end > bs)?;
    let last = tokens.iter().rposition(|t| t.char_start < be)?;
    (first <= last).then_some(TokenSpan {
        start: first,
        end: last + 1,
    })
}

/// Merge adjacent sentences so that every span lies inside one sentence.
fn merge_crossing(mut sentences: Vec<SentenceSpan>, spans: &[TokenSpan]) -> Vec<SentenceSpan> {
    for span in spans {
        let first = sentences.iter().position(|s| s.token_end > span.start);
        let last = sentences.iter().rposition(|s| s.token_start < span.end);
        if let (Some(a), Some(b)) = (first, last) {
            if a < b {
                let end = sentences[b].token_end;
                sentences[a].token_end = end;
                sentences.drain(a + 1..=b);
            }
        }
    }
    for (i, s) in sentences.iter_mut().enumerate() {
        s.index = i;
    }
    sentences
}

/// Tokenize, split and align one (paragraph, question) pair.
pub fn build_example(id: &str, context: &str, question: &str, answers: &[RawAnswer<'_>]) -> QaExample {
    let document_tokens = tokenize(context);
    let mut flags = ExampleFlags::default();
    let mut aligned = Vec::with_capacity(answers.len());
    for a in answers {
        let span = match a.char_start {
            None => None,
            Some(start) => match codepoint_range(context, start, a.text.chars().count()) {
                None => {
                    flags.unalignable = true;
                    None
                }
                Some((bs, be)) => {
                    let span = covering_tokens(&document_tokens, bs, be);
                    if span.is_none() {
                        flags.unalignable = true;
                    }
                    span
                }
            },
        };
        aligned.push(Answer {
            text: a.text.to_string(),
            span,
        });
    }
    let spans: Vec<TokenSpan> = aligned.iter().filter_map(|a| a.span).collect();
    let sentences = merge_crossing(split_sentences(&document_tokens), &spans);
    let mut ex = QaExample {
        id: id.to_string(),
        context: context.to_string(),
        question: question.to_string(),
        question_tokens: tokenize(question),
        document_tokens,
        sentences,
        answers: aligned,
        oracle_sentence_indices: Vec::new(),
        flags,
    };
    ex.oracle_sentence_indices = label_oracle_sentences(&ex);
    ex
}

pub fn examples_from_squad(file: &SquadFile) -> Vec<QaExample> {
    let mut out = Vec::new();
    for article in &file.data {
        for para in &article.paragraphs {
            for qa in &para.qas {
                let raw: Vec<RawAnswer<'_>> = qa
                    .answers
                    .iter()
                    .map(|a| RawAnswer {
                        text: &a.text,
                        char_start: Some(a.answer_start),
                    })
                    .collect();
                out.push(build_example(&qa.id, &para.context, &qa.question, &raw));
            }
        }
    }
    out
}

pub fn read_squad_file(path: &Path) -> Result<SquadFile> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
            hint: "dataset not found".into(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// One example per (paragraph, question) pair.
pub fn load_squad_json(path: &Path) -> Result<Vec<QaExample>> {
    Ok(examples_from_squad(&read_squad_file(path)?))
}

pub fn write_squad_json(path: &Path, file: &SquadFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
