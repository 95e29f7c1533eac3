use serde::{Deserialize, Serialize};

use super::sentences::SentenceSpan;
use super::tokenize::Token;

/// Half-open token range of an aligned answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// A gold answer. `span` is `None` when the answer could not be aligned to
/// tokens (bad offsets, distant supervision, or truncated away).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub span: Option<TokenSpan>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleFlags {
    /// Some answer offset fell outside the paragraph.
    pub unalignable: bool,
    /// Truncation removed the sentence holding an aligned answer.
    pub truncated_answer: bool,
}

/// One question over one tokenized paragraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub context: String,
    pub question: String,
    pub document_tokens: Vec<Token>,
    pub sentences: Vec<SentenceSpan>,
    pub question_tokens: Vec<Token>,
    pub answers: Vec<Answer>,
    pub oracle_sentence_indices: Vec<usize>,
    pub flags: ExampleFlags,
}

impl QaExample {
    pub fn sentence_tokens(&self, index: usize) -> &[Token] {
        let s = &self.sentences[index];
        &self.document_tokens[s.token_start..s.token_end]
    }

    pub fn sentence_of_token(&self, token: usize) -> Option<usize> {
        self.sentences
            .iter()
            .position(|s| s.token_start <= token && token < s.token_end)
    }

    pub fn first_aligned_span(&self) -> Option<TokenSpan> {
        self.answers.iter().find_map(|a| a.span)
    }

    pub fn gold_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }

    /// Usable as a supervised training example.
    pub fn trainable(&self) -> bool {
        !self.flags.unalignable && !self.flags.truncated_answer && self.first_aligned_span().is_some()
    }

    /// Raw text for document tokens `[start, end]` (inclusive end), read
    /// from the original character offsets.
    pub fn text_of(&self, start: usize, end: usize) -> &str {
        let s = self.document_tokens[start].char_start;
        let e = self.document_tokens[end].char_end;
        &self.context[s..e]
    }
}
