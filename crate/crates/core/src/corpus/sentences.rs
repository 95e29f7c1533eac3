use serde::{Deserialize, Serialize};

use super::tokenize::Token;

/// A sentence as a half-open range of document token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub token_start: usize,
    pub token_end: usize,
    pub index: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        self.token_end == self.token_start
    }

    pub fn contains(&self, start: usize, end: usize) -> bool {
        self.token_start <= start && end <= self.token_end
    }
}

const TERMINATORS: &[&str] = &[".", "!", "?"];
const ABBREVIATIONS: &[&str] = &["Mr", "Mrs", "Dr", "St", "vs", "etc", "e.g", "i.e"];

fn is_terminator(t: &Token) -> bool {
    TERMINATORS.contains(&t.text.as_str())
}

/// Whether the token before a terminator makes it a non-boundary. A single
/// capital only counts as an initial when it is not the sentence's first
/// token, so "A. B." still splits in two.
fn blocks_boundary(prev: &Token, prev_is_sentence_start: bool) -> bool {
    let mut chars = prev.text.chars();
    let single_capital = matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase());
    (single_capital && !prev_is_sentence_start) || ABBREVIATIONS.contains(&prev.text.as_str())
}

/// Split a token sequence into sentences. A `.`, `!` or `?` closes the
/// sentence (together with any terminators immediately after it) unless the
/// preceding token is an initial (single capital letter) or a known abbreviation.
pub fn split_sentences(tokens: &[Token]) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        let ends_here = is_terminator(&tokens[i]) && !(i > start && blocks_boundary(&tokens[i - 1], i - 1 == start));
        if ends_here {
            while i + 1 < tokens.len() && is_terminator(&tokens[i + 1]) {
                i += 1;
            }
            spans.push(SentenceSpan {
                token_start: start,
                token_end: i + 1,
                index: spans.len(),
            });
            start = i + 1;
        }
        i += 1;
    }
    if start < tokens.len() {
        spans.push(SentenceSpan {
            token_start: start,
            token_end: tokens.len(),
            index: spans.len(),
        });
    }
    spans
}

/// Check that `spans` partition `[0, n_tokens)` in order.
pub fn tiles(spans: &[SentenceSpan], n_tokens: usize) -> bool {
    let mut cursor = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.index != i || s.token_start != cursor || s.token_end <= s.token_start {
            return false;
        }
        cursor = s.token_end;
    }
    cursor == n_tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::tokenize;
    use proptest::prelude::*;

    fn split(text: &str) -> Vec<(usize, usize)> {
        split_sentences(&tokenize(text)).iter().map(|s| (s.token_start, s.token_end)).collect()
    }

    #[test]
    fn two_sentences() {
        assert_eq!(split("A. B."), vec![(0, 2), (2, 4)]);
    }

    #[test]
    fn terminator_rules() {
        assert_eq!(split("It was built. It fell."), vec![(0, 4), (4, 7)]);
        assert_eq!(split("no terminator"), vec![(0, 2)]);
        assert!(split("").is_empty());
    }

    #[test]
    fn abbreviations_and_initials() {
        assert_eq!(split("Mr. Smith met J. Doe. Then left."), vec![(0, 8), (8, 11)]);
        assert_eq!(split("Tools, e.g. hammers, etc. are useful!"), vec![(0, 11)]);
    }

    #[test]
    fn trailing_terminators_absorbed() {
        assert_eq!(split("Really?! Yes..."), vec![(0, 3), (3, 7)]);
    }

    proptest! {
        #[test]
        fn spans_tile(s in "[a-zA-Z .!?,]{0,80}") {
            let toks = tokenize(&s);
            let spans = split_sentences(&toks);
            prop_assert!(tiles(&spans, toks.len()));
            for sp in &spans {
                let last = &toks[sp.token_end - 1];
                prop_assert!(sp.token_end == toks.len() || is_terminator(last));
            }
        }
    }
}
