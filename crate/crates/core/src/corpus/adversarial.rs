use serde::{Deserialize, Serialize};

use super::example::{QaExample, TokenSpan};
use super::sentences::SentenceSpan;
use super::tokenize::{tokenize, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectPosition {
    Append,
    Prepend,
}

/// Add `distractor` to the paragraph as a single extra sentence.
///
/// Oracle labels are carried over from the original answers only; the
/// distractor never becomes an oracle sentence even if it contains an
/// answer string.
pub fn inject_adversarial(ex: &QaExample, distractor: &str, position: InjectPosition) -> Result<QaExample> {
    let distractor = distractor.trim();
    let dtoks = tokenize(distractor);
    if dtoks.is_empty() {
        return Err(Error::Data(format!("distractor for `{}` has no tokens", ex.id)));
    }
    let n_d = dtoks.len();
    let mut out = ex.clone();
    match position {
        InjectPosition::Append => {
            let sep = if ex.context.is_empty() { "" } else { " " };
            let base = ex.context.len() + sep.len();
            out.context = format!("{}{sep}{distractor}", ex.context);
            let start = ex.document_tokens.len();
            out.document_tokens.extend(dtoks.into_iter().map(|t| shift(t, base)));
            out.sentences.push(SentenceSpan {
                token_start: start,
                token_end: start + n_d,
                index: ex.sentences.len(),
            });
        }
        InjectPosition::Prepend => {
            let shift_by = distractor.len() + 1;
            out.context = format!("{distractor} {}", ex.context);
            out.document_tokens = dtoks;
            out.document_tokens
                .extend(ex.document_tokens.iter().cloned().map(|t| shift(t, shift_by)));
            out.sentences = std::iter::once(SentenceSpan {
                token_start: 0,
                token_end: n_d,
                index: 0,
            })
            .chain(ex.sentences.iter().map(|s| SentenceSpan {
                token_start: s.token_start + n_d,
                token_end: s.token_end + n_d,
                index: s.index + 1,
            }))
            .collect();
            for a in &mut out.answers {
                if let Some(span) = a.span.as_mut() {
                    *span = TokenSpan {
                        start: span.start + n_d,
                        end: span.end + n_d,
                    };
                }
            }
            out.oracle_sentence_indices = ex.oracle_sentence_indices.iter().map(|i| i + 1).collect();
        }
    }
    Ok(out)
}

/// Index of the injected sentence in the adversarial example.
pub fn injected_index(original: &QaExample, position: InjectPosition) -> usize {
    match position {
        InjectPosition::Append => original.sentences.len(),
        InjectPosition::Prepend => 0,
    }
}

fn shift(t: Token, by: usize) -> Token {
    Token {
        char_start: t.char_start + by,
        char_end: t.char_end + by,
        text: t.text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sentences::tiles;
    use crate::corpus::squad::{build_example, RawAnswer};

    fn example() -> QaExample {
        build_example(
            "q",
            "Tesla moved to Prague. He studied there. He left in 1880.",
            "When did he leave?",
            &[RawAnswer {
                text: "1880",
                char_start: Some(52),
            }],
        )
    }

    fn check_offsets(ex: &QaExample) {
        for t in &ex.document_tokens {
            assert_eq!(&ex.context[t.char_start..t.char_end], t.text);
        }
        assert!(tiles(&ex.sentences, ex.document_tokens.len()));
    }

    #[test]
    fn append_keeps_labels() {
        let ex = example();
        assert_eq!(ex.oracle_sentence_indices, vec![2]);
        let adv = inject_adversarial(&ex, "He left Vienna in 1990.", InjectPosition::Append).unwrap();
        assert_eq!(adv.sentences.len(), 4);
        assert_eq!(adv.oracle_sentence_indices, vec![2]);
        check_offsets(&adv);
        let span = adv.answers[0].span.unwrap();
        assert_eq!(adv.text_of(span.start, span.end - 1), "1880");
    }

    #[test]
    fn prepend_shifts_labels() {
        let ex = example();
        let adv = inject_adversarial(&ex, "He left Vienna in 1990.", InjectPosition::Prepend).unwrap();
        assert_eq!(adv.oracle_sentence_indices, vec![3]);
        check_offsets(&adv);
        let span = adv.answers[0].span.unwrap();
        assert_eq!(adv.text_of(span.start, span.end - 1), "1880");
        for i in 0..ex.sentences.len() {
            let a: Vec<_> = ex.sentence_tokens(i).iter().map(|t| &t.text).collect();
            let b: Vec<_> = adv.sentence_tokens(i + 1).iter().map(|t| &t.text).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn distractor_with_answer_not_labelled() {
        let ex = example();
        let adv = inject_adversarial(&ex, "He left in 1880 too.", InjectPosition::Append).unwrap();
        assert_eq!(adv.oracle_sentence_indices, vec![2]);
    }

    #[test]
    fn empty_distractor_rejected() {
        assert!(inject_adversarial(&example(), "   ", InjectPosition::Append).is_err());
    }
}
