//! Dataset ingestion: tokenization, sentence splitting, answer alignment,
//! oracle labels, adversarial injection and truncation.

pub mod adversarial;
pub mod example;
pub mod oracle;
pub mod sentences;
pub mod squad;
pub mod tokenize;
pub mod truncate;

pub use adversarial::{inject_adversarial, injected_index, InjectPosition};
pub use example::{Answer, ExampleFlags, QaExample, TokenSpan};
pub use oracle::{align_distant, label_oracle_sentences};
pub use sentences::{split_sentences, SentenceSpan};
pub use squad::{build_example, load_squad_json, RawAnswer};
pub use tokenize::{tokenize, Token};
pub use truncate::{truncate_document, CorpusStats};

/// Read a distractor list: one sentence per non-empty line.
pub fn read_distractors(path: &std::path::Path) -> crate::Result<Vec<String>> {
    if !path.exists() {
        return Err(crate::Error::MissingFile {
            path: path.to_path_buf(),
            hint: "distractor list not found".into(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex() -> QaExample {
        build_example(
            "q",
            "The city was Prague. It had a castle. Vienna was far. Trains ran. Nobody left.",
            "Which city?",
            &[RawAnswer {
                text: "Prague",
                char_start: Some(13),
            }],
        )
    }

    #[test]
    fn oracle_labels() {
        assert_eq!(label_oracle_sentences(&ex()), vec![0]);
        let mut two = ex();
        two.answers.push(Answer {
            text: "Trains".into(),
            span: Some(TokenSpan { start: 14, end: 15 }),
        });
        assert_eq!(two.sentence_of_token(14), Some(3));
        assert_eq!(label_oracle_sentences(&two), vec![0, 3]);
        let mut none = ex();
        none.answers[0].span = None;
        assert!(label_oracle_sentences(&none).is_empty());
    }

    #[test]
    fn distant_alignment() {
        let e = ex();
        assert_eq!(align_distant(&e, "a castle"), vec![1]);
        assert_eq!(align_distant(&e, "prague"), vec![0]);
        assert!(align_distant(&e, "Budapest").is_empty());
    }
}
