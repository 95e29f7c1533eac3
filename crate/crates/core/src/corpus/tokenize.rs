use serde::{Deserialize, Serialize};

/// A token and its byte span in the raw text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    /// Exclusive.
    pub char_end: usize,
}

const SPLIT_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '[', ']', '{', '}'];

fn is_split_punct(c: char) -> bool {
    SPLIT_PUNCT.contains(&c)
}

/// Whitespace tokenizer that peels leading and trailing punctuation
/// (`.,!?;:"'()[]{}`) into one-character tokens. Internal hyphens and
/// apostrophes stay attached. Offsets are byte offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chunk_start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                split_chunk(text, s, i, &mut tokens);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    tokens
}

fn split_chunk(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let chunk = &text[start..end];
    let mut lead = Vec::new();
    let mut body_start = start;
    for (i, c) in chunk.char_indices() {
        if is_split_punct(c) {
            lead.push((start + i, start + i + c.len_utf8()));
            body_start = start + i + c.len_utf8();
        } else {
            break;
        }
    }
    let mut trail = Vec::new();
    let mut body_end = end;
    for (i, c) in text[body_start..end].char_indices().rev() {
        if is_split_punct(c) {
            trail.push((body_start + i, body_start + i + c.len_utf8()));
            body_end = body_start + i;
        } else {
            break;
        }
    }
    let push = |out: &mut Vec<Token>, s: usize, e: usize| {
        out.push(Token {
            text: text[s..e].to_string(),
            char_start: s,
            char_end: e,
        })
    };
    for (s, e) in lead {
        push(out, s, e);
    }
    if body_start < body_end {
        push(out, body_start, body_end);
    }
    for (s, e) in trail.into_iter().rev() {
        push(out, s, e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn punctuation_and_offsets() {
        let toks = tokenize("Tesla, 1873.");
        assert_eq!(texts(&toks), ["Tesla", ",", "1873", "."]);
        let offs: Vec<_> = toks.iter().map(|t| (t.char_start, t.char_end)).collect();
        assert_eq!(offs, [(0, 5), (5, 6), (7, 11), (11, 12)]);
    }

    #[test]
    fn simple_words() {
        assert_eq!(texts(&tokenize("a b")), ["a", "b"]);
    }

    #[test]
    fn internal_marks_stay() {
        assert_eq!(
            texts(&tokenize("(Edison's well-known \"lab\")")),
            ["(", "Edison's", "well-known", "\"", "lab", "\"", ")"]
        );
    }

    #[test]
    fn all_punct_chunk() {
        assert_eq!(texts(&tokenize("wait ...")), ["wait", ".", ".", "."]);
    }

    #[test]
    fn multibyte() {
        let toks = tokenize("Zürich, 1890.");
        assert_eq!(texts(&toks), ["Zürich", ",", "1890", "."]);
        assert_eq!(&"Zürich, 1890."[toks[1].char_start..toks[1].char_end], ",");
    }

    proptest! {
        #[test]
        fn offsets_reconstruct_text(s in "[a-zA-Zé0-9 .,!?;:'\"()\\-\n]{0,60}") {
            let toks = tokenize(&s);
            let mut rebuilt = String::new();
            let mut cursor = 0;
            for t in &toks {
                prop_assert!(t.char_start < t.char_end);
                prop_assert_eq!(&s[t.char_start..t.char_end], t.text.as_str());
                let gap = &s[cursor..t.char_start];
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(gap);
                rebuilt.push_str(&t.text);
                cursor = t.char_end;
            }
            prop_assert!(s[cursor..].chars().all(char::is_whitespace));
            rebuilt.push_str(&s[cursor..]);
            prop_assert_eq!(rebuilt, s);
        }
    }
}
