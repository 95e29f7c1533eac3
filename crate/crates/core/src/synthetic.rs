//! Synthetic lexical-overlap QA corpus for desk-scale experiments.
//!
//! Every document is a handful of templated sentences. The question reuses
//! the three content words of exactly one sentence (the one holding the
//! answer); the other sentences use disjoint content words. Answers are
//! two-token names, single-token places, or four-digit years.

use serde::{Deserialize, Serialize};

use crate::corpus::squad::{examples_from_squad, SquadAnswer, SquadArticle, SquadFile, SquadParagraph, SquadQa};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_questions: usize,
    pub sentences_per_doc: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_questions: 200,
            sentences_per_doc: 5,
            vocab_size: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub file: SquadFile,
    /// One adversarial sentence per question, in question order. Each copies
    /// the answer sentence's template and first content word but carries a
    /// different answer of the same type.
    pub distractors: Vec<String>,
    /// Sentence index of the answer sentence per question.
    pub oracle_positions: Vec<usize>,
}

fn syllable(i: usize) -> [u8; 2] {
    [CONSONANTS[i % CONSONANTS.len()], VOWELS[(i / CONSONANTS.len()) % VOWELS.len()]]
}

const SYLLABLES: usize = 14 * 5;

/// Content word `i`: two syllables (four lowercase letters), or three when
/// the index runs past the two-syllable range.
pub fn content_word(i: usize) -> String {
    let mut out = Vec::new();
    out.extend_from_slice(&syllable(i % SYLLABLES));
    out.extend_from_slice(&syllable(i / SYLLABLES % SYLLABLES));
    if i >= SYLLABLES * SYLLABLES {
        out.extend_from_slice(&syllable(i / (SYLLABLES * SYLLABLES)));
    }
    String::from_utf8(out).expect("ascii")
}

/// Capitalized three-syllable proper noun; never collides with a content
/// word of fewer than three syllables.
fn proper_noun(rng: &mut SplitMix64) -> String {
    let mut s = String::new();
    for _ in 0..3 {
        let [c, v] = syllable(rng.below(SYLLABLES));
        s.push(c as char);
        s.push(v as char);
    }
    let mut chars = s.chars();
    let first = chars.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(chars).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Template {
    Person,
    Year,
    Place,
}

const TEMPLATES: [Template; 3] = [Template::Person, Template::Year, Template::Place];

impl Template {
    fn answer(self, rng: &mut SplitMix64) -> String {
        match self {
            Template::Person => format!("{} {}", proper_noun(rng), proper_noun(rng)),
            Template::Year => (1000 + rng.below(1000)).to_string(),
            Template::Place => proper_noun(rng),
        }
    }

    /// Sentence text and byte offset of the answer inside it.
    fn sentence(self, w: &[String; 3], answer: &str) -> (String, usize) {
        let (before, after) = match self {
            Template::Person => (format!("the {} of the {} {} was ", w[0], w[1], w[2]), " .".to_string()),
            Template::Year => (format!("the {} {} was built in ", w[0], w[1]), format!(" near {} .", w[2])),
            Template::Place => (format!("the {} {} {} is located in ", w[0], w[1], w[2]), " .".to_string()),
        };
        (format!("{before}{answer}{after}"), before.len())
    }

    fn question(self, w: &[String; 3]) -> String {
        match self {
            Template::Person => format!("who was the {} of the {} {} ?", w[0], w[1], w[2]),
            Template::Year => format!("when was the {} {} built near {} ?", w[0], w[1], w[2]),
            Template::Place => format!("where is the {} {} {} located ?", w[0], w[1], w[2]),
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.n_questions == 0 || cfg.sentences_per_doc == 0 {
        return Err(Error::Config("synthetic corpus needs questions and sentences".into()));
    }
    let needed = 3 * cfg.sentences_per_doc + 2;
    if cfg.vocab_size < needed {
        return Err(Error::Config(format!(
            "vocab_size {} is too small: each document needs {needed} distinct content words",
            cfg.vocab_size
        )));
    }
    let mut rng = SplitMix64::derive(cfg.seed, 0x0053_594E);
    let mut vocab: Vec<usize> = (0..cfg.vocab_size).collect();
    let mut data = Vec::with_capacity(cfg.n_questions);
    let mut distractors = Vec::with_capacity(cfg.n_questions);
    let mut oracle_positions = Vec::with_capacity(cfg.n_questions);

    for q in 0..cfg.n_questions {
        // partial Fisher-Yates: the first `needed` entries become this
        // document's content words
        for i in 0..needed {
            let j = i + rng.below(vocab.len() - i);
            vocab.swap(i, j);
        }
        let mut words = vocab[..needed].iter().map(|&i| content_word(i));
        let oracle = rng.below(cfg.sentences_per_doc);
        let mut context = String::new();
        let mut answer = None;
        let mut oracle_words = None;
        for s in 0..cfg.sentences_per_doc {
            let t = TEMPLATES[rng.below(3)];
            let w: [String; 3] = [words.next().unwrap(), words.next().unwrap(), words.next().unwrap()];
            let ans = t.answer(&mut rng);
            let (text, offset) = t.sentence(&w, &ans);
            if !context.is_empty() {
                context.push(' ');
            }
            if s == oracle {
                answer = Some((ans, context.len() + offset));
                oracle_words = Some((t, w));
            }
            context.push_str(&text);
        }
        let (text, answer_start) = answer.expect("oracle sentence generated");
        let (t, w) = oracle_words.expect("oracle sentence generated");
        let fake = [w[0].clone(), words.next().unwrap(), words.next().unwrap()];
        let mut fake_answer = t.answer(&mut rng);
        while fake_answer == text {
            fake_answer = t.answer(&mut rng);
        }
        distractors.push(t.sentence(&fake, &fake_answer).0);
        oracle_positions.push(oracle);
        let id = format!("syn-{q:05}");
        data.push(SquadArticle {
            title: format!("synthetic {q}"),
            paragraphs: vec![SquadParagraph {
                context,
                qas: vec![SquadQa {
                    id,
                    question: t.question(&w),
                    answers: vec![SquadAnswer { text, answer_start }],
                }],
            }],
        });
    }
    let corpus = SyntheticCorpus {
        file: SquadFile {
            version: "1.1".into(),
            data,
        },
        distractors,
        oracle_positions,
    };
    self_check(&corpus, cfg)?;
    Ok(corpus)
}

/// Re-ingest the corpus and confirm sentence counts and oracle labels.
fn self_check(corpus: &SyntheticCorpus, cfg: &SyntheticConfig) -> Result<()> {
    for (ex, &pos) in examples_from_squad(&corpus.file).iter().zip(&corpus.oracle_positions) {
        if ex.sentences.len() != cfg.sentences_per_doc || ex.oracle_sentence_indices != [pos] || !ex.trainable() {
            return Err(Error::Data(format!("synthetic example {} failed its self-check", ex.id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::normalize_tokens;

    #[test]
    fn counts_and_labels() {
        let cfg = SyntheticConfig {
            n_questions: 50,
            sentences_per_doc: 5,
            vocab_size: 500,
            seed: 3,
        };
        let c = generate(&cfg).unwrap();
        let exs = examples_from_squad(&c.file);
        assert_eq!(exs.len(), 50);
        assert_eq!(c.distractors.len(), 50);
        for (ex, &pos) in exs.iter().zip(&c.oracle_positions) {
            assert_eq!(ex.sentences.len(), 5);
            assert_eq!(ex.oracle_sentence_indices, vec![pos]);
            let q: Vec<String> = normalize_tokens(&ex.question);
            for s in 0..5 {
                let content: Vec<&str> = ex
                    .sentence_tokens(s)
                    .iter()
                    .map(|t| t.text.as_str())
                    .filter(|w| w.len() >= 4 && w.chars().all(|c| c.is_ascii_lowercase()))
                    .filter(|w| !["built", "near", "located"].contains(w))
                    .collect();
                let shared = content.iter().filter(|w| q.iter().any(|x| x == *w)).count();
                assert_eq!(shared, if s == pos { 3 } else { 0 }, "{} sentence {s}", ex.id);
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig {
            n_questions: 10,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SyntheticConfig { seed: 1, ..cfg };
        assert_ne!(generate(&cfg).unwrap().file, generate(&other).unwrap().file);
    }

    #[test]
    fn rejects_bad_sizes() {
        let cfg = SyntheticConfig {
            vocab_size: 5,
            ..Default::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let cfg = SyntheticConfig {
            n_questions: 0,
            ..Default::default()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn content_words_are_distinct() {
        let words: std::collections::HashSet<String> = (0..6000).map(content_word).collect();
        assert_eq!(words.len(), 6000);
    }
}
