//! Answer-string normalization and the EM / token-F1 metrics.

use std::collections::HashMap;

const ARTICLES: &[&str] = &["a", "an", "the"];

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    normalize_tokens(s).join(" ")
}

/// [`normalize_answer`] split into whitespace tokens.
pub fn normalize_tokens(s: &str) -> Vec<String> {
    let lowered = s.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .map(String::from)
        .collect()
}

pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let p = normalize_answer(pred);
    if golds.iter().any(|g| normalize_answer(g.as_ref()) == p) {
        1.0
    } else {
        0.0
    }
}

fn f1_single(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best bag-of-tokens F1 over the gold answers.
pub fn token_f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let p = normalize_tokens(pred);
    golds
        .iter()
        .map(|g| f1_single(&p, &normalize_tokens(g.as_ref())))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer("The Cat!"), "cat");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("an apple"), "apple");
        assert_eq!(normalize_answer("  Theory   of\tthe  U.S. "), "theory of us");
    }

    #[test]
    fn em_cases() {
        assert_eq!(exact_match("Prague", &["Prague"]), 1.0);
        assert_eq!(exact_match("The Cat", &["cat"]), 1.0);
        assert_eq!(exact_match("dog", &["cat", "bird"]), 0.0);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(token_f1("quick fox", &["quick fox"]), 1.0);
        assert_eq!(token_f1("apples", &["quick fox"]), 0.0);
        // {cat} vs {cat, sat}: P = 1, R = 1/2
        assert!((token_f1("the cat", &["cat sat"]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("", &[""]), 1.0);
        assert_eq!(token_f1("", &["x"]), 0.0);
        assert_eq!(token_f1("the", &["x"]), 0.0);
        // max over golds
        assert_eq!(token_f1("cat", &["dog", "cat"]), 1.0);
    }

    #[test]
    fn duplicate_tokens_counted_once_each() {
        // pred {a,a} (articles removed -> use real words)
        let f = token_f1("go go", &["go"]);
        // common 1, P = 1/2, R = 1
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn em_implies_f1(pred in "[A-Za-z ,.]{0,20}", gold in "[A-Za-z ,.]{0,20}") {
            if exact_match(&pred, &[&gold]) == 1.0 {
                prop_assert_eq!(token_f1(&pred, &[&gold]), 1.0);
            }
            let f = token_f1(&pred, &[&gold]);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
