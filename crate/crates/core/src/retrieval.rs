//! Word n-gram TF-IDF: a sentence-ranking baseline and paragraph
//! pre-filtering.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::QaExample;
use crate::selector::SentenceScore;

pub const DEFAULT_N_MAX: usize = 2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub entries: BTreeMap<u32, f64>,
}

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(t, w)| large.entries.get(t).map(|v| w * v))
            .sum()
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(b) / (na * nb)
    }
}

/// Lowercased word n-grams for `n` in `1..=n_max`, joined by a space.
pub fn ngrams<S: AsRef<str>>(words: &[S], n_max: usize) -> Vec<String> {
    let lower: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let mut out = Vec::new();
    for n in 1..=n_max {
        for w in lower.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfIndex {
    pub n_max: usize,
    pub n_docs: usize,
    terms: HashMap<String, u32>,
    /// Indexed by term id.
    doc_freq: Vec<usize>,
}

impl TfidfIndex {
    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.terms.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.term_id(term).map_or(0, |id| self.doc_freq[id as usize])
    }

    pub fn n_terms(&self) -> usize {
        self.doc_freq.len()
    }

    /// `ln((1 + N) / (1 + df)) + 1`
    pub fn idf(&self, term_id: u32) -> f64 {
        let df = self.doc_freq[term_id as usize] as f64;
        ((1.0 + self.n_docs as f64) / (1.0 + df)).ln() + 1.0
    }
}

pub fn build_index<U, S>(units: &[U], n_max: usize) -> TfidfIndex
where
    U: AsRef<[S]>,
    S: AsRef<str>,
{
    assert!(n_max >= 1);
    let mut index = TfidfIndex {
        n_max,
        n_docs: units.len(),
        terms: HashMap::new(),
        doc_freq: Vec::new(),
    };
    for unit in units {
        let mut grams = ngrams(unit.as_ref(), n_max);
        grams.sort_unstable();
        grams.dedup();
        for g in grams {
            let next = index.doc_freq.len() as u32;
            let id = *index.terms.entry(g).or_insert(next);
            if id == next {
                index.doc_freq.push(0);
            }
            index.doc_freq[id as usize] += 1;
        }
    }
    index
}

/// Raw term count times idf. Terms unknown to the index are dropped.
pub fn vectorize<S: AsRef<str>>(index: &TfidfIndex, unit: &[S]) -> SparseVector {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for g in ngrams(unit, index.n_max) {
        if let Some(id) = index.term_id(&g) {
            *counts.entry(id).or_default() += 1;
        }
    }
    SparseVector {
        entries: counts
            .into_iter()
            .map(|(id, c)| (id, c as f64 * index.idf(id)))
            .collect(),
    }
}

/// Unit indices by descending cosine similarity to `query`; ties keep the
/// lower index first and zero vectors go last.
pub fn rank_by_tfidf<U, S, Q>(index: &TfidfIndex, query: &[Q], units: &[U]) -> Vec<usize>
where
    U: AsRef<[S]>,
    S: AsRef<str>,
    Q: AsRef<str>,
{
    let sims = similarities(index, query, units);
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = sims[a].map_or(f64::NEG_INFINITY, |s| s);
        let kb = sims[b].map_or(f64::NEG_INFINITY, |s| s);
        kb.total_cmp(&ka).then(a.cmp(&b))
    });
    order
}

/// Cosine similarity of each unit to `query`, `None` for zero-norm units.
pub fn similarities<U, S, Q>(index: &TfidfIndex, query: &[Q], units: &[U]) -> Vec<Option<f64>>
where
    U: AsRef<[S]>,
    S: AsRef<str>,
    Q: AsRef<str>,
{
    let q = vectorize(index, query);
    units
        .iter()
        .map(|u| {
            let v = vectorize(index, u.as_ref());
            (v.norm() > 0.0).then(|| cosine(&q, &v))
        })
        .collect()
}

fn words(tokens: &[crate::corpus::Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}

/// TF-IDF baseline scores for the sentences of one example, with idf taken
/// over those sentences.
pub fn tfidf_sentence_scores(ex: &QaExample, n_max: usize) -> Vec<SentenceScore> {
    let units: Vec<Vec<&str>> = (0..ex.sentences.len()).map(|i| words(ex.sentence_tokens(i))).collect();
    let index = build_index(&units, n_max);
    similarities(&index, &words(&ex.question_tokens), &units)
        .into_iter()
        .enumerate()
        .map(|(i, s)| SentenceScore {
            sentence_index: i,
            raw_logits: None,
            score: s.unwrap_or(0.0),
        })
        .collect()
}

/// Sentence location within a set of paragraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SentenceRef {
    pub paragraph: usize,
    pub sentence: usize,
}

/// Rank `paragraphs` (each a list of tokenized sentences) against the
/// question, keep the best `top_n`, then return up to `max_candidates` of
/// their sentences ranked against the question.
pub fn candidate_sentences<S: AsRef<str>>(
    question: &[S],
    paragraphs: &[Vec<Vec<String>>],
    top_n: usize,
    max_candidates: usize,
    n_max: usize,
) -> Vec<SentenceRef> {
    if paragraphs.is_empty() {
        return Vec::new();
    }
    let flat: Vec<Vec<String>> = paragraphs.iter().map(|p| p.concat()).collect();
    let para_index = build_index(&flat, n_max);
    let kept: Vec<usize> = rank_by_tfidf(&para_index, question, &flat).into_iter().take(top_n).collect();
    let refs: Vec<SentenceRef> = kept
        .iter()
        .flat_map(|&p| {
            (0..paragraphs[p].len()).map(move |s| SentenceRef {
                paragraph: p,
                sentence: s,
            })
        })
        .collect();
    if refs.is_empty() {
        return refs;
    }
    let units: Vec<&Vec<String>> = refs.iter().map(|r| &paragraphs[r.paragraph][r.sentence]).collect();
    let sent_index = build_index(&units, n_max);
    rank_by_tfidf(&sent_index, question, &units)
        .into_iter()
        .take(max_candidates)
        .map(|i| refs[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn doc_freqs() {
        let idx = build_index(&[unit("a b"), unit("a b")], 2);
        for t in ["a", "b", "a b"] {
            assert_eq!(idx.doc_freq(t), 2);
        }
        let idx = build_index(&[unit("x y z")], 2);
        assert_eq!(idx.n_terms(), 5);
        assert!((0..5).all(|t| idx.idf(t) == 1.0));
        let idx = build_index(&[unit("a b c"), unit("b c d"), unit("c d b c")], 2);
        assert_eq!(idx.doc_freq("b c"), 3);
        assert_eq!(idx.doc_freq("c d"), 2);
        assert_eq!(idx.doc_freq("a b"), 1);
        assert_eq!(idx.doc_freq("d b"), 1);
        assert_eq!(idx.doc_freq("A"), 0);
    }

    #[test]
    fn vector_weights() {
        let idx = build_index(&[unit("The cat"), unit("a dog")], 1);
        let v = vectorize(&idx, &unit("cat cat"));
        let id = idx.term_id("cat").unwrap();
        let idf = (3.0f64 / 2.0).ln() + 1.0;
        assert_eq!(v.entries.len(), 1);
        assert!((v.entries[&id] - 2.0 * idf).abs() < 1e-12);
        assert!(vectorize(&idx, &unit("bird")).entries.is_empty());
        assert!(vectorize(&idx, &unit("THE")).entries.contains_key(&idx.term_id("the").unwrap()));
    }

    #[test]
    fn ranking_examples() {
        let units = vec![unit("red apple pie"), unit("blue sky"), unit("green grass grows")];
        let idx = build_index(&units, 2);
        assert_eq!(rank_by_tfidf(&idx, &unit("green grass grows"), &units)[0], 2);
        assert_eq!(rank_by_tfidf(&idx, &unit("nothing here"), &units), vec![0, 1, 2]);
    }

    #[test]
    fn hand_cosines() {
        // unigrams only; every term has df 1 except "b" (df 2)
        let units = vec![unit("a b"), unit("b c"), unit("d")];
        let idx = build_index(&units, 1);
        let i1 = (4.0f64 / 2.0).ln() + 1.0;
        let i2 = (4.0f64 / 3.0).ln() + 1.0;
        let sims = similarities(&idx, &unit("a b"), &units);
        let q_norm = (i1 * i1 + i2 * i2).sqrt();
        assert!((sims[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((sims[1].unwrap() - i2 * i2 / (q_norm * q_norm)).abs() < 1e-12);
        assert_eq!(sims[2], Some(0.0));
        assert_eq!(rank_by_tfidf(&idx, &unit("a b"), &units), vec![0, 1, 2]);
    }

    #[test]
    fn zero_norm_ranks_last() {
        let units: Vec<Vec<String>> = vec![vec![], unit("x"), unit("y")];
        let idx = build_index(&units, 1);
        assert_eq!(rank_by_tfidf(&idx, &unit("q"), &units), vec![1, 2, 0]);
    }

    #[test]
    fn candidates_come_from_kept_paragraphs() {
        let paragraphs = vec![
            vec![unit("cats purr softly"), unit("dogs bark")],
            vec![unit("rivers flow"), unit("mountains stand tall")],
            vec![unit("cats chase mice"), unit("owls hunt")],
        ];
        let c = candidate_sentences(&unit("what do cats chase"), &paragraphs, 2, 10, 2);
        assert!(c.iter().all(|r| r.paragraph != 1));
        assert_eq!(c[0], SentenceRef { paragraph: 2, sentence: 0 });
        assert_eq!(candidate_sentences(&unit("cats"), &paragraphs, 3, 2, 2).len(), 2);
    }
}
