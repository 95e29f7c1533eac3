use super::example::QaExample;
use crate::eval::normalize_tokens;

/// Indices of sentences that fully contain at least one aligned answer span,
/// ascending and deduplicated.
pub fn label_oracle_sentences(ex: &QaExample) -> Vec<usize> {
    let mut out: Vec<usize> = ex
        .answers
        .iter()
        .filter_map(|a| a.span)
        .filter_map(|span| {
            ex.sentences
                .iter()
                .find(|s| s.contains(span.start, span.end))
                .map(|s| s.index)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Sentences whose normalized token sequence contains the normalized answer
/// tokens contiguously. Used when only answer text is available.
pub fn align_distant(ex: &QaExample, answer_text: &str) -> Vec<usize> {
    let needle = normalize_tokens(answer_text);
    if needle.is_empty() {
        return Vec::new();
    }
    (0..ex.sentences.len())
        .filter(|&i| {
            let text: Vec<&str> = ex.sentence_tokens(i).iter().map(|t| t.text.as_str()).collect();
            let hay = normalize_tokens(&text.join(" "));
            contains_subsequence(&hay, &needle)
        })
        .collect()
}

pub fn contains_subsequence(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.len() >= needle.len() && hay.windows(needle.len()).any(|w| w == needle)
}
