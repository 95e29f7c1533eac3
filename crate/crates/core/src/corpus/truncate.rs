use serde::{Deserialize, Serialize};

use super::example::QaExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Document length (tokens) covering 90% of documents.
    pub l_th: usize,
}

impl CorpusStats {
    /// Nearest-rank 90th percentile of document token counts.
    pub fn from_examples(examples: &[QaExample]) -> Self {
        let mut lens: Vec<usize> = examples.iter().map(|e| e.document_tokens.len()).collect();
        if lens.is_empty() {
            return Self { l_th: 0 };
        }
        lens.sort_unstable();
        let rank = (lens.len() * 9).div_ceil(10);
        Self { l_th: lens[rank.max(1) - 1] }
    }

    /// `min(2000, max(1000, l_th))`
    pub fn max_length(&self) -> usize {
        self.l_th.clamp(1000, 2000)
    }
}

/// Cut the document after the last whole sentence that fits within the
/// length limit. A first sentence longer than the limit is itself cut at
/// the limit so the document never becomes empty.
pub fn truncate_document(ex: &QaExample, stats: &CorpusStats) -> QaExample {
    truncate_to(ex, stats.max_length())
}

pub fn truncate_to(ex: &QaExample, limit: usize) -> QaExample {
    if ex.document_tokens.len() <= limit {
        return ex.clone();
    }
    let kept = ex.sentences.iter().take_while(|s| s.token_end <= limit).count();
    let mut out = ex.clone();
    let cut = if kept == 0 {
        out.sentences.truncate(1);
        out.sentences[0].token_end = limit;
        limit
    } else {
        out.sentences.truncate(kept);
        out.sentences[kept - 1].token_end
    };
    out.document_tokens.truncate(cut);
    out.context.truncate(out.document_tokens.last().map_or(0, |t| t.char_end));
    out.oracle_sentence_indices.retain(|&i| i < out.sentences.len() && {
        let s = out.sentences[i];
        ex.answers.iter().filter_map(|a| a.span).any(|sp| s.contains(sp.start, sp.end))
    });
    if ex.answers.iter().filter_map(|a| a.span).any(|sp| sp.end > cut) {
        out.flags.truncated_answer = true;
    }
    out
}
