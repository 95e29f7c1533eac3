use std::collections::BTreeSet;

/// Mean average precision summary. Questions without relevant items are
/// excluded and counted in `skipped`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapResult {
    pub map: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Precision at each relevant hit, averaged over all relevant items.
pub fn average_precision(ranked: &[usize], relevant: &BTreeSet<usize>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, idx) in ranked.iter().enumerate() {
        if relevant.contains(idx) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

pub fn mean_average_precision(rankings: &[(Vec<usize>, BTreeSet<usize>)]) -> MapResult {
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for (ranked, relevant) in rankings {
        if relevant.is_empty() {
            skipped += 1;
            continue;
        }
        sum += average_precision(ranked, relevant);
        evaluated += 1;
    }
    MapResult {
        map: if evaluated == 0 { 0.0 } else { sum / evaluated as f64 },
        evaluated,
        skipped,
    }
}

/// Whether any relevant item appears in the first `k` ranks.
pub fn hit_at_k(ranked: &[usize], relevant: &BTreeSet<usize>, k: usize) -> bool {
    ranked.iter().take(k).any(|i| relevant.contains(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn ap_cases() {
        assert_eq!(average_precision(&[3, 1, 2], &set(&[3])), 1.0);
        // relevance [1,0,1] in rank order
        assert!((average_precision(&[0, 1, 2], &set(&[0, 2])) - 5.0 / 6.0).abs() < 1e-15);
        assert!((average_precision(&[0, 1, 2, 3], &set(&[3])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_relevance_skipped() {
        let r = mean_average_precision(&[(vec![0, 1], set(&[1])), (vec![0, 1], set(&[]))]);
        assert_eq!(r.evaluated, 1);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn hits() {
        assert!(hit_at_k(&[2, 0, 1], &set(&[0]), 2));
        assert!(!hit_at_k(&[2, 0, 1], &set(&[0]), 1));
    }
}
