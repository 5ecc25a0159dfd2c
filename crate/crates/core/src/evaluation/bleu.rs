use std::collections::HashMap;

/// Stand-in precision for an order with no matching n-gram.
pub const EPSILON: f64 = 1e-9;

pub(crate) fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches against the total candidate n-grams, for one order.
pub fn clipped_matches<T: AsRef<str>>(
    candidate: &[T],
    reference: &[T],
    n: usize,
) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Sentence-level BLEU-4.
///
/// Orders longer than the candidate are left out of the geometric mean and
/// the remaining orders are weighted equally. An order with no match counts
/// as `EPSILON / total`, unless no unigram matches at all, which scores 0.
pub fn bleu4<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let c = candidate.len();
    if c == 0 {
        return 0.0;
    }
    let (unigram_hits, _) = clipped_matches(candidate, reference, 1);
    if unigram_hits == 0 {
        return 0.0;
    }
    let orders = c.min(4);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let (matched, total) = clipped_matches(candidate, reference, n);
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else {
            EPSILON / total as f64
        };
        log_sum += p.ln();
    }
    let r = reference.len();
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    (bp * (log_sum / orders as f64).exp()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_one() {
        let t = toks("the cat sat on the mat");
        assert_eq!(bleu4(&t, &t), 1.0);
        assert_eq!(bleu4(&toks("a"), &toks("a")), 1.0);
    }

    #[test]
    fn disjoint_and_empty() {
        assert_eq!(bleu4(&toks("a b c d"), &toks("e f g h")), 0.0);
        assert_eq!(bleu4(&toks(""), &toks("a")), 0.0);
    }

    #[test]
    fn clipping() {
        assert_eq!(
            clipped_matches(&toks("the the the"), &toks("the cat"), 1),
            (1, 3)
        );
        assert_eq!(
            clipped_matches(&toks("the the the"), &toks("the cat"), 2),
            (0, 2)
        );
        assert_eq!(clipped_matches(&toks("a"), &toks("a"), 2), (0, 0));
    }

    #[test]
    fn brevity_penalty_applies() {
        let r = toks("a b c d e f g h");
        let c = toks("a b c d");
        assert!((bleu4(&c, &r) - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }
}
