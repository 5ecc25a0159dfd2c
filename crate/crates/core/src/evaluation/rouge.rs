use super::bleu::ngram_counts;

fn f1(overlap: usize, cand: usize, reference: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

/// Returns the score for degenerate inputs, or `None` when both sides have
/// something to compare.
fn degenerate<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> Option<f64> {
    let c_grams = candidate.len() + 1 - n.min(candidate.len() + 1);
    let r_grams = reference.len() + 1 - n.min(reference.len() + 1);
    match (c_grams, r_grams) {
        (0, 0) => {
            let same = candidate.len() == reference.len()
                && candidate
                    .iter()
                    .zip(reference)
                    .all(|(a, b)| a.as_ref() == b.as_ref());
            Some(if same { 1.0 } else { 0.0 })
        }
        (0, _) | (_, 0) => Some(0.0),
        _ => None,
    }
}

/// ROUGE-N F1 over clipped n-gram counts.
///
/// Both inputs empty scores 1 and exactly one empty scores 0. When neither
/// side is long enough to contain an n-gram, the score is 1 for identical
/// token lists and 0 otherwise.
pub fn rouge_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    assert!(n >= 1, "rouge_n needs n >= 1");
    if let Some(v) = degenerate(candidate, reference, n) {
        return v;
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    f1(overlap, candidate.len() + 1 - n, reference.len() + 1 - n)
}

pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    if let Some(v) = degenerate(candidate, reference, 1) {
        return v;
    }
    f1(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}
