//! Slow, obviously-correct reference implementations for metric tests.

pub const ALPHABET: [&str; 3] = ["a", "b", "c"];

/// Every list over `ALPHABET` with length at most `max_len`.
pub fn all_lists(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for list in &frontier {
            for s in ALPHABET {
                let mut l: Vec<&str> = list.clone();
                l.push(s);
                next.push(l);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn occurrences(hay: &[&str], gram: &[&str]) -> usize {
    if gram.len() > hay.len() {
        return 0;
    }
    (0..=hay.len() - gram.len())
        .filter(|&i| &hay[i..i + gram.len()] == gram)
        .count()
}

/// Clipped matched n-grams and total candidate n-grams, counting each
/// distinct n-gram at its first position only.
pub fn clipped(candidate: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    if candidate.len() < n {
        return (0, 0);
    }
    let total = candidate.len() - n + 1;
    let mut matched = 0;
    for i in 0..total {
        let gram = &candidate[i..i + n];
        let first = (0..i).all(|k| &candidate[k..k + n] != gram);
        if first {
            matched += occurrences(candidate, gram).min(occurrences(reference, gram));
        }
    }
    (matched, total)
}

fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// LCS length by trying every subsequence of the shorter list.
pub fn lcs(a: &[&str], b: &[&str]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let ones = mask.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let sub: Vec<&str> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| short[i])
            .collect();
        if is_subsequence(&sub, long) {
            best = ones;
        }
    }
    best
}

pub fn f1(overlap: usize, c: usize, r: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c as f64;
    let r = overlap as f64 / r as f64;
    2.0 * p * r / (p + r)
}

/// BLEU-4 from oracle counts, following the documented conventions.
pub fn bleu(candidate: &[&str], reference: &[&str]) -> f64 {
    let c = candidate.len();
    if c == 0 || clipped(candidate, reference, 1).0 == 0 {
        return 0.0;
    }
    let orders = c.min(4);
    let mut logs = 0.0;
    for n in 1..=orders {
        let (m, t) = clipped(candidate, reference, n);
        let p = if m == 0 {
            1e-9 / t as f64
        } else {
            m as f64 / t as f64
        };
        logs += p.ln();
    }
    let r = reference.len();
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    bp * (logs / orders as f64).exp()
}
