const SUFFIXES: [&str; 4] = ["ing", "es", "ed", "s"];
const MIN_STEM: usize = 3;

/// Strips the first of "ing", "es", "ed", "s" (tried in that order) that
/// leaves at least three characters.
pub fn stem(token: &str) -> &str {
    for suffix in SUFFIXES {
        if let Some(s) = token.strip_suffix(suffix) {
            if s.chars().count() >= MIN_STEM {
                return s;
            }
        }
    }
    token
}

/// Candidate-to-reference alignment built in two passes (exact, then stem).
///
/// Each candidate token, left to right, takes the unmatched reference
/// position right after its predecessor's match if that position qualifies,
/// and otherwise the first unmatched qualifying position.
pub fn align<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Vec<Option<usize>> {
    let mut alignment = vec![None; candidate.len()];
    let mut used = vec![false; reference.len()];
    let stems: Vec<&str> = reference.iter().map(|t| stem(t.as_ref())).collect();

    let mut pass = |matches: &dyn Fn(usize, usize) -> bool| {
        for i in 0..candidate.len() {
            if alignment[i].is_some() {
                continue;
            }
            let ok = |j: usize| !used[j] && matches(i, j);
            let next = i
                .checked_sub(1)
                .and_then(|p| alignment[p])
                .map(|j| j + 1)
                .filter(|&j| j < reference.len() && ok(j));
            if let Some(j) = next.or_else(|| (0..reference.len()).find(|&j| ok(j))) {
                alignment[i] = Some(j);
                used[j] = true;
            }
        }
    };
    pass(&|i, j| candidate[i].as_ref() == reference[j].as_ref());
    pass(&|i, j| stem(candidate[i].as_ref()) == stems[j]);
    alignment
}

/// Number of runs of aligned candidate tokens whose reference positions are
/// also contiguous.
pub fn chunks(alignment: &[Option<usize>]) -> usize {
    let mut count = 0;
    let mut prev: Option<usize> = None;
    for a in alignment {
        match (*a, prev) {
            (Some(j), Some(p)) if j == p + 1 => {}
            (Some(_), _) => count += 1,
            _ => {}
        }
        prev = *a;
    }
    count
}

pub fn meteor<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let alignment = align(candidate, reference);
    let m = alignment.iter().flatten().count();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let frag = chunks(&alignment) as f64 / m as f64;
    let penalty = 0.5 * frag.powi(3);
    fmean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn stemming() {
        assert_eq!(stem("walking"), "walk");
        assert_eq!(stem("boxes"), "box");
        assert_eq!(stem("uses"), "use");
        assert_eq!(stem("bed"), "bed");
        assert_eq!(stem("cats"), "cat");
        assert_eq!(stem("is"), "is");
    }

    #[test]
    fn identity_six_tokens() {
        let t = toks("the cat sat on the mat");
        assert!((meteor(&t, &t) - 431.0 / 432.0).abs() < 1e-15);
    }

    #[test]
    fn single_token() {
        assert_eq!(meteor(&toks("a"), &toks("a")), 0.5);
    }

    #[test]
    fn disjoint() {
        assert_eq!(meteor(&toks("a b"), &toks("c d")), 0.0);
        assert_eq!(meteor(&toks(""), &toks("c d")), 0.0);
    }

    #[test]
    fn stem_stage_matches_inflections() {
        let a = align(&toks("patient walked"), &toks("patients walking"));
        assert_eq!(a, [Some(0), Some(1)]);
    }

    #[test]
    fn repeated_tokens_prefer_contiguous_positions() {
        let a = align(&toks("the cat the mat"), &toks("the cat the mat"));
        assert_eq!(a, [Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(chunks(&a), 1);
        let swapped = align(&toks("b a"), &toks("a b"));
        assert_eq!(chunks(&swapped), 2);
    }
}
