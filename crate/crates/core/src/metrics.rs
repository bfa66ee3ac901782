//! Recognition metrics: CER, WER, exact-match accuracy and log-scaled
//! train time.

use serde::Serialize;

use crate::error::{domain, Result};

/// Minimum per-image train time (ms) that train times are measured against.
pub const T_MIN_MS: f64 = 33.6;

/// Unit-cost Levenshtein distance over arbitrary sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0usize; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

/// Whitespace-separated words; punctuation stays attached.
pub fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Character error rate: edit distance over the reference length.
pub fn cer(pred: &str, truth: &str) -> Result<f64> {
    let t = chars(truth);
    if t.is_empty() {
        return Err(domain("CER needs a non-empty reference"));
    }
    Ok(edit_distance(&chars(pred), &t) as f64 / t.len() as f64)
}

/// Word error rate: word-level edit distance over the reference word count.
pub fn wer(pred: &str, truth: &str) -> Result<f64> {
    let t = words(truth);
    if t.is_empty() {
        return Err(domain("WER needs a reference with at least one word"));
    }
    Ok(edit_distance(&words(pred), &t) as f64 / t.len() as f64)
}

/// Percentage of pairs `(pred, truth)` that match exactly.
pub fn string_acc<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(domain("accuracy needs at least one pair"));
    }
    let hits = pairs.iter().filter(|(p, t)| p.as_ref() == t.as_ref()).count();
    Ok(100.0 * hits as f64 / pairs.len() as f64)
}

/// Train time in arbitrary units, `log2(t / t_min)`.
pub fn t_arb(t_ms: f64, t_min_ms: f64) -> Result<f64> {
    if t_min_ms.is_nan() || t_ms.is_nan() || t_min_ms <= 0.0 || t_ms < t_min_ms {
        return Err(domain(format!("need t >= t_min > 0, got t = {t_ms}, t_min = {t_min_ms}")));
    }
    Ok((t_ms / t_min_ms).log2())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Lowercase both sides first. Off by default.
    pub lowercase: bool,
}

/// Corpus-level scores in percent. CER and WER pool edits and reference
/// lengths over all pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub cer: f64,
    pub wer: f64,
    pub acc: f64,
    pub n: usize,
}

pub fn evaluate<S: AsRef<str>>(pairs: &[(S, S)], options: EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(domain("evaluation needs at least one pair"));
    }
    let norm = |s: &str| if options.lowercase { s.to_lowercase() } else { s.to_string() };
    let (mut char_edits, mut char_total, mut word_edits, mut word_total, mut hits) = (0, 0, 0, 0, 0);
    for (p, t) in pairs {
        let (p, t) = (norm(p.as_ref()), norm(t.as_ref()));
        let (pc, tc) = (chars(&p), chars(&t));
        char_edits += edit_distance(&pc, &tc);
        char_total += tc.len();
        let (pw, tw) = (words(&p), words(&t));
        word_edits += edit_distance(&pw, &tw);
        word_total += tw.len();
        hits += usize::from(p == t);
    }
    if char_total == 0 || word_total == 0 {
        return Err(domain("references are empty"));
    }
    Ok(EvalReport {
        cer: 100.0 * char_edits as f64 / char_total as f64,
        wer: 100.0 * word_edits as f64 / word_total as f64,
        acc: 100.0 * hits as f64 / pairs.len() as f64,
        n: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-table Wagner-Fischer, kept separate from the rolling-row version.
    fn dp_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn cer_fixtures() {
        assert_eq!(cer("abc", "abc").unwrap(), 0.0);
        assert_eq!(dp_oracle(&chars("abd"), &chars("abc")), 1);
        assert_eq!(cer("abd", "abc").unwrap(), 1.0 / 3.0);
        assert_eq!(cer("", "abc").unwrap(), 1.0);
        assert!(cer("abc", "").is_err());
    }

    #[test]
    fn wer_fixtures() {
        assert_eq!(wer("the cat sat", "the cat sat").unwrap(), 0.0);
        assert_eq!(dp_oracle(&words("a b"), &words("a c")), 1);
        assert_eq!(wer("a b", "a c").unwrap(), 0.5);
        assert_eq!(wer("", "a b").unwrap(), 1.0);
        assert!(wer("a", "   ").is_err());
        assert_eq!(wer("a,  b", "a, b").unwrap(), 0.0);
    }

    #[test]
    fn accuracy_fixtures() {
        assert_eq!(string_acc(&[("a", "a"), ("b", "b")]).unwrap(), 100.0);
        assert_eq!(string_acc(&[("a", "x"), ("b", "y")]).unwrap(), 0.0);
        assert_eq!(string_acc(&[("a", "a"), ("b", "y")]).unwrap(), 50.0);
        assert!(string_acc::<&str>(&[]).is_err());
    }

    #[test]
    fn t_arb_fixtures() {
        assert_eq!(t_arb(33.6, T_MIN_MS).unwrap(), 0.0);
        assert_eq!(t_arb(67.2, T_MIN_MS).unwrap(), 1.0);
        assert_eq!(t_arb(134.4, T_MIN_MS).unwrap(), 2.0);
        assert!(t_arb(10.0, T_MIN_MS).is_err());
        assert!(t_arb(10.0, 0.0).is_err());
    }

    #[test]
    fn report_is_case_sensitive_by_default() {
        let pairs = [("Hello world", "hello world")];
        let r = evaluate(&pairs, EvalOptions::default()).unwrap();
        assert!((r.cer - 100.0 / 11.0).abs() < 1e-12);
        assert_eq!(r.wer, 50.0);
        assert_eq!(r.acc, 0.0);
        let r = evaluate(&pairs, EvalOptions { lowercase: true }).unwrap();
        assert_eq!((r.cer, r.wer, r.acc, r.n), (0.0, 0.0, 100.0, 1));
    }

    proptest! {
        #[test]
        fn distance_matches_oracle(a in "[abc ]{0,12}", b in "[abc ]{0,12}") {
            prop_assert_eq!(edit_distance(&chars(&a), &chars(&b)), dp_oracle(&chars(&a), &chars(&b)));
        }

        #[test]
        fn distance_is_a_metric(a in "[ab]{0,8}", b in "[ab]{0,8}", c in "[ab]{0,8}") {
            let (a, b, c) = (chars(&a), chars(&b), chars(&c));
            prop_assert_eq!(edit_distance(&a, &a), 0);
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        }

        #[test]
        fn cer_is_bounded(p in "[xyz]{0,10}", t in "[xyz]{1,10}") {
            let bound = p.len().max(t.len()) as f64 / t.len() as f64;
            prop_assert!(cer(&p, &t).unwrap() <= bound);
        }
    }
}
