//! Shannon entropy and the distributedness metric.
//!
//! Distributedness is the mean entropy over every contiguous subsequence of a
//! tutorship sequence, singletons included. Long runs with one tutor keep
//! many windows at zero entropy, so `⟨aaabbb⟩` scores below `⟨ababab⟩` even
//! though both have one bit of whole-sequence entropy.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::model::TutorshipSequence;

pub const DEFAULT_LOG_BASE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributednessResult {
    pub learner_id: String,
    pub value: f64,
    pub n_subsequences: usize,
    pub log_base: f64,
}

/// `-Σ p log p` over symbol frequencies, with `0 log 0 = 0`.
pub fn shannon_entropy<T: Eq + Hash>(sub: &[T], log_base: f64) -> f64 {
    assert!(!sub.is_empty(), "entropy of an empty subsequence");
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for s in sub {
        *counts.entry(s).or_default() += 1;
    }
    entropy_from_counts(counts.values().copied(), sub.len(), log_base)
}

pub fn entropy_from_counts(counts: impl IntoIterator<Item = usize>, total: usize, log_base: f64) -> f64 {
    let total = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    (h / log_base.ln()).max(0.0)
}

pub fn distributedness(seq: &TutorshipSequence, log_base: f64) -> DistributednessResult {
    let l = seq.len();
    DistributednessResult {
        learner_id: seq.learner_id.clone(),
        value: distributedness_symbols(&seq.symbols(), log_base),
        n_subsequences: l * (l + 1) / 2,
        log_base,
    }
}

/// Distributedness over dense symbol ids (`0..alphabet`).
///
/// For each start position the window is grown one symbol at a time while
/// `Σ c ln c` is updated incrementally, using `H = ln n - (Σ c ln c) / n`.
/// Total work is `O(L²)`.
pub fn distributedness_symbols(symbols: &[usize], log_base: f64) -> f64 {
    let l = symbols.len();
    assert!(l > 0, "distributedness of an empty sequence");
    let alphabet = symbols.iter().copied().max().unwrap_or(0) + 1;
    let c_ln_c: Vec<f64> = (0..=l).map(|c| if c < 2 { 0.0 } else { c as f64 * (c as f64).ln() }).collect();
    let mut counts = vec![0usize; alphabet];
    let mut total = 0.0;
    for start in 0..l {
        counts.fill(0);
        let mut acc = 0.0;
        let mut distinct = 0usize;
        for (len, &s) in symbols[start..].iter().enumerate().map(|(i, s)| (i + 1, s)) {
            let c = counts[s];
            if c == 0 {
                distinct += 1;
            }
            acc += c_ln_c[c + 1] - c_ln_c[c];
            counts[s] = c + 1;
            if distinct > 1 {
                let n = len as f64;
                total += (n.ln() - acc / n).max(0.0);
            }
        }
    }
    let n_sub = (l * (l + 1) / 2) as f64;
    total / n_sub / log_base.ln()
}

/// Literal enumeration of every contiguous subsequence, each scored with
/// [`shannon_entropy`]. `O(L³)`; kept as a cross-check for
/// [`distributedness_symbols`].
pub fn distributedness_bruteforce_oracle<T: Eq + Hash>(seq: &[T], log_base: f64) -> f64 {
    assert!(!seq.is_empty());
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..seq.len() {
        for j in i..seq.len() {
            sum += shannon_entropy(&seq[i..=j], log_base);
            n += 1;
        }
    }
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> f64 {
        distributedness(&TutorshipSequence::from_letters("x", s).unwrap(), 2.0).value
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&['a'], 2.0), 0.0);
        assert!((shannon_entropy(&['a', 'b'], 2.0) - 1.0).abs() < 1e-15);
        // -(2/3)log2(2/3) - (1/3)log2(1/3)
        let want = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        assert!((shannon_entropy(&['a', 'a', 'b'], 2.0) - want).abs() < 1e-15);
        assert!((want - 0.918_296).abs() < 1e-6);
        assert!((shannon_entropy(&['a', 'b'], std::f64::consts::E) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn distributedness_examples() {
        assert_eq!(d("aaaa"), 0.0);
        assert_eq!(d("a"), 0.0);
        assert!((d("aabb") - 0.383_659).abs() < 1e-6);
        assert!(d("aaabbb") < d("ababab"));
        let r = distributedness(&TutorshipSequence::from_letters("x", "abcd").unwrap(), 2.0);
        assert_eq!(r.n_subsequences, 10);
    }

    #[test]
    fn oracle_examples() {
        assert!((distributedness_bruteforce_oracle(&['a', 'a', 'b', 'b'], 2.0) - 0.383_659).abs() < 1e-6);
        assert_eq!(distributedness_bruteforce_oracle(&['a'], 2.0), 0.0);
    }
}
