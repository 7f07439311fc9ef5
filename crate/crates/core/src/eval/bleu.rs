// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Sentence BLEU without smoothing, and Self-BLEU on top of it.
//!
//! Orders longer than the hypothesis are left out of the geometric mean, so
//! a short hypothesis identical to a reference still scores 1. Any order
//! with zero clipped matches makes the score 0.

use std::collections::HashMap;

use super::EvalError;
use crate::text;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// BLEU in [0, 1] of `hypothesis` against `references`.
pub fn bleu(hypothesis: &[String], references: &[Vec<String>], max_n: usize) -> f64 {
    let c = hypothesis.len();
    if c == 0 || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let orders = max_n.min(c);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let hyp = ngram_counts(hypothesis, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (g, cnt) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(cnt);
            }
        }
        let clipped: usize = hyp
            .iter()
            .map(|(g, &cnt)| cnt.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        let total = c + 1 - n;
        log_sum += (clipped as f64 / total as f64).ln();
    }
    // closest reference length, shorter one on ties
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / orders as f64).exp()
}

/// Mean BLEU (x100) of each sequence against all the others.
pub fn self_bleu(sequences: &[String], max_n: usize) -> Result<f64, EvalError> {
    if sequences.len() < 2 {
        return Err(EvalError::TooFewSequences);
    }
    let toks: Vec<Vec<String>> = sequences.iter().map(|s| text::tokens(s)).collect();
    let mut sum = 0.0;
    for i in 0..toks.len() {
        let refs: Vec<Vec<String>> = toks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, t)| t.clone())
            .collect();
        sum += bleu(&toks[i], &refs, max_n);
    }
    Ok(100.0 * sum / toks.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn identical_sequences_score_100() {
        let seqs = s(&["police arrested him . he fled"; 5]);
        assert!((self_bleu(&seqs, 3).unwrap() - 100.0).abs() < 1e-9);
        let short = s(&["he fled"; 3]);
        assert!((self_bleu(&short, 3).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_sequences_score_0() {
        assert_eq!(self_bleu(&s(&["a b c", "d e f"]), 3).unwrap(), 0.0);
    }

    #[test]
    fn needs_two() {
        assert!(matches!(self_bleu(&s(&["a"]), 3), Err(EvalError::TooFewSequences)));
    }

    #[test]
    fn hand_computed_value() {
        // hyp "a b c d", ref "a b c e": p1 = 3/4, p2 = 2/3, p3 = 1/2, bp = 1
        let hyp = s(&["a", "b", "c", "d"]);
        let r = vec![s(&["a", "b", "c", "e"])];
        let expected = (0.75f64 * (2.0 / 3.0) * 0.5).powf(1.0 / 3.0);
        assert!((bleu(&hyp, &r, 3) - expected).abs() < 1e-12);
        // brevity: hyp of 3 against ref of 4
        let hyp = s(&["a", "b", "c"]);
        let expected = (1.0 - 4.0f64 / 3.0).exp();
        assert!((bleu(&hyp, &r, 3) - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn permutation_invariant(seqs in proptest::collection::vec(proptest::collection::vec(0u8..5, 1..8), 2..6), rot in 0usize..6) {
            let texts: Vec<String> = seqs.iter().map(|v| v.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ")).collect();
            let mut rotated = texts.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let a = self_bleu(&texts, 3).unwrap();
            let b = self_bleu(&rotated, 3).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=100.0 + 1e-9).contains(&a));
        }
    }
}
