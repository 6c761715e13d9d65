//! Corpus-level BLEU.

use super::MetricsError;
use std::collections::HashMap;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *counts.entry(&tokens[i..i + n]).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU in [0, 100]: geometric mean of the modified 1-4-gram
/// precisions times the brevity penalty, with no smoothing. A zero match
/// count at any order yields 0, which also covers corpora too short to
/// contain any 4-gram.
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::Pairing {
            hyps: hypotheses.len(),
            refs: references.len(),
        });
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, re) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += re.len();
        for n in 1..=4 {
            let ref_counts = ngram_counts(re, n);
            for (gram, count) in ngram_counts(hyp, n) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matched[n - 1] += count.min(clip);
            }
            total[n - 1] += hyp.len().saturating_sub(n - 1);
        }
    }
    if matched.contains(&0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp();
    Ok(100.0 * bp * log_precision.exp())
}

#[cfg(test)]
mod tests {
    // Frozen oracle constants keep their full generated precision.
    #![allow(clippy::excessive_precision)]

    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn identical_corpora_score_one_hundred() {
        let sents = vec![toks("m0 w1 b2 b0 ."), toks("es w0x b1 .")];
        assert_eq!(bleu(&sents, &sents).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_vocabularies_score_zero() {
        let hyp = vec![toks("q q q q q")];
        let re = vec![toks("z z z z z")];
        assert_eq!(bleu(&hyp, &re).unwrap(), 0.0);
    }

    #[test]
    fn repeated_word_hypothesis_is_clipped_to_zero() {
        // Unigrams clip to the reference's two `the`; no hypothesis bigram
        // appears in the reference, so the order-2 match count is zero.
        let hyp = vec![toks("the the the the the the the")];
        let re = vec![toks("the cat sat on the mat .")];
        assert_eq!(bleu(&hyp, &re).unwrap(), 0.0);
    }

    #[test]
    fn one_substitution_reference_value() {
        // Precisions 6/7, 4/6, 2/5, 1/4 with brevity penalty 1.
        let hyp = vec![toks("the cat sat on a mat .")];
        let re = vec![toks("the cat sat on the mat .")];
        let score = bleu(&hyp, &re).unwrap();
        assert!((score - 48.892302243490102191).abs() < 1e-12, "{score}");
    }

    #[test]
    fn brevity_penalty_applies_to_short_hypotheses() {
        // Identical text truncated by its last token: precisions all 1,
        // BP = exp(1 - 5/4).
        let hyp = vec![toks("a b c d")];
        let re = vec![toks("a b c d e")];
        let score = bleu(&hyp, &re).unwrap();
        assert!((score - 100.0 * (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn pairing_mismatch_is_an_error() {
        assert!(matches!(
            bleu(&[toks("a")], &[]),
            Err(MetricsError::Pairing { hyps: 1, refs: 0 })
        ));
    }

    #[test]
    fn corpus_statistic_is_pairing_order_invariant() {
        let hyps = vec![toks("m0 w1 b2 b0 ."), toks("es w0x b1 b1 ."), toks("du w2 b0 b3 .")];
        let refs = vec![toks("m0 w1 b2 b2 ."), toks("es w0x b1 b1 ."), toks("vu w2 b0 b3 .")];
        let forward = bleu(&hyps, &refs).unwrap();
        let hyps_rev: Vec<_> = hyps.iter().rev().cloned().collect();
        let refs_rev: Vec<_> = refs.iter().rev().cloned().collect();
        assert_eq!(forward, bleu(&hyps_rev, &refs_rev).unwrap());
    }

    proptest! {
        #[test]
        fn self_bleu_is_always_one_hundred(
            sents in proptest::collection::vec(
                proptest::collection::vec("[a-d]", 4..9),
                1..5,
            )
        ) {
            let sents: Vec<Vec<String>> = sents;
            prop_assert_eq!(bleu(&sents, &sents).unwrap(), 100.0);
        }
    }
}
