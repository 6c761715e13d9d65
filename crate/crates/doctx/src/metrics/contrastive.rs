//! Model-bound contrastive pronoun accuracy.

use super::MetricsError;
use crate::corpus::{ContrastiveExample, ParallelDocument, SentencePair, Vocabulary};
use crate::decoding::force_score;
use crate::model::{Model, TargetContext};

/// Rebuilds a document view of one example: its context pairs followed by
/// the current source with a placeholder target.
fn pseudo_doc(ex: &ContrastiveExample) -> ParallelDocument {
    let mut sentences: Vec<SentencePair> = ex
        .src_context
        .iter()
        .zip(&ex.tgt_context)
        .map(|(s, t)| SentencePair { src: s.clone(), tgt: t.clone() })
        .collect();
    sentences.push(SentencePair { src: ex.src.clone(), tgt: ex.correct.clone() });
    ParallelDocument {
        doc_id: "contrastive".to_string(),
        sentences,
        annotations: Vec::new(),
    }
}

/// Fraction of examples where the correct target outscores every incorrect
/// variant under forced scoring with gold target context of width `k`.
/// Ties count as incorrect.
pub fn contrastive_accuracy(
    model: &Model,
    examples: &[ContrastiveExample],
    k: usize,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<f64, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::Config("empty contrastive set".into()));
    }
    if k > model.config.max_context {
        return Err(MetricsError::Config(format!(
            "k={k} exceeds model max_context {}",
            model.config.max_context
        )));
    }
    let mut correct = 0usize;
    for ex in examples {
        let doc = pseudo_doc(ex);
        let i = doc.sentences.len() - 1;
        let score = |cand: &[String]| -> Result<f64, MetricsError> {
            Ok(force_score(
                model,
                &doc,
                i,
                k,
                cand,
                TargetContext::Gold,
                src_vocab,
                tgt_vocab,
                false,
            )?
            .total)
        };
        let pos = score(&ex.correct)?;
        let mut beats_all = true;
        for inc in &ex.incorrect {
            if pos <= score(inc)? {
                beats_all = false;
                break;
            }
        }
        if beats_all {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{lexicon, make_contrastive_set};
    use crate::metrics::fixtures::TRAINED;

    #[test]
    fn context_resolves_pronouns_bare_sentences_cannot() {
        let (model, corpus, sv, tv) = &*TRAINED;
        let set = make_contrastive_set(corpus, 23);
        assert!(set.len() >= 6 && set.len().is_multiple_of(3), "balanced set, got {}", set.len());
        for p in lexicon::PRONOUNS {
            assert!(tv.id(p).is_some(), "pronoun {p} missing from target vocab");
        }
        let a0 = contrastive_accuracy(model, &set, 0, sv, tv).unwrap();
        let a5 = contrastive_accuracy(model, &set, 5, sv, tv).unwrap();
        // Every current sentence shares one surface form, so no-context
        // scoring ranks the three candidates identically everywhere and
        // exactly one balanced class wins.
        assert!((a0 - 1.0 / 3.0).abs() < 1e-12, "a0 {a0}");
        assert!(a5 >= 0.9, "a5 {a5}");
        assert!(a5 > a0);
    }

    #[test]
    fn empty_sets_and_oversized_context_are_rejected() {
        let (model, corpus, sv, tv) = &*TRAINED;
        let err = contrastive_accuracy(model, &[], 0, sv, tv).unwrap_err();
        assert!(matches!(err, MetricsError::Config(_)), "{err}");
        let set = make_contrastive_set(corpus, 23);
        let err = contrastive_accuracy(model, &set, 99, sv, tv).unwrap_err();
        assert!(matches!(err, MetricsError::Config(_)), "{err}");
    }
}
