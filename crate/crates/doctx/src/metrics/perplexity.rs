//! Teacher-forced perplexity over current-sentence target tokens.

use super::MetricsError;
use crate::corpus::{ParallelCorpus, Vocabulary};
use crate::decoding::score_batch;
use crate::model::{build_batch, Model, TargetContext};

/// exp of the mean per-token cross entropy over every current-sentence
/// target token (closing EOS included), with gold context of width `k`.
pub fn perplexity(
    model: &Model,
    corpus: &ParallelCorpus,
    k: usize,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for doc in &corpus.docs {
        for i in 0..doc.sentences.len() {
            let b = build_batch(
                model.config.arch,
                doc,
                i,
                k,
                src_vocab,
                tgt_vocab,
                TargetContext::Gold,
            )?;
            let scored = score_batch(model, b, false)?;
            sum += scored.total;
            tokens += scored.per_token.len();
        }
    }
    if tokens == 0 {
        return Err(MetricsError::Config("perplexity over an empty corpus".into()));
    }
    Ok((-sum / tokens as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, ParallelCorpus, Side};
    use crate::metrics::fixtures::{pronoun_corpus, tiny, TRAINED};

    #[test]
    fn uniform_logits_score_every_token_at_vocab_size() {
        let corpus = pronoun_corpus();
        let sv = build_vocab(&corpus, Side::Source).unwrap();
        let tv = build_vocab(&corpus, Side::Target).unwrap();
        let mut model = Model::new(tiny(sv.len(), tv.len()), 3).unwrap();
        for name in ["out_proj", "out_bias"] {
            model.param_mut(name).data.fill(0.0);
        }
        let v = tv.len() as f64;
        let ppl = perplexity(&model, &corpus, 2, &sv, &tv).unwrap();
        assert!((ppl - v).abs() < 1e-9 * v, "ppl {ppl} vs vocab {v}");
    }

    #[test]
    fn context_lowers_perplexity_after_training() {
        let (model, corpus, sv, tv) = &*TRAINED;
        let p5 = perplexity(model, corpus, 5, sv, tv).unwrap();
        let p0 = perplexity(model, corpus, 0, sv, tv).unwrap();
        assert!(p5 > 1.0 && p0 > 1.0);
        assert!(p5 < p0, "p5 {p5} vs p0 {p0}");
        assert!(p0 < 2.0, "trained model should be far below chance, got {p0}");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus = pronoun_corpus();
        let sv = build_vocab(&corpus, Side::Source).unwrap();
        let tv = build_vocab(&corpus, Side::Target).unwrap();
        let model = Model::new(tiny(sv.len(), tv.len()), 3).unwrap();
        let empty = ParallelCorpus { docs: Vec::new() };
        let err = perplexity(&model, &empty, 0, &sv, &tv).unwrap_err();
        assert!(matches!(err, MetricsError::Config(_)), "{err}");
    }
}
