//! Translation quality and context-utilization metrics.

mod bleu;
mod contrastive;
mod cxmi;
mod f1;
mod perplexity;
mod report;

pub use bleu::bleu;
pub use contrastive::contrastive_accuracy;
pub use cxmi::{cxmi, gold_context_builder, random_context_builder, CxmiResult, SentenceDelta};
pub use f1::phenomena_f1;
pub use perplexity::perplexity;
pub use report::{metric_line, parse_summary, summary_block};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("pairing mismatch: {hyps} hypotheses vs {refs} references")]
    Pairing { hyps: usize, refs: usize },
    #[error("metrics configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Decode(#[from] crate::decoding::DecodeError),
}

/// Fraction of examples whose correct target outscores every incorrect
/// variant under `score`. Ties count as incorrect.
pub fn contrastive_accuracy_with<F>(
    examples: &[crate::corpus::ContrastiveExample],
    mut score: F,
) -> f64
where
    F: FnMut(&crate::corpus::ContrastiveExample, &[String]) -> f64,
{
    if examples.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for ex in examples {
        let pos = score(ex, &ex.correct);
        let beats_all = ex.incorrect.iter().all(|inc| pos > score(ex, inc));
        if beats_all {
            correct += 1;
        }
    }
    correct as f64 / examples.len() as f64
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::corpus::{
        build_vocab, generate_corpus, lexicon, GenConfig, ParallelCorpus, PhenomenonKind, Side,
        Vocabulary,
    };
    use crate::model::{Architecture, Model, ModelConfig};
    use crate::training::{train, TrainConfig};
    use std::sync::LazyLock;

    /// Pronoun-dense corpus whose pronoun sentences are all rewritten to one
    /// fixed surface form. Identical current sentences then occur with every
    /// pronoun gender, so the antecedent in context is the only signal that
    /// selects the pronoun and no-context scoring cannot beat chance.
    pub fn pronoun_corpus() -> ParallelCorpus {
        let config = GenConfig {
            n_docs: 6,
            sents_per_doc: 10,
            n_nouns: 6,
            n_verbs: 5,
            n_adverbs: 4,
            pronoun_rate: 0.9,
            distance_distribution: [0.6, 0.4, 0.0, 0.0, 0.0],
            formality: false,
            cohesion: true,
            verb_form: false,
        };
        let mut corpus = generate_corpus(&config, 59).unwrap();
        for doc in &mut corpus.docs {
            for ann in &doc.annotations {
                if ann.kind != PhenomenonKind::Pronoun || ann.side != Side::Target {
                    continue;
                }
                let pron = doc.sentences[ann.sent_idx].tgt[ann.tok_idx].clone();
                doc.sentences[ann.sent_idx].src = vec![
                    lexicon::SRC_PRONOUN.into(),
                    lexicon::src_verb(1),
                    lexicon::STOP.into(),
                ];
                doc.sentences[ann.sent_idx].tgt =
                    vec![pron, lexicon::tgt_verb(1, false), lexicon::STOP.into()];
            }
        }
        corpus
    }

    pub fn tiny(src_vocab: usize, tgt_vocab: usize) -> ModelConfig {
        ModelConfig {
            arch: Architecture::Concat2to2,
            n_layers: 1,
            d_model: 32,
            n_heads: 2,
            d_ffn: 64,
            dropout: 0.0,
            src_vocab,
            tgt_vocab,
            max_positions: 128,
            max_context: 5,
            tied_context_embeddings: true,
        }
    }

    /// Concat model trained to convergence on the rewritten pronoun corpus,
    /// with that corpus and its vocabularies.
    pub static TRAINED: LazyLock<(Model, ParallelCorpus, Vocabulary, Vocabulary)> =
        LazyLock::new(|| {
            let corpus = pronoun_corpus();
            let sv = build_vocab(&corpus, Side::Source).unwrap();
            let tv = build_vocab(&corpus, Side::Target).unwrap();
            let model = Model::new(tiny(sv.len(), tv.len()), 61).unwrap();
            let mut cfg = TrainConfig::desk(67);
            cfg.warmup = 40;
            cfg.lr_scale = 8e-3 * 40f64.sqrt();
            cfg.max_epochs = 80;
            cfg.patience = 40;
            let out = train(model, &corpus, &corpus, &sv, &tv, &cfg).unwrap();
            (out.model, corpus, sv, tv)
        });
}
