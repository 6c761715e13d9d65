//! Conditional cross-mutual information: how much context shifts the
//! probability the model assigns to the reference translation.

use super::MetricsError;
use crate::corpus::{ParallelCorpus, ParallelDocument, Vocabulary, SEP};
use crate::decoding::score_batch;
use crate::model::{build_batch, Architecture, Model, SequenceBatch, TargetContext};
use crate::rng::Prng;

/// Token-weighted log-prob delta for one sentence.
#[derive(Clone, Debug)]
pub struct SentenceDelta {
    pub doc: usize,
    pub sent: usize,
    /// Sum over current-sentence tokens of log P(with) - log P(without).
    pub delta_sum: f64,
    pub tokens: usize,
}

/// Mean per-token log-prob delta in nats. Positive means context increases
/// the probabilities the model assigns to the reference tokens.
#[derive(Clone, Debug)]
pub struct CxmiResult {
    pub mean: f64,
    pub tokens: usize,
    pub per_sentence: Vec<SentenceDelta>,
}

/// Teacher-forced batches with gold context of width k.
pub fn gold_context_builder<'a>(
    arch: Architecture,
    k: usize,
    src_vocab: &'a Vocabulary,
    tgt_vocab: &'a Vocabulary,
) -> impl FnMut(&ParallelDocument, usize) -> Result<SequenceBatch, MetricsError> + 'a {
    move |doc, i| {
        Ok(build_batch(arch, doc, i, k, src_vocab, tgt_vocab, TargetContext::Gold)?)
    }
}

fn randomize(tokens: &mut [u32], rng: &mut Prng, vocab: &Vocabulary, keep_last: bool) {
    let open = vocab.len() - 5;
    let end = tokens.len() - keep_last as usize;
    for t in tokens[..end].iter_mut() {
        if *t != SEP {
            *t = (rng.below(open) + 5) as u32;
        }
    }
}

/// Like [`gold_context_builder`] but with every context token replaced by a
/// uniform non-reserved draw, keeping separator and terminator positions and
/// therefore exactly the gold context lengths. The current sentence is
/// untouched. Draws are keyed by document id and sentence index, so results
/// do not depend on traversal order.
pub fn random_context_builder<'a>(
    arch: Architecture,
    k: usize,
    src_vocab: &'a Vocabulary,
    tgt_vocab: &'a Vocabulary,
    seed: u64,
) -> impl FnMut(&ParallelDocument, usize) -> Result<SequenceBatch, MetricsError> + 'a {
    let root = Prng::new(seed).fork("cxmi.random");
    move |doc, i| {
        let mut b = build_batch(arch, doc, i, k, src_vocab, tgt_vocab, TargetContext::Gold)?;
        let mut rng = root.fork(&doc.doc_id).fork_idx("sent", i as u64);
        match arch {
            Architecture::Sentence => {}
            Architecture::Concat2to2 => {
                let scs = b.layout.src_current_start;
                if scs > 0 {
                    randomize(&mut b.src[..scs], &mut rng, src_vocab, false);
                }
                let tcs = b.layout.tgt_current_start;
                if tcs > 0 {
                    randomize(&mut b.tgt_input[1..tcs], &mut rng, tgt_vocab, false);
                    for j in 0..tcs - 1 {
                        b.tgt_output[j] = b.tgt_input[j + 1];
                    }
                }
            }
            Architecture::MultiEncoder => {
                if !b.src_ctx.is_empty() {
                    randomize(&mut b.src_ctx, &mut rng, src_vocab, true);
                }
                if !b.tgt_ctx.is_empty() {
                    randomize(&mut b.tgt_ctx, &mut rng, tgt_vocab, true);
                }
            }
        }
        Ok(b)
    }
}

/// Scores every sentence under both builders and aggregates the per-token
/// log-prob differences. Both builders must agree on the current-sentence
/// target; only their context may differ.
pub fn cxmi<FW, FO>(
    model: &Model,
    corpus: &ParallelCorpus,
    mut with: FW,
    mut without: FO,
) -> Result<CxmiResult, MetricsError>
where
    FW: FnMut(&ParallelDocument, usize) -> Result<SequenceBatch, MetricsError>,
    FO: FnMut(&ParallelDocument, usize) -> Result<SequenceBatch, MetricsError>,
{
    let mut per_sentence = Vec::new();
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for (d, doc) in corpus.docs.iter().enumerate() {
        for i in 0..doc.sentences.len() {
            let bw = with(doc, i)?;
            let bo = without(doc, i)?;
            let cur_w = &bw.tgt_output[bw.layout.scored_output_start()..];
            let cur_o = &bo.tgt_output[bo.layout.scored_output_start()..];
            if cur_w != cur_o {
                return Err(MetricsError::Config(format!(
                    "context builders disagree on the current target of {} sentence {i}",
                    doc.doc_id
                )));
            }
            let sw = score_batch(model, bw, false)?;
            let so = score_batch(model, bo, false)?;
            let delta_sum = sw.total - so.total;
            let n = sw.per_token.len();
            per_sentence.push(SentenceDelta { doc: d, sent: i, delta_sum, tokens: n });
            sum += delta_sum;
            tokens += n;
        }
    }
    if tokens == 0 {
        return Err(MetricsError::Config("cxmi over an empty corpus".into()));
    }
    Ok(CxmiResult { mean: sum / tokens as f64, tokens, per_sentence })
}
