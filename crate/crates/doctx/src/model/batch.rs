use super::{Architecture, ModelError};
use crate::corpus::{ParallelDocument, Vocabulary, BOS, EOS, SEP};

/// Where the current-sentence target context comes from when assembling the
/// decoder side of a context-capable batch.
pub enum TargetContext<'a> {
    /// Reference translations from the corpus.
    Gold,
    /// Previously produced translations, indexed by sentence position within
    /// the document. Entry j must exist for every context sentence j.
    Generated(&'a [Vec<String>]),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchLayout {
    /// Index into `src` where the current sentence begins (0 when the source
    /// carries no context).
    pub src_current_start: usize,
    /// Index into `tgt_input` of the first current-sentence token; 0 means no
    /// target context, so BOS itself belongs to the current sentence.
    pub tgt_current_start: usize,
    /// multi_encoder block lengths [src_ctx, src, tgt_ctx]; zeros elsewhere.
    pub block_lens: [usize; 3],
}

impl BatchLayout {
    /// First output row that scores a current-sentence token. Output row j
    /// predicts tgt_input[j+1], so the row count shifts down by one.
    pub fn scored_output_start(&self) -> usize {
        self.tgt_current_start.saturating_sub(1)
    }
}

/// One teacher-forced example. All sequences are id vectors; pads may appear
/// only as a suffix and SEP only at sentence joins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceBatch {
    pub arch: Architecture,
    pub src: Vec<u32>,
    /// multi_encoder source-context block, empty otherwise or when k = 0.
    pub src_ctx: Vec<u32>,
    /// multi_encoder target-context block, empty otherwise or when k = 0.
    pub tgt_ctx: Vec<u32>,
    /// BOS followed by the (possibly context-joined) target tokens.
    pub tgt_input: Vec<u32>,
    /// Target tokens shifted left, closed with EOS. Row j is the gold label
    /// for decoder position j.
    pub tgt_output: Vec<u32>,
    pub layout: BatchLayout,
}

impl SequenceBatch {
    pub fn sep_count_src(&self) -> usize {
        self.src.iter().filter(|&&t| t == SEP).count()
    }
}

fn join_with_sep(sentences: &[Vec<u32>]) -> Vec<u32> {
    let mut out = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push(SEP);
        }
        out.extend_from_slice(s);
    }
    out
}

fn resolve_target_context(
    doc: &ParallelDocument,
    ctx_range: std::ops::Range<usize>,
    vocab: &Vocabulary,
    source: &TargetContext,
) -> Result<Vec<Vec<u32>>, ModelError> {
    let mut out = Vec::new();
    for j in ctx_range {
        let tokens: Vec<u32> = match source {
            TargetContext::Gold => vocab.encode(&doc.sentences[j].tgt),
            TargetContext::Generated(cache) => {
                let entry = cache.get(j).ok_or_else(|| {
                    ModelError::Context(format!(
                        "document {} sentence {j} has no generated translation",
                        doc.doc_id
                    ))
                })?;
                vocab.encode(entry)
            }
        };
        out.push(tokens);
    }
    Ok(out)
}

/// Assembles the teacher-forced example for sentence i of a document with k
/// requested context sentences (clamped at the document start).
pub fn build_batch(
    arch: Architecture,
    doc: &ParallelDocument,
    i: usize,
    k: usize,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    target_context: TargetContext,
) -> Result<SequenceBatch, ModelError> {
    if i >= doc.sentences.len() {
        return Err(ModelError::Context(format!(
            "sentence index {i} out of range for document {} ({} sentences)",
            doc.doc_id,
            doc.sentences.len()
        )));
    }
    let ctx_start = i.saturating_sub(k);
    let cur_src = src_vocab.encode(&doc.sentences[i].src);
    let cur_tgt = tgt_vocab.encode(&doc.sentences[i].tgt);

    let (src, src_ctx, tgt_ctx, tgt_seq, layout) = match arch {
        Architecture::Sentence => {
            let mut src = cur_src;
            src.push(EOS);
            (
                src,
                Vec::new(),
                Vec::new(),
                cur_tgt,
                BatchLayout { src_current_start: 0, tgt_current_start: 0, block_lens: [0; 3] },
            )
        }
        Architecture::Concat2to2 => {
            let src_ctx_sents: Vec<Vec<u32>> =
                (ctx_start..i).map(|j| src_vocab.encode(&doc.sentences[j].src)).collect();
            let tgt_ctx_sents = resolve_target_context(doc, ctx_start..i, tgt_vocab, &target_context)?;

            let mut all_src = src_ctx_sents;
            all_src.push(cur_src);
            let src_current_start = if all_src.len() == 1 {
                0
            } else {
                join_with_sep(&all_src[..all_src.len() - 1]).len() + 1
            };
            let mut src = join_with_sep(&all_src);
            src.push(EOS);

            let ctx_joined = join_with_sep(&tgt_ctx_sents);
            let tgt_current_start = if tgt_ctx_sents.is_empty() {
                0
            } else {
                // BOS, context tokens, SEP, then the current sentence.
                1 + ctx_joined.len() + 1
            };
            let mut tgt_seq = ctx_joined;
            if !tgt_seq.is_empty() {
                tgt_seq.push(SEP);
            }
            tgt_seq.extend_from_slice(&cur_tgt);
            (
                src,
                Vec::new(),
                Vec::new(),
                tgt_seq,
                BatchLayout { src_current_start, tgt_current_start, block_lens: [0; 3] },
            )
        }
        Architecture::MultiEncoder => {
            let src_ctx_sents: Vec<Vec<u32>> =
                (ctx_start..i).map(|j| src_vocab.encode(&doc.sentences[j].src)).collect();
            let tgt_ctx_sents = resolve_target_context(doc, ctx_start..i, tgt_vocab, &target_context)?;
            let mut src_ctx = join_with_sep(&src_ctx_sents);
            if !src_ctx.is_empty() {
                src_ctx.push(EOS);
            }
            let mut tgt_ctx = join_with_sep(&tgt_ctx_sents);
            if !tgt_ctx.is_empty() {
                tgt_ctx.push(EOS);
            }
            let mut src = cur_src;
            src.push(EOS);
            let blocks = [src_ctx.len(), src.len(), tgt_ctx.len()];
            (
                src,
                src_ctx,
                tgt_ctx,
                cur_tgt,
                BatchLayout { src_current_start: 0, tgt_current_start: 0, block_lens: blocks },
            )
        }
    };

    let mut tgt_input = Vec::with_capacity(tgt_seq.len() + 1);
    tgt_input.push(BOS);
    tgt_input.extend_from_slice(&tgt_seq);
    let mut tgt_output = tgt_seq;
    tgt_output.push(EOS);

    Ok(SequenceBatch { arch, src, src_ctx, tgt_ctx, tgt_input, tgt_output, layout })
}
