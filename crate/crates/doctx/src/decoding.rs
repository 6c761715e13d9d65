//! Decoding: greedy and beam search, document-sequential translation with
//! self-generated target context, and forced scoring of candidate targets.

use thiserror::Error;

use crate::corpus::{ParallelDocument, Vocabulary, BOS, EOS, PAD, SEP};
use crate::model::{
    build_batch, Architecture, BatchLayout, ForwardTrace, Model, ModelError, SequenceBatch,
    TargetContext,
};
use crate::rng::Prng;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error("token {0:?} missing from the vocabulary")]
    Vocabulary(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What fills the context blocks during document translation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextMode {
    /// Gold source context; target context from the model's own earlier
    /// outputs, in document order.
    Correct,
    /// Both context sides replaced by uniform draws from the non-reserved
    /// vocabulary, each sentence keeping exactly its correct length.
    Random,
    /// Empty context regardless of k.
    None,
}

impl ContextMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Correct => "correct",
            ContextMode::Random => "random",
            ContextMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<ContextMode> {
        match s {
            "correct" => Some(ContextMode::Correct),
            "random" => Some(ContextMode::Random),
            "none" => Some(ContextMode::None),
            _ => None,
        }
    }
}

/// One finished hypothesis. `tokens` holds the current-sentence ids with EOS
/// excluded; `sum_logp` covers every scored step, EOS included when emitted.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub tokens: Vec<u32>,
    pub sum_logp: f64,
    pub scored: usize,
    pub ended_with_eos: bool,
}

impl Decoded {
    /// Length-normalized score: sum of log-probs divided by token count.
    pub fn norm_score(&self) -> f64 {
        self.sum_logp / self.scored.max(1) as f64
    }
}

/// Assembled model inputs for decoding one sentence: fixed encoder blocks
/// plus the forced decoder prefix (BOS, or BOS + joined target context + SEP
/// in concatenation mode).
pub struct DecodeInput {
    arch: Architecture,
    src: Vec<u32>,
    src_ctx: Vec<u32>,
    tgt_ctx: Vec<u32>,
    forced: Vec<u32>,
    layout: BatchLayout,
    cur_src_len: usize,
    max_positions: usize,
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

fn random_tokens(rng: &mut Prng, len: usize, vocab: &Vocabulary) -> Vec<u32> {
    let open = vocab.len() - 5;
    (0..len).map(|_| (rng.below(open) + 5) as u32).collect()
}

impl DecodeInput {
    /// Builds the decode inputs for sentence `i` with up to `k` context
    /// sentences. `cache` holds the model's earlier outputs for this
    /// document; correct and random modes require entries for every context
    /// position. Random mode draws from `rng`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        model: &Model,
        doc: &ParallelDocument,
        i: usize,
        k: usize,
        mode: ContextMode,
        cache: &[Vec<String>],
        mut rng: Option<&mut Prng>,
        src_vocab: &Vocabulary,
        tgt_vocab: &Vocabulary,
    ) -> Result<DecodeInput, DecodeError> {
        let c = &model.config;
        if k > c.max_context {
            return Err(DecodeError::Config(format!(
                "k={k} exceeds model max_context {}",
                c.max_context
            )));
        }
        if i >= doc.sentences.len() {
            return Err(DecodeError::Config(format!(
                "sentence {i} out of range for document {}",
                doc.doc_id
            )));
        }
        if mode == ContextMode::Random && rng.is_none() {
            return Err(DecodeError::Config("random context mode needs an rng".into()));
        }

        let cur = src_vocab.encode(&doc.sentences[i].src);
        let cur_src_len = cur.len();
        let mut input = DecodeInput {
            arch: c.arch,
            src: Vec::new(),
            src_ctx: Vec::new(),
            tgt_ctx: Vec::new(),
            forced: vec![BOS],
            layout: BatchLayout {
                src_current_start: 0,
                tgt_current_start: 0,
                block_lens: [0; 3],
            },
            cur_src_len,
            max_positions: c.max_positions,
        };

        if c.arch == Architecture::Sentence {
            input.src = cur;
            input.src.push(EOS);
            return Ok(input);
        }

        let ctx_start = match mode {
            ContextMode::None => i,
            _ => i.saturating_sub(k),
        };
        let mut src_sents: Vec<Vec<u32>> = Vec::new();
        let mut tgt_sents: Vec<Vec<u32>> = Vec::new();
        for j in ctx_start..i {
            let gold_src = src_vocab.encode(&doc.sentences[j].src);
            let prev_tgt = cache.get(j).ok_or_else(|| {
                DecodeError::Config(format!(
                    "document {} sentence {j} missing from the translation cache",
                    doc.doc_id
                ))
            })?;
            let gold_tgt = tgt_vocab.encode(prev_tgt);
            match mode {
                ContextMode::Random => {
                    let r = rng.as_deref_mut().expect("checked above");
                    src_sents.push(random_tokens(r, gold_src.len(), src_vocab));
                    tgt_sents.push(random_tokens(r, gold_tgt.len(), tgt_vocab));
                }
                _ => {
                    src_sents.push(gold_src);
                    tgt_sents.push(gold_tgt);
                }
            }
        }

        let src_joined = join_with_sep(&src_sents);
        let tgt_joined = join_with_sep(&tgt_sents);
        match c.arch {
            Architecture::Sentence => unreachable!("handled above"),
            Architecture::Concat2to2 => {
                if src_sents.is_empty() {
                    input.src = cur;
                } else {
                    input.src = src_joined;
                    input.src.push(SEP);
                    input.layout.src_current_start = input.src.len();
                    input.src.extend_from_slice(&cur);
                    input.forced.extend_from_slice(&tgt_joined);
                    input.forced.push(SEP);
                    input.layout.tgt_current_start = input.forced.len();
                }
                input.src.push(EOS);
            }
            Architecture::MultiEncoder => {
                input.src = cur;
                input.src.push(EOS);
                if !src_sents.is_empty() {
                    input.src_ctx = src_joined;
                    input.src_ctx.push(EOS);
                    input.tgt_ctx = tgt_joined;
                    input.tgt_ctx.push(EOS);
                }
                input.layout.block_lens =
                    [input.src_ctx.len(), input.src.len(), input.tgt_ctx.len()];
            }
        }
        Ok(input)
    }
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

/// Log-probabilities of the next token given the forced prefix plus
/// `generated`.
fn step_log_probs(
    model: &Model,
    input: &DecodeInput,
    generated: &[u32],
) -> Result<Vec<f64>, DecodeError> {
    let mut tgt_input = input.forced.clone();
    tgt_input.extend_from_slice(generated);
    let n = tgt_input.len();
    let batch = SequenceBatch {
        arch: input.arch,
        src: input.src.clone(),
        src_ctx: input.src_ctx.clone(),
        tgt_ctx: input.tgt_ctx.clone(),
        tgt_input,
        tgt_output: vec![EOS; n],
        layout: input.layout.clone(),
    };
    let fwd = model.forward(&batch, false)?;
    Ok(log_softmax(fwd.row(fwd.rows - 1)))
}

/// Generated tokens allowed before the decode is cut off.
fn decode_cap(input: &DecodeInput) -> usize {
    (2 * input.cur_src_len + 8).min(input.max_positions.saturating_sub(input.forced.len()))
}

/// Argmax decoding; ties go to the lowest token id. PAD and BOS are never
/// emitted.
pub fn greedy_decode(model: &Model, input: &DecodeInput) -> Result<Decoded, DecodeError> {
    let cap = decode_cap(input);
    let mut tokens: Vec<u32> = Vec::new();
    let mut sum = 0.0;
    loop {
        if tokens.len() >= cap {
            return Ok(Decoded {
                scored: tokens.len(),
                tokens,
                sum_logp: sum,
                ended_with_eos: false,
            });
        }
        let lp = step_log_probs(model, input, &tokens)?;
        let mut best = EOS as usize;
        for (id, &l) in lp.iter().enumerate() {
            if id as u32 == PAD || id as u32 == BOS {
                continue;
            }
            if l > lp[best] {
                best = id;
            }
        }
        sum += lp[best];
        if best as u32 == EOS {
            return Ok(Decoded {
                scored: tokens.len() + 1,
                tokens,
                sum_logp: sum,
                ended_with_eos: true,
            });
        }
        tokens.push(best as u32);
    }
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<u32>,
    sum: f64,
    eos: bool,
}

impl Hyp {
    fn scored(&self) -> usize {
        (self.tokens.len() + self.eos as usize).max(1)
    }

    fn norm(&self) -> f64 {
        self.sum / self.scored() as f64
    }
}

/// Beam search over the same scoring as [`greedy_decode`]. Candidates are
/// ranked by summed log-prob during the search and by length-normalized score
/// at the end; all ties break lexicographically by token ids.
pub fn beam_decode(model: &Model, input: &DecodeInput, beam: usize) -> Result<Decoded, DecodeError> {
    if beam < 1 {
        return Err(DecodeError::Config(format!("beam {beam} must be at least 1")));
    }
    let cap = decode_cap(input);
    let mut beams = vec![Hyp { tokens: Vec::new(), sum: 0.0, eos: false }];
    while !beams.iter().all(|h| h.eos || h.tokens.len() >= cap) {
        let mut cands: Vec<Hyp> = Vec::new();
        for h in &beams {
            if h.eos || h.tokens.len() >= cap {
                cands.push(h.clone());
                continue;
            }
            let lp = step_log_probs(model, input, &h.tokens)?;
            for (id, &l) in lp.iter().enumerate() {
                let id = id as u32;
                if id == PAD || id == BOS {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                let eos = id == EOS;
                if !eos {
                    tokens.push(id);
                }
                cands.push(Hyp { tokens, sum: h.sum + l, eos });
            }
        }
        cands.sort_by(|a, b| b.sum.total_cmp(&a.sum).then_with(|| a.tokens.cmp(&b.tokens)));
        cands.truncate(beam);
        beams = cands;
    }
    beams.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then_with(|| a.tokens.cmp(&b.tokens)));
    let best = beams.into_iter().next().expect("beam is never empty");
    Ok(Decoded {
        scored: best.scored(),
        ended_with_eos: best.eos,
        tokens: best.tokens,
        sum_logp: best.sum,
    })
}

/// Drops everything up to the last SEP, so concatenation-mode outputs carry
/// only the current sentence.
fn strip_context(tokens: &[u32]) -> &[u32] {
    match tokens.iter().rposition(|&t| t == SEP) {
        Some(p) => &tokens[p + 1..],
        None => tokens,
    }
}

/// Translates a document in sentence order. The returned sentences double as
/// the translation cache: sentence i was decoded with target context taken
/// from entries 0..i of this same vector (correct mode), random stand-ins of
/// identical lengths (random mode), or nothing (none mode).
#[allow(clippy::too_many_arguments)]
pub fn translate_document(
    model: &Model,
    doc: &ParallelDocument,
    k: usize,
    beam: usize,
    mode: ContextMode,
    seed: u64,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<Vec<Vec<String>>, DecodeError> {
    if beam < 1 {
        return Err(DecodeError::Config(format!("beam {beam} must be at least 1")));
    }
    let root = Prng::new(seed).fork("decode.random");
    let mut cache: Vec<Vec<String>> = Vec::new();
    for i in 0..doc.sentences.len() {
        let mut rng = root.fork_idx("sent", i as u64);
        let input = DecodeInput::build(
            model,
            doc,
            i,
            k,
            mode,
            &cache,
            Some(&mut rng),
            src_vocab,
            tgt_vocab,
        )?;
        let decoded = beam_decode(model, &input, beam)?;
        cache.push(tgt_vocab.decode(strip_context(&decoded.tokens)));
    }
    Ok(cache)
}

/// Translation dump format: `doc_id TAB sent_idx TAB tokens`, one line per
/// sentence, aligned to the input corpus.
pub fn format_translations(doc_id: &str, sentences: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        out.push_str(&format!("{doc_id}\t{i}\t{}\n", s.join(" ")));
    }
    out
}

/// Forced scoring result. `per_token` aligns with the scored rows: the
/// current-sentence tokens followed by EOS; context-target rows are excluded.
pub struct ScoredTarget {
    pub total: f64,
    pub per_token: Vec<f64>,
    pub batch: SequenceBatch,
    pub trace: Option<ForwardTrace>,
}

/// Teacher-forced scoring of an already-assembled batch: log P of each
/// current-sentence output row (EOS included), context rows skipped.
pub fn score_batch(
    model: &Model,
    batch: SequenceBatch,
    capture: bool,
) -> Result<ScoredTarget, DecodeError> {
    let fwd = model.forward(&batch, capture)?;
    let start = batch.layout.scored_output_start();
    let mut per_token = Vec::new();
    let mut total = 0.0;
    for row in start..fwd.rows {
        let lp = log_softmax(fwd.row(row));
        let l = lp[batch.tgt_output[row] as usize];
        per_token.push(l);
        total += l;
    }
    Ok(ScoredTarget { total, per_token, batch, trace: fwd.trace })
}

/// Scores `target` as the translation of sentence `i` under teacher forcing.
/// The score is the sum of log P(y_t | ...) over the current-sentence tokens
/// plus the closing EOS; in concatenation mode the context-target prefix
/// conditions the model but contributes nothing to the score.
#[allow(clippy::too_many_arguments)]
pub fn force_score(
    model: &Model,
    doc: &ParallelDocument,
    i: usize,
    k: usize,
    target: &[String],
    context: TargetContext,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    capture: bool,
) -> Result<ScoredTarget, DecodeError> {
    if k > model.config.max_context {
        return Err(DecodeError::Config(format!(
            "k={k} exceeds model max_context {}",
            model.config.max_context
        )));
    }
    for t in target {
        if tgt_vocab.id(t).is_none() {
            return Err(DecodeError::Vocabulary(t.clone()));
        }
    }
    let mut doc = doc.clone();
    doc.sentences[i].tgt = target.to_vec();
    let batch = build_batch(model.config.arch, &doc, i, k, src_vocab, tgt_vocab, context)?;
    score_batch(model, batch, capture)
}
