use super::params::{Model, ParamLeaves};
use super::trace::{AttnTrace, DecoderLayerTrace, EncoderTrace, ForwardTrace, Segment};
use super::{Architecture, ModelError, SequenceBatch};
use crate::corpus::PAD;
use crate::numerics::{Tape, Tensor};
use crate::rng::Prng;

/// Additive mask value. Finite so a fully-masked row still softmaxes to a
/// stochastic vector instead of NaN; exp(-1e30 shifted) underflows to exactly
/// zero, which keeps padded runs bit-identical to unpadded ones.
const MASK: f64 = -1e30;

pub struct Forward {
    /// Row-major logits, one row per decoder position.
    pub logits: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub trace: Option<ForwardTrace>,
}

impl Forward {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.cols..(i + 1) * self.cols]
    }
}

/// Concatenated encoder states of a multi_encoder forward.
pub struct EncodeMulti {
    /// Row-major states, `boundaries[2]` rows of d_model columns.
    pub states: Vec<f64>,
    pub d_model: usize,
    /// Cumulative block ends [src_ctx, src, tgt_ctx].
    pub boundaries: [usize; 3],
}

fn sinusoidal(rows: usize, d: usize) -> Vec<f64> {
    let mut data = vec![0.0; rows * d];
    for p in 0..rows {
        for i in 0..d / 2 {
            let angle = p as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            data[p * d + 2 * i] = angle.sin();
            data[p * d + 2 * i + 1] = angle.cos();
        }
    }
    data
}

fn dropout(tape: &mut Tape, x: Tensor, p: f64, rng: &mut Option<&mut Prng>) -> Tensor {
    let Some(r) = rng else { return x };
    if p == 0.0 {
        return x;
    }
    let shape = tape.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..n).map(|_| if r.uniform() < p { 0.0 } else { keep }).collect();
    let mask = tape.constant(mask, &shape);
    tape.mul(x, mask)
}

/// 0 / MASK matrix for one attention site, or None when nothing is masked.
fn build_mask(t_q: usize, key_ids: &[u32], causal: bool) -> Option<Vec<f64>> {
    let t_k = key_ids.len();
    let any_pad = key_ids.contains(&PAD);
    if !causal && !any_pad {
        return None;
    }
    let mut m = vec![0.0; t_q * t_k];
    for (i, row) in m.chunks_mut(t_k).enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if (causal && j > i) || key_ids[j] == PAD {
                *cell = MASK;
            }
        }
    }
    Some(m)
}

fn row_norms(values: &[f64], cols: usize) -> Vec<f64> {
    values.chunks(cols).map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

struct Stack<'a, 'b> {
    tape: &'a mut Tape,
    leaves: &'b ParamLeaves,
    n_heads: usize,
    d_model: usize,
    p_drop: f64,
    rng: Option<&'a mut Prng>,
    capture: bool,
}

impl Stack<'_, '_> {
    /// Multi-head attention followed by the post-LN residual merge.
    /// `prefix` names the projection block, `ln` the following norm.
    fn attn_sublayer(
        &mut self,
        prefix: &str,
        ln: &str,
        x_q: Tensor,
        x_kv: Tensor,
        mask: Option<&[f64]>,
    ) -> (Tensor, Option<AttnTrace>) {
        let tape = &mut *self.tape;
        let q = {
            let w = self.leaves.get(&format!("{prefix}.wq"));
            let b = self.leaves.get(&format!("{prefix}.bq"));
            let m = tape.matmul(x_q, w).expect("projection shape");
            tape.add_bias(m, b)
        };
        let k = {
            let w = self.leaves.get(&format!("{prefix}.wk"));
            let b = self.leaves.get(&format!("{prefix}.bk"));
            let m = tape.matmul(x_kv, w).expect("projection shape");
            tape.add_bias(m, b)
        };
        let v = {
            let w = self.leaves.get(&format!("{prefix}.wv"));
            let b = self.leaves.get(&format!("{prefix}.bv"));
            let m = tape.matmul(x_kv, w).expect("projection shape");
            tape.add_bias(m, b)
        };

        let t_q = tape.shape(x_q)[0];
        let t_k = tape.shape(x_kv)[0];
        let dh = self.d_model / self.n_heads;
        let mask_t = mask.map(|m| tape.constant(m.to_vec(), &[t_q, t_k]));

        let mut heads = Vec::with_capacity(self.n_heads);
        let mut trace = self.capture.then(|| AttnTrace {
            n_heads: self.n_heads,
            rows: t_q,
            cols: t_k,
            weights: Vec::with_capacity(self.n_heads * t_q * t_k),
            value_norms: Vec::with_capacity(self.n_heads * t_k),
            residual_norms: row_norms(tape.value(x_q), self.d_model),
        });
        for h in 0..self.n_heads {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let scores = tape.matmul_nt(qh, kh).expect("head shape");
            let mut scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
            if let Some(m) = mask_t {
                scores = tape.add(scores, m);
            }
            let attn = tape.softmax_rows(scores);
            if let Some(tr) = trace.as_mut() {
                tr.weights.extend_from_slice(tape.value(attn));
                tr.value_norms.extend(row_norms(tape.value(vh), dh));
            }
            let attn = dropout(tape, attn, self.p_drop, &mut self.rng);
            heads.push(tape.matmul(attn, vh).expect("head shape"));
        }
        let merged = tape.concat_cols(&heads);
        let wo = self.leaves.get(&format!("{prefix}.wo"));
        let bo = self.leaves.get(&format!("{prefix}.bo"));
        let out = tape.matmul(merged, wo).expect("projection shape");
        let out = tape.add_bias(out, bo);
        let out = dropout(tape, out, self.p_drop, &mut self.rng);
        let sum = tape.add(x_q, out);
        (self.layer_norm(ln, sum), trace)
    }

    fn layer_norm(&mut self, ln: &str, x: Tensor) -> Tensor {
        let g = self.leaves.get(&format!("{ln}.g"));
        let b = self.leaves.get(&format!("{ln}.b"));
        self.tape.layer_norm(x, g, b, 1e-6)
    }

    fn ffn_sublayer(&mut self, base: &str, ln: &str, x: Tensor) -> Tensor {
        let tape = &mut *self.tape;
        let w1 = self.leaves.get(&format!("{base}.ffn.w1"));
        let b1 = self.leaves.get(&format!("{base}.ffn.b1"));
        let w2 = self.leaves.get(&format!("{base}.ffn.w2"));
        let b2 = self.leaves.get(&format!("{base}.ffn.b2"));
        let h = tape.matmul(x, w1).expect("ffn shape");
        let h = tape.add_bias(h, b1);
        let h = tape.relu(h);
        let h = tape.matmul(h, w2).expect("ffn shape");
        let h = tape.add_bias(h, b2);
        let h = dropout(tape, h, self.p_drop, &mut self.rng);
        let sum = tape.add(x, h);
        self.layer_norm(ln, sum)
    }

    /// Token embedding scaled by sqrt(d) plus positions restarting at 0.
    fn embed_sequence(&mut self, table: &str, ids: &[u32]) -> Tensor {
        let tape = &mut *self.tape;
        let t = self.leaves.get(table);
        let e = tape.embed(t, ids);
        let e = tape.scale(e, (self.d_model as f64).sqrt());
        let pos = tape.constant(sinusoidal(ids.len(), self.d_model), &[ids.len(), self.d_model]);
        let e = tape.add(e, pos);
        dropout(tape, e, self.p_drop, &mut self.rng)
    }

    fn run_encoder(
        &mut self,
        enc: &str,
        table: &str,
        ids: &[u32],
        n_layers: usize,
    ) -> (Tensor, Option<EncoderTrace>) {
        let mut x = self.embed_sequence(table, ids);
        let mask = build_mask(ids.len(), ids, false);
        let mut layers = Vec::new();
        for l in 0..n_layers {
            let base = format!("{enc}.l{l}");
            let (y, tr) = self.attn_sublayer(&format!("{base}.attn"), &format!("{base}.ln1"), x, x, mask.as_deref());
            if let Some(tr) = tr {
                layers.push(tr);
            }
            x = self.ffn_sublayer(&base, &format!("{base}.ln2"), y);
        }
        (x, self.capture.then_some(EncoderTrace { layers }))
    }

    fn run_decoder(
        &mut self,
        ids: &[u32],
        memory: Tensor,
        memory_ids: &[u32],
        n_layers: usize,
    ) -> (Tensor, Vec<DecoderLayerTrace>) {
        let mut x = self.embed_sequence("tgt_embed", ids);
        let self_mask = build_mask(ids.len(), ids, true);
        let cross_mask = build_mask(ids.len(), memory_ids, false);
        let mut traces = Vec::new();
        for l in 0..n_layers {
            let base = format!("dec.l{l}");
            let (y, tr_self) =
                self.attn_sublayer(&format!("{base}.self"), &format!("{base}.ln1"), x, x, self_mask.as_deref());
            let (z, tr_cross) = self.attn_sublayer(
                &format!("{base}.cross"),
                &format!("{base}.ln2"),
                y,
                memory,
                cross_mask.as_deref(),
            );
            if let (Some(s), Some(c)) = (tr_self, tr_cross) {
                traces.push(DecoderLayerTrace { self_attn: s, cross_attn: c });
            }
            x = self.ffn_sublayer(&base, &format!("{base}.ln3"), z);
        }
        (x, traces)
    }
}

fn check_suffix_pads(name: &str, ids: &[u32]) -> Result<(), ModelError> {
    if ids.first() == Some(&PAD) {
        return Err(ModelError::Batch(format!("{name} starts with a pad token")));
    }
    let first_pad = ids.iter().position(|&t| t == PAD).unwrap_or(ids.len());
    if ids[first_pad..].iter().any(|&t| t != PAD) {
        return Err(ModelError::Batch(format!("{name} has a pad before a non-pad token")));
    }
    Ok(())
}

fn check_ids(name: &str, ids: &[u32], vocab: usize) -> Result<(), ModelError> {
    if let Some(&bad) = ids.iter().find(|&&t| t as usize >= vocab) {
        return Err(ModelError::Batch(format!("{name} id {bad} outside vocabulary of {vocab}")));
    }
    Ok(())
}

impl Model {
    fn validate_batch(&self, batch: &SequenceBatch) -> Result<(), ModelError> {
        let c = &self.config;
        if batch.arch != c.arch {
            return Err(ModelError::Architecture(format!(
                "batch built for {} fed to a {} model",
                batch.arch.as_str(),
                c.arch.as_str()
            )));
        }
        if c.arch != Architecture::MultiEncoder
            && (!batch.src_ctx.is_empty() || !batch.tgt_ctx.is_empty())
        {
            return Err(ModelError::Architecture(format!(
                "{} batches must not carry context blocks",
                c.arch.as_str()
            )));
        }
        if batch.src.is_empty() || batch.tgt_input.is_empty() {
            return Err(ModelError::Batch("empty source or target".into()));
        }
        for (name, seq) in [
            ("src", &batch.src),
            ("src_ctx", &batch.src_ctx),
            ("tgt_ctx", &batch.tgt_ctx),
            ("tgt_input", &batch.tgt_input),
        ] {
            if seq.len() > c.max_positions {
                return Err(ModelError::Length { len: seq.len(), max: c.max_positions });
            }
            check_suffix_pads(name, seq)?;
        }
        check_ids("src", &batch.src, c.src_vocab)?;
        check_ids("src_ctx", &batch.src_ctx, c.src_vocab)?;
        check_ids("tgt_ctx", &batch.tgt_ctx, c.tgt_vocab)?;
        check_ids("tgt_input", &batch.tgt_input, c.tgt_vocab)?;
        if batch.tgt_output.len() != batch.tgt_input.len() {
            return Err(ModelError::Batch("tgt_output length differs from tgt_input".into()));
        }
        Ok(())
    }

    /// Teacher-forced forward on a caller-owned tape. Returns the logits
    /// tensor so callers can build losses on top. `capture` collects the
    /// attribution trace; it reads values already on the tape and records
    /// nothing, so captured and uncaptured runs produce identical logits.
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        batch: &SequenceBatch,
        dropout_rng: Option<&mut Prng>,
        capture: bool,
    ) -> Result<(Tensor, Option<ForwardTrace>), ModelError> {
        self.validate_batch(batch)?;
        let c = &self.config;
        let mut stack = Stack {
            tape,
            leaves,
            n_heads: c.n_heads,
            d_model: c.d_model,
            p_drop: c.dropout,
            rng: dropout_rng,
            capture,
        };

        let mut enc_sc_trace = None;
        let mut enc_tc_trace = None;
        let (memory, memory_ids, enc_trace, enc_segments) = match c.arch {
            Architecture::Sentence | Architecture::Concat2to2 => {
                let (e, tr) = stack.run_encoder("enc", "src_embed", &batch.src, c.n_layers);
                let segs = (0..batch.src.len())
                    .map(|j| {
                        if j < batch.layout.src_current_start {
                            Segment::SourceContext
                        } else {
                            Segment::CurrentSource
                        }
                    })
                    .collect();
                (e, batch.src.clone(), tr, segs)
            }
            Architecture::MultiEncoder => {
                let mut parts = Vec::new();
                let mut ids = Vec::new();
                let mut segs = Vec::new();
                if !batch.src_ctx.is_empty() {
                    let table = self.encoder_embed_name("enc_sc");
                    let (e, tr) = stack.run_encoder("enc_sc", table, &batch.src_ctx, c.n_layers);
                    parts.push(e);
                    ids.extend_from_slice(&batch.src_ctx);
                    segs.extend(std::iter::repeat_n(Segment::SourceContext, batch.src_ctx.len()));
                    enc_sc_trace = tr;
                }
                let (e_s, tr) = stack.run_encoder("enc", "src_embed", &batch.src, c.n_layers);
                parts.push(e_s);
                ids.extend_from_slice(&batch.src);
                segs.extend(std::iter::repeat_n(Segment::CurrentSource, batch.src.len()));
                let enc_trace = tr;
                if !batch.tgt_ctx.is_empty() {
                    let table = self.encoder_embed_name("enc_tc");
                    let (e, tr) = stack.run_encoder("enc_tc", table, &batch.tgt_ctx, c.n_layers);
                    parts.push(e);
                    ids.extend_from_slice(&batch.tgt_ctx);
                    segs.extend(std::iter::repeat_n(Segment::TargetContext, batch.tgt_ctx.len()));
                    enc_tc_trace = tr;
                }
                let memory =
                    if parts.len() == 1 { parts[0] } else { stack.tape.concat_rows(&parts) };
                (memory, ids, enc_trace, segs)
            }
        };

        let (dec_out, dec_traces) =
            stack.run_decoder(&batch.tgt_input, memory, &memory_ids, c.n_layers);
        let out_proj = leaves.get("out_proj");
        let out_bias = leaves.get("out_bias");
        let logits = stack.tape.matmul(dec_out, out_proj).expect("output shape");
        let logits = stack.tape.add_bias(logits, out_bias);

        let trace = if capture {
            let decoder_segments = (0..batch.tgt_input.len())
                .map(|j| {
                    if j < batch.layout.tgt_current_start {
                        Segment::TargetContext
                    } else {
                        Segment::TargetPrefix
                    }
                })
                .collect();
            Some(ForwardTrace {
                encoder: enc_trace.expect("capture produced no encoder trace"),
                encoder_sc: enc_sc_trace,
                encoder_tc: enc_tc_trace,
                decoder: dec_traces,
                encoder_segments: enc_segments,
                decoder_segments,
            })
        } else {
            None
        };
        Ok((logits, trace))
    }

    /// Evaluation-mode forward on a fresh tape: no dropout, values copied out.
    pub fn forward(&self, batch: &SequenceBatch, capture: bool) -> Result<Forward, ModelError> {
        let mut tape = Tape::new();
        let leaves = self.inject(&mut tape);
        let (logits, trace) = self.forward_on(&mut tape, &leaves, batch, None, capture)?;
        let shape = tape.shape(logits);
        let (rows, cols) = (shape[0], shape[1]);
        Ok(Forward { logits: tape.value(logits).to_vec(), rows, cols, trace })
    }

    /// Runs the three multi_encoder stacks and concatenates their states.
    /// Empty context blocks contribute zero rows, so with both contexts empty
    /// the result is exactly the current-source encoding.
    pub fn encode_multi(
        &self,
        src_ctx: &[u32],
        src: &[u32],
        tgt_ctx: &[u32],
    ) -> Result<EncodeMulti, ModelError> {
        if self.config.arch != Architecture::MultiEncoder {
            return Err(ModelError::Architecture(format!(
                "encode_multi requires multi_encoder, got {}",
                self.config.arch.as_str()
            )));
        }
        if src.is_empty() {
            return Err(ModelError::Batch("empty source".into()));
        }
        for (name, seq, vocab) in [
            ("src_ctx", src_ctx, self.config.src_vocab),
            ("src", src, self.config.src_vocab),
            ("tgt_ctx", tgt_ctx, self.config.tgt_vocab),
        ] {
            if seq.len() > self.config.max_positions {
                return Err(ModelError::Length { len: seq.len(), max: self.config.max_positions });
            }
            check_ids(name, seq, vocab)?;
            check_suffix_pads(name, seq)?;
        }

        let mut tape = Tape::new();
        let leaves = self.inject(&mut tape);
        let mut stack = Stack {
            tape: &mut tape,
            leaves: &leaves,
            n_heads: self.config.n_heads,
            d_model: self.config.d_model,
            p_drop: self.config.dropout,
            rng: None,
            capture: false,
        };
        let mut states = Vec::new();
        if !src_ctx.is_empty() {
            let table = self.encoder_embed_name("enc_sc");
            let (e, _) = stack.run_encoder("enc_sc", table, src_ctx, self.config.n_layers);
            states.extend_from_slice(stack.tape.value(e));
        }
        let (e, _) = stack.run_encoder("enc", "src_embed", src, self.config.n_layers);
        states.extend_from_slice(stack.tape.value(e));
        if !tgt_ctx.is_empty() {
            let table = self.encoder_embed_name("enc_tc");
            let (e, _) = stack.run_encoder("enc_tc", table, tgt_ctx, self.config.n_layers);
            states.extend_from_slice(stack.tape.value(e));
        }
        let boundaries = [
            src_ctx.len(),
            src_ctx.len() + src.len(),
            src_ctx.len() + src.len() + tgt_ctx.len(),
        ];
        Ok(EncodeMulti { states, d_model: self.config.d_model, boundaries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, ParallelCorpus, ParallelDocument, SentencePair, Side, Vocabulary};
    use crate::model::{build_batch, ModelConfig, TargetContext};
    use crate::numerics::gradient_check_with;
    use std::collections::BTreeMap;

    fn doc() -> ParallelDocument {
        let mk = |src: &str, tgt: &str| SentencePair {
            src: src.split_whitespace().map(String::from).collect(),
            tgt: tgt.split_whitespace().map(String::from).collect(),
        };
        ParallelDocument {
            doc_id: "d0".into(),
            sentences: vec![
                mk("n1 v1 a1 .", "m1 w1 b1 ."),
                mk("n2 v2 a2 .", "m2 w2 b2 ."),
                mk("it v1 a2 .", "er w1 b2 ."),
            ],
            annotations: Vec::new(),
        }
    }

    fn vocabs() -> (Vocabulary, Vocabulary) {
        let corpus = ParallelCorpus { docs: vec![doc()] };
        (build_vocab(&corpus, Side::Source).unwrap(), build_vocab(&corpus, Side::Target).unwrap())
    }

    fn small(arch: Architecture, sv: usize, tv: usize) -> ModelConfig {
        let mut c = ModelConfig::desk(arch, sv, tv);
        c.n_layers = 1;
        c.d_model = 8;
        c.n_heads = 2;
        c.d_ffn = 16;
        c
    }

    fn batch_for(arch: Architecture, i: usize, k: usize) -> (SequenceBatch, Model) {
        let (sv, tv) = vocabs();
        let b = build_batch(arch, &doc(), i, k, &sv, &tv, TargetContext::Gold).unwrap();
        let m = Model::new(small(arch, sv.len(), tv.len()), 5).unwrap();
        (b, m)
    }

    fn bits(xs: &[f64]) -> Vec<u64> {
        xs.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn logits_cover_every_decoder_position() {
        let (b, m) = batch_for(Architecture::Sentence, 2, 0);
        let f = m.forward(&b, false).unwrap();
        assert_eq!(f.rows, b.tgt_input.len());
        assert_eq!(f.cols, m.config.tgt_vocab);
        assert!(f.logits.iter().all(|x| x.is_finite()));
        assert!(f.trace.is_none());
    }

    #[test]
    fn capture_never_changes_the_logits() {
        for (arch, k) in [
            (Architecture::Sentence, 0),
            (Architecture::Concat2to2, 2),
            (Architecture::MultiEncoder, 2),
        ] {
            let (b, m) = batch_for(arch, 2, k);
            let plain = m.forward(&b, false).unwrap();
            let traced = m.forward(&b, true).unwrap();
            assert_eq!(bits(&plain.logits), bits(&traced.logits), "{arch:?}");
            let tr = traced.trace.expect("trace requested");
            assert_eq!(tr.decoder.len(), m.config.n_layers);
            assert_eq!(tr.encoder_segments.len(), tr.decoder[0].cross_attn.cols);
            assert_eq!(tr.decoder_segments.len(), b.tgt_input.len());
        }
    }

    #[test]
    fn attention_rows_are_stochastic() {
        let (b, m) = batch_for(Architecture::Concat2to2, 2, 2);
        let tr = m.forward(&b, true).unwrap().trace.unwrap();
        let mut sites: Vec<&AttnTrace> = tr.encoder.layers.iter().collect();
        for l in &tr.decoder {
            sites.push(&l.self_attn);
            sites.push(&l.cross_attn);
        }
        for site in sites {
            assert_eq!(site.weights.len(), site.n_heads * site.rows * site.cols);
            assert_eq!(site.value_norms.len(), site.n_heads * site.cols);
            assert_eq!(site.residual_norms.len(), site.rows);
            for h in 0..site.n_heads {
                for i in 0..site.rows {
                    let s: f64 = (0..site.cols).map(|j| site.weight(h, i, j)).sum();
                    assert!((s - 1.0).abs() < 1e-9, "row sum {s}");
                }
            }
        }
    }

    #[test]
    fn decoder_self_attention_is_causal() {
        let (b, m) = batch_for(Architecture::Concat2to2, 2, 1);
        let base = m.forward(&b, false).unwrap();
        let p = 6;
        let mut changed = b.clone();
        changed.tgt_input[p] = if b.tgt_input[p] == 5 { 6 } else { 5 };
        let after = m.forward(&changed, false).unwrap();
        let cols = base.cols;
        assert_eq!(
            bits(&base.logits[..p * cols]),
            bits(&after.logits[..p * cols]),
            "positions before the edit must not move"
        );
        assert_ne!(bits(base.row(p)), bits(after.row(p)));
    }

    #[test]
    fn pad_suffix_never_changes_live_positions() {
        for arch in [Architecture::Sentence, Architecture::Concat2to2, Architecture::MultiEncoder]
        {
            let (b, m) = batch_for(arch, 2, 1);
            let base = m.forward(&b, false).unwrap();
            let mut padded = b.clone();
            padded.src.extend([PAD; 3]);
            padded.tgt_input.extend([PAD; 2]);
            padded.tgt_output.extend([PAD; 2]);
            if arch == Architecture::MultiEncoder {
                padded.src_ctx.extend([PAD; 2]);
                padded.tgt_ctx.extend([PAD; 1]);
            }
            let out = m.forward(&padded, false).unwrap();
            assert_eq!(out.rows, b.tgt_input.len() + 2);
            let live = b.tgt_input.len() * base.cols;
            assert_eq!(bits(&base.logits), bits(&out.logits[..live]), "{arch:?}");
        }
    }

    #[test]
    fn multi_encoder_blocks_are_independent() {
        let (sv, tv) = vocabs();
        let m = Model::new(small(Architecture::MultiEncoder, sv.len(), tv.len()), 9).unwrap();
        let b = build_batch(Architecture::MultiEncoder, &doc(), 2, 2, &sv, &tv, TargetContext::Gold)
            .unwrap();
        let full = m.encode_multi(&b.src_ctx, &b.src, &b.tgt_ctx).unwrap();
        assert_eq!(full.boundaries, [10, 15, 25]);
        assert_eq!(full.states.len(), 25 * m.config.d_model);

        let mut other_ctx = b.src_ctx.clone();
        other_ctx.swap(0, 2);
        let swapped = m.encode_multi(&other_ctx, &b.src, &[]).unwrap();
        let d = m.config.d_model;
        let cur = |e: &EncodeMulti| {
            bits(&e.states[e.boundaries[0] * d..e.boundaries[1] * d])
        };
        assert_eq!(cur(&full), cur(&swapped), "current block must ignore context blocks");

        let alone = m.encode_multi(&[], &b.src, &[]).unwrap();
        assert_eq!(alone.boundaries, [0, 5, 5]);
        assert_eq!(bits(&alone.states), cur(&full), "empty contexts leave only the current block");
    }

    #[test]
    fn zeroed_context_embeddings_erase_context_identity() {
        let (sv, tv) = vocabs();
        let mut cfg = small(Architecture::MultiEncoder, sv.len(), tv.len());
        cfg.tied_context_embeddings = false;
        let mut m = Model::new(cfg, 13).unwrap();
        let a = build_batch(Architecture::MultiEncoder, &doc(), 2, 1, &sv, &tv, TargetContext::Gold)
            .unwrap();
        let flip = |t: &mut u32| *t = if *t == 5 { 6 } else { 5 };
        let mut b = a.clone();
        flip(&mut b.src_ctx[0]);
        flip(&mut b.tgt_ctx[1]);

        let la = m.forward(&a, false).unwrap().logits;
        let lb = m.forward(&b, false).unwrap().logits;
        assert_ne!(bits(&la), bits(&lb), "live context embeddings must carry identity");

        for name in ["enc_sc.embed", "enc_tc.embed"] {
            m.param_mut(name).data.fill(0.0);
        }
        let za = m.forward(&a, false).unwrap().logits;
        let zb = m.forward(&b, false).unwrap().logits;
        assert_eq!(bits(&za), bits(&zb), "zeroed embeddings admit no path for context identity");

        let no_ctx =
            build_batch(Architecture::MultiEncoder, &doc(), 2, 0, &sv, &tv, TargetContext::Gold)
                .unwrap();
        let zn = m.forward(&no_ctx, false).unwrap().logits;
        assert_ne!(
            bits(&za),
            bits(&zn),
            "zeroed blocks still reach the decoder through cross-attention mass"
        );
    }

    #[test]
    fn batch_validation_rejects_mismatches() {
        let (b_multi, _) = batch_for(Architecture::MultiEncoder, 2, 1);
        let (b_sent, m_sent) = batch_for(Architecture::Sentence, 2, 0);
        assert!(matches!(
            m_sent.forward(&b_multi, false),
            Err(ModelError::Architecture(_))
        ));

        let mut smuggled = b_sent.clone();
        smuggled.arch = Architecture::MultiEncoder;
        let (_, m_multi) = batch_for(Architecture::MultiEncoder, 2, 1);
        let mut with_ctx = b_sent.clone();
        with_ctx.src_ctx = vec![5, 6];
        assert!(matches!(m_sent.forward(&with_ctx, false), Err(ModelError::Architecture(_))));
        drop(smuggled);
        drop(m_multi);

        let mut long = b_sent.clone();
        long.src = vec![5; m_sent.config.max_positions + 1];
        assert!(matches!(m_sent.forward(&long, false), Err(ModelError::Length { .. })));

        let mut inner_pad = b_sent.clone();
        inner_pad.src.insert(0, PAD);
        assert!(matches!(m_sent.forward(&inner_pad, false), Err(ModelError::Batch(_))));

        let mut oob = b_sent.clone();
        oob.src[0] = m_sent.config.src_vocab as u32;
        assert!(matches!(m_sent.forward(&oob, false), Err(ModelError::Batch(_))));

        assert!(matches!(
            m_sent.encode_multi(&[], &b_sent.src, &[]),
            Err(ModelError::Architecture(_))
        ));
    }

    #[test]
    fn dropout_is_seeded_and_off_at_eval() {
        let (b, m) = batch_for(Architecture::Concat2to2, 2, 1);
        let run = |seed: Option<u64>| {
            let mut tape = Tape::new();
            let leaves = m.inject(&mut tape);
            let mut rng = seed.map(|s| Prng::new(s).fork("dropout"));
            let (t, _) = m.forward_on(&mut tape, &leaves, &b, rng.as_mut(), false).unwrap();
            tape.value(t).to_vec()
        };
        assert_eq!(bits(&run(Some(3))), bits(&run(Some(3))), "same seed, same masks");
        assert_ne!(bits(&run(Some(3))), bits(&run(Some(4))), "different seed, different masks");
        assert_ne!(bits(&run(Some(3))), bits(&run(None)), "training noise absent at eval");
        assert_eq!(bits(&run(None)), bits(&m.forward(&b, false).unwrap().logits));
    }

    fn check_model_gradients(arch: Architecture, k: usize, untied: bool) {
        let (sv, tv) = vocabs();
        let mut cfg = small(arch, sv.len(), tv.len());
        cfg.tied_context_embeddings = !untied;
        let model = Model::new(cfg, 17).unwrap();
        let batch =
            build_batch(arch, &doc(), 2, k, &sv, &tv, TargetContext::Gold).unwrap();

        let names: Vec<String> = model.params.keys().cloned().collect();
        let shapes: Vec<Vec<usize>> = model.params.values().map(|p| p.shape.clone()).collect();
        let inputs: Vec<Vec<f64>> = model.params.values().map(|p| p.data.clone()).collect();
        // Difference quotients on a loss of order 1 carry ~1e-11 of rounding
        // noise at h = 1e-5; below that, agreement is exact for our purposes.
        let report = gradient_check_with(&inputs, &shapes, 1e-5, 1e-9, |tape, xs| {
            let mut leaves = BTreeMap::new();
            let mut tensors = Vec::new();
            for ((name, shape), x) in names.iter().zip(&shapes).zip(xs) {
                let t = tape.param(x, shape);
                leaves.insert(name.clone(), t);
                tensors.push(t);
            }
            let leaves = ParamLeaves(leaves);
            let (logits, _) = model
                .forward_on(tape, &leaves, &batch, None, false)
                .expect("forward in gradient check");
            let loss = tape.cross_entropy(logits, &batch.tgt_output, 0.1, PAD)?;
            Ok((loss, tensors))
        })
        .unwrap();
        assert_eq!(report.checked, model.n_params());
        assert!(
            report.passes(1e-4),
            "{arch:?}: max rel err {} (analytic {}, numeric {})",
            report.max_rel_err,
            report.analytic,
            report.numeric
        );
    }

    #[test]
    fn gradients_match_finite_differences_concat() {
        check_model_gradients(Architecture::Concat2to2, 1, false);
    }

    #[test]
    fn gradients_match_finite_differences_multi() {
        check_model_gradients(Architecture::MultiEncoder, 1, true);
    }
}
