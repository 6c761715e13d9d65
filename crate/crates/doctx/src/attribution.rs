//! Input attribution by attention rollout. Each attention site yields a
//! row-stochastic token-to-token contribution matrix; matrix products chain
//! them through the stacks so every generated token gets a distribution over
//! raw input tokens plus the target prefix.

use std::collections::BTreeMap;

use crate::corpus::{Annotation, ParallelCorpus, ParallelDocument, Vocabulary};
use crate::model::{
    build_batch, Architecture, AttnTrace, EncoderTrace, ForwardTrace, Model, ModelError, Segment,
    SequenceBatch, TargetContext,
};

#[derive(Debug, thiserror::Error)]
pub enum AttributionError {
    #[error("attribution configuration: {0}")]
    Config(String),
    #[error("trace mismatch: {0}")]
    Trace(String),
    #[error("numeric degeneracy: {0}")]
    Numeric(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("antecedent coverage: {0}")]
    Coverage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Row-stochastic contribution matrix: entry (i, j) is the share of output
/// position i carried by input position j.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ContributionMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ContributionMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn matmul(a: &ContributionMatrix, b: &ContributionMatrix) -> ContributionMatrix {
    debug_assert_eq!(a.cols, b.rows);
    let mut out = ContributionMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.get(i, k);
            if av == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Head-summed attention-times-value-norm mass, before any residual term.
/// Entry (i, j) is the raw information flow from key j to query i.
fn attention_mass(site: &AttnTrace) -> Result<ContributionMatrix, AttributionError> {
    let (rows, cols) = (site.rows, site.cols);
    let mut raw = ContributionMatrix::zeros(rows, cols);
    for h in 0..site.n_heads {
        for i in 0..rows {
            for j in 0..cols {
                raw.data[i * cols + j] += site.weight(h, i, j) * site.value_norm(h, j);
            }
        }
    }
    if let Some(&bad) = raw.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(AttributionError::Numeric(format!("attention mass entry {bad}")));
    }
    Ok(raw)
}

/// Per-layer contribution of a self-attention site: attention mass plus the
/// query's residual-stream norm on the diagonal, rows renormalized to 1.
pub fn layer_contribution(site: &AttnTrace) -> Result<ContributionMatrix, AttributionError> {
    if site.rows != site.cols {
        return Err(AttributionError::Shape(format!(
            "self-attention site must be square, got {}x{}",
            site.rows, site.cols
        )));
    }
    let mut m = attention_mass(site)?;
    let n = site.rows;
    for i in 0..n {
        m.data[i * n + i] += site.residual_norms[i];
        let row = &mut m.data[i * n..(i + 1) * n];
        let sum: f64 = row.iter().sum();
        if sum.is_nan() || sum <= 0.0 || sum.is_infinite() {
            return Err(AttributionError::Numeric(format!("row {i} sums to {sum}")));
        }
        for v in row {
            *v /= sum;
        }
    }
    Ok(m)
}

/// Cross-attention split: the row-normalized share flowing to each memory
/// position, plus the share retained by the residual path.
fn cross_contribution(
    site: &AttnTrace,
) -> Result<(ContributionMatrix, Vec<f64>), AttributionError> {
    let mut m = attention_mass(site)?;
    let mut residual = Vec::with_capacity(site.rows);
    for i in 0..site.rows {
        let res = site.residual_norms[i];
        let row = &mut m.data[i * site.cols..(i + 1) * site.cols];
        let sum: f64 = row.iter().sum::<f64>() + res;
        if sum.is_nan() || sum <= 0.0 || sum.is_infinite() {
            return Err(AttributionError::Numeric(format!("cross row {i} sums to {sum}")));
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        residual.push(res / sum);
    }
    Ok((m, residual))
}

/// Full-stack encoder contribution: the product of per-layer contribution
/// matrices, first layer rightmost.
pub fn encoder_rollout(trace: &EncoderTrace) -> Result<ContributionMatrix, AttributionError> {
    let Some(first) = trace.layers.first() else {
        return Err(AttributionError::Trace("encoder trace has no layers".into()));
    };
    let n = first.rows;
    let mut c = layer_contribution(first)?;
    for (l, site) in trace.layers.iter().enumerate().skip(1) {
        if site.rows != n || site.cols != n {
            return Err(AttributionError::Trace(format!(
                "encoder layer {l} is {}x{}, expected {n}x{n}",
                site.rows, site.cols
            )));
        }
        c = matmul(&layer_contribution(site)?, &c);
    }
    Ok(c)
}

/// Block-diagonal assembly of per-encoder contributions in memory order
/// [source context, current source, target context]. Off-block entries are
/// exactly zero.
pub fn compose_multi_encoder(
    c_sc: &ContributionMatrix,
    c_s: &ContributionMatrix,
    c_tc: &ContributionMatrix,
) -> Result<ContributionMatrix, AttributionError> {
    for (name, c) in [("source context", c_sc), ("current source", c_s), ("target context", c_tc)]
    {
        if c.rows != c.cols {
            return Err(AttributionError::Shape(format!(
                "{name} block is {}x{}, expected square",
                c.rows, c.cols
            )));
        }
    }
    let sizes = [c_sc.rows, c_s.rows, c_tc.rows];
    let n: usize = sizes.iter().sum();
    let mut out = ContributionMatrix::zeros(n, n);
    let mut offset = 0;
    for block in [c_sc, c_s, c_tc] {
        for i in 0..block.rows {
            for j in 0..block.cols {
                out.data[(offset + i) * n + (offset + j)] = block.get(i, j);
            }
        }
        offset += block.rows;
    }
    Ok(out)
}

/// Rolls the decoder trace onto raw inputs: cross-attention mass is mapped
/// through `c_enc` onto encoder input tokens, the residual path keeps the
/// self-attention mixture of everything accumulated so far, and the result
/// is a T x (memory + T) matrix whose trailing columns are the target prefix.
pub fn decoder_rollout(
    trace: &ForwardTrace,
    c_enc: &ContributionMatrix,
) -> Result<ContributionMatrix, AttributionError> {
    let Some(first) = trace.decoder.first() else {
        return Err(AttributionError::Trace("decoder trace has no layers".into()));
    };
    let t = first.self_attn.rows;
    let m = first.cross_attn.cols;
    if c_enc.rows != m || c_enc.cols != m {
        return Err(AttributionError::Trace(format!(
            "encoder contributions are {}x{}, memory has {m} positions",
            c_enc.rows, c_enc.cols
        )));
    }
    let width = m + t;
    let mut r = ContributionMatrix::zeros(t, width);
    for i in 0..t {
        r.data[i * width + m + i] = 1.0;
    }
    for (l, layer) in trace.decoder.iter().enumerate() {
        let sa = &layer.self_attn;
        let ca = &layer.cross_attn;
        if sa.rows != t || sa.cols != t || ca.rows != t || ca.cols != m {
            return Err(AttributionError::Trace(format!(
                "decoder layer {l} sites are {}x{} and {}x{}, expected {t}x{t} and {t}x{m}",
                sa.rows, sa.cols, ca.rows, ca.cols
            )));
        }
        let c_self = layer_contribution(sa)?;
        let (c_cross, residual) = cross_contribution(ca)?;
        let mixed = matmul(&c_self, &r);
        let mut next = ContributionMatrix::zeros(t, width);
        for (i, &res) in residual.iter().enumerate() {
            let out = &mut next.data[i * width..(i + 1) * width];
            for (o, &s) in out.iter_mut().zip(mixed.row(i)) {
                *o = res * s;
            }
            for j in 0..m {
                let share = c_cross.get(i, j);
                if share == 0.0 {
                    continue;
                }
                for (o, &e) in out[..m].iter_mut().zip(c_enc.row(j)) {
                    *o += share * e;
                }
            }
        }
        r = next;
    }
    Ok(r)
}

/// Per generated token, a distribution over every raw input token. Columns
/// 0..n_memory are the encoder inputs; the rest are target prefix positions.
#[derive(Clone, Debug)]
pub struct AttributionReport {
    pub contributions: ContributionMatrix,
    pub segments: Vec<Segment>,
    pub n_memory: usize,
}

impl AttributionReport {
    /// Share of row `i` carried by columns in segment `seg`. An empty sum
    /// is normalized to +0.0 so formatted shares never print "-0.00".
    pub fn segment_share(&self, i: usize, seg: Segment) -> f64 {
        self.contributions
            .row(i)
            .iter()
            .zip(&self.segments)
            .filter(|(_, &s)| s == seg)
            .map(|(v, _)| v)
            .sum::<f64>()
            + 0.0
    }

    /// Context share of row `i`: source plus target context columns.
    pub fn context_share(&self, i: usize) -> f64 {
        self.segment_share(i, Segment::SourceContext) + self.segment_share(i, Segment::TargetContext)
    }

    /// Current share of row `i`: current source plus target prefix columns.
    pub fn current_share(&self, i: usize) -> f64 {
        self.segment_share(i, Segment::CurrentSource) + self.segment_share(i, Segment::TargetPrefix)
    }
}

/// Rolls a captured forward trace into a per-token attribution report. The
/// encoder side composes block-diagonally when context encoders are present
/// and degenerates to the single encoder otherwise.
pub fn attribution_report(trace: &ForwardTrace) -> Result<AttributionReport, AttributionError> {
    let empty = ContributionMatrix::zeros(0, 0);
    let c_s = encoder_rollout(&trace.encoder)?;
    let c_sc = trace.encoder_sc.as_ref().map(encoder_rollout).transpose()?;
    let c_tc = trace.encoder_tc.as_ref().map(encoder_rollout).transpose()?;
    let c_enc = compose_multi_encoder(
        c_sc.as_ref().unwrap_or(&empty),
        &c_s,
        c_tc.as_ref().unwrap_or(&empty),
    )?;
    if c_enc.rows != trace.encoder_segments.len() {
        return Err(AttributionError::Trace(format!(
            "{} encoder contributions for {} memory positions",
            c_enc.rows,
            trace.encoder_segments.len()
        )));
    }
    let contributions = decoder_rollout(trace, &c_enc)?;
    if contributions.rows != trace.decoder_segments.len() {
        return Err(AttributionError::Trace(format!(
            "{} decoder rows for {} decoder positions",
            contributions.rows,
            trace.decoder_segments.len()
        )));
    }
    let mut segments = trace.encoder_segments.clone();
    segments.extend_from_slice(&trace.decoder_segments);
    Ok(AttributionReport { contributions, segments, n_memory: trace.encoder_segments.len() })
}

/// Attribution percentages at one pronoun's generation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextShare {
    pub antecedent_pct: f64,
    pub context_pct: f64,
    pub current_pct: f64,
}

fn find_span(hay: &[u32], needle: &[u32]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Columns of the first occurrence of `span_ids` inside the half-open column
/// region `[start, end)` of the assembled input, scanning `tokens[start..end]`.
fn first_occurrence_cols(
    tokens: &[u32],
    end: usize,
    span_ids: &[u32],
    col_offset: usize,
) -> Option<std::ops::Range<usize>> {
    let at = find_span(&tokens[..end], span_ids)?;
    let begin = col_offset + at;
    Some(begin..begin + span_ids.len())
}

/// Attribution of the forced reference translation at the step that emits
/// the annotated pronoun, split into antecedent, context, and current
/// percentages. The target side is teacher-forced with gold context.
pub fn supporting_context_share(
    model: &Model,
    doc: &ParallelDocument,
    ann: &Annotation,
    k: usize,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<ContextShare, AttributionError> {
    if k > model.config.max_context {
        return Err(AttributionError::Config(format!(
            "k={k} exceeds model max_context {}",
            model.config.max_context
        )));
    }
    let i = ann.sent_idx;
    if i >= doc.sentences.len() || ann.tok_idx >= doc.sentences[i].tgt.len() {
        return Err(AttributionError::Config(format!(
            "annotation at sentence {i} token {} outside document {}",
            ann.tok_idx, doc.doc_id
        )));
    }
    let Some(ante) = ann.antecedent else {
        return Err(AttributionError::Coverage(format!(
            "annotation at {} sentence {i} has no antecedent span",
            doc.doc_id
        )));
    };

    let batch = build_batch(model.config.arch, doc, i, k, src_vocab, tgt_vocab, TargetContext::Gold)?;
    let fwd = model.forward(&batch, true)?;
    let trace = fwd.trace.as_ref().expect("captured forward carries a trace");
    let report = attribution_report(trace)?;

    let row = batch.layout.scored_output_start() + ann.tok_idx;
    let context_pct = 100.0 * report.context_share(row);
    let current_pct = 100.0 * report.current_share(row);
    if model.config.arch == Architecture::Sentence {
        return Ok(ContextShare { antecedent_pct: 0.0, context_pct, current_pct });
    }

    let ctx_start = i.saturating_sub(k);
    if ante.sent_idx < ctx_start {
        return Err(AttributionError::Coverage(format!(
            "antecedent span {}..{} of sentence {} lies outside the k={k} window of {} sentence {i}",
            ante.tok_start, ante.tok_end, ante.sent_idx, doc.doc_id
        )));
    }
    let src_span = src_vocab.encode(&doc.sentences[ante.sent_idx].src[ante.tok_start..ante.tok_end]);
    let tgt_span = tgt_vocab.encode(&doc.sentences[ante.sent_idx].tgt[ante.tok_start..ante.tok_end]);

    let (src_cols, tgt_cols) = antecedent_columns(&batch, &src_span, &tgt_span, report.n_memory);
    let Some(src_cols) = src_cols else {
        return Err(AttributionError::Coverage(format!(
            "antecedent span {}..{} of sentence {} not found in the assembled source context",
            ante.tok_start, ante.tok_end, ante.sent_idx
        )));
    };

    let r = report.contributions.row(row);
    let mut antecedent: f64 = r[src_cols].iter().sum();
    if let Some(tc) = tgt_cols {
        antecedent += r[tc].iter().sum::<f64>();
    }
    Ok(ContextShare { antecedent_pct: 100.0 * antecedent, context_pct, current_pct })
}

/// First-occurrence antecedent columns on the source-context side and, when
/// present, the target-context side of the assembled input.
fn antecedent_columns(
    batch: &SequenceBatch,
    src_span: &[u32],
    tgt_span: &[u32],
    n_memory: usize,
) -> (Option<std::ops::Range<usize>>, Option<std::ops::Range<usize>>) {
    match batch.arch {
        Architecture::Sentence => (None, None),
        Architecture::Concat2to2 => {
            let src =
                first_occurrence_cols(&batch.src, batch.layout.src_current_start, src_span, 0);
            let tgt = first_occurrence_cols(
                &batch.tgt_input,
                batch.layout.tgt_current_start,
                tgt_span,
                n_memory,
            );
            (src, tgt)
        }
        Architecture::MultiEncoder => {
            let [n_sc, n_s, _] = batch.layout.block_lens;
            let src = first_occurrence_cols(&batch.src_ctx, batch.src_ctx.len(), src_span, 0);
            let tgt =
                first_occurrence_cols(&batch.tgt_ctx, batch.tgt_ctx.len(), tgt_span, n_sc + n_s);
            (src, tgt)
        }
    }
}

/// One corpus pronoun example's shares, keyed for the dump format.
#[derive(Clone, Debug)]
pub struct ShareRow {
    pub example_id: String,
    pub pronoun: String,
    pub share: ContextShare,
}

/// Example-level mean plus per-pronoun-class means over a corpus.
#[derive(Clone, Debug)]
pub struct ShareSummary {
    pub rows: Vec<ShareRow>,
    pub mean: ContextShare,
    pub per_class: BTreeMap<String, ContextShare>,
}

fn mean_share(shares: &[&ContextShare]) -> ContextShare {
    let n = shares.len() as f64;
    ContextShare {
        antecedent_pct: shares.iter().map(|s| s.antecedent_pct).sum::<f64>() / n,
        context_pct: shares.iter().map(|s| s.context_pct).sum::<f64>() / n,
        current_pct: shares.iter().map(|s| s.current_pct).sum::<f64>() / n,
    }
}

/// Supporting-context shares for every target-side pronoun annotation whose
/// antecedent lies within the k-sentence window.
pub fn attribution_summary(
    model: &Model,
    corpus: &ParallelCorpus,
    k: usize,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<ShareSummary, AttributionError> {
    use crate::corpus::{PhenomenonKind, Side};
    let mut rows = Vec::new();
    for doc in &corpus.docs {
        for ann in &doc.annotations {
            if ann.kind != PhenomenonKind::Pronoun || ann.side != Side::Target {
                continue;
            }
            let Some(d) = ann.distance() else { continue };
            if d == 0 || d > k {
                continue;
            }
            let share = supporting_context_share(model, doc, ann, k, src_vocab, tgt_vocab)?;
            rows.push(ShareRow {
                example_id: format!("{}.s{}.t{}", doc.doc_id, ann.sent_idx, ann.tok_idx),
                pronoun: doc.sentences[ann.sent_idx].tgt[ann.tok_idx].clone(),
                share,
            });
        }
    }
    if rows.is_empty() {
        return Err(AttributionError::Config(
            "no pronoun annotation with an in-window antecedent".into(),
        ));
    }
    let mean = mean_share(&rows.iter().map(|r| &r.share).collect::<Vec<_>>());
    let mut by_class: BTreeMap<String, Vec<&ContextShare>> = BTreeMap::new();
    for r in &rows {
        by_class.entry(r.pronoun.clone()).or_default().push(&r.share);
    }
    let per_class = by_class.into_iter().map(|(p, s)| (p, mean_share(&s))).collect();
    Ok(ShareSummary { rows, mean, per_class })
}

/// Dump line: `example_id TAB antecedent TAB context TAB current`, two
/// decimals each.
pub fn attribution_line(example_id: &str, share: &ContextShare) -> String {
    format!(
        "{example_id}\t{:.2}\t{:.2}\t{:.2}",
        share.antecedent_pct, share.context_pct, share.current_pct
    )
}

/// Sidecar dump of the full per-token matrix: a segment header line, then
/// one line per generated position with six-decimal shares.
pub fn report_matrix_lines(report: &AttributionReport) -> String {
    let code = |s: &Segment| match s {
        Segment::SourceContext => "S",
        Segment::CurrentSource => "C",
        Segment::TargetContext => "T",
        Segment::TargetPrefix => "P",
    };
    let mut out = String::from("#segments");
    for s in &report.segments {
        out.push('\t');
        out.push_str(code(s));
    }
    out.push('\n');
    for i in 0..report.contributions.rows {
        out.push_str(&format!("{i}"));
        for v in report.contributions.row(i) {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}
