//! Full evaluation of one checkpoint: BLEU, perplexity, contrastive
//! accuracy, and phenomena F1, each at the requested context width and at
//! zero context where the comparison is meaningful.

use super::{arch_label, load_model, translate_corpus, DataDir};
use crate::manifest;
use crate::settings::Settings;
use anyhow::{bail, Context, Result};
use doctx::corpus::{load_contrastive, ParallelCorpus, Side};
use doctx::decoding::ContextMode;
use doctx::metrics::{bleu, contrastive_accuracy, metric_line, perplexity, phenomena_f1};
use doctx::tagger::{tag_sentences, PhenomenonTag};
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] =
    &[("seed", "1"), ("k", "5"), ("beam", "4"), ("split", "test")];

/// Tags each document independently so noun tracking never crosses a
/// document boundary, then shifts indices into the flat sentence numbering.
fn tag_by_doc(sentences: &[Vec<String>], doc_lens: &[usize], side: Side) -> Vec<PhenomenonTag> {
    let mut tags = Vec::new();
    let mut offset = 0;
    for &n in doc_lens {
        for mut tag in tag_sentences(&sentences[offset..offset + n], side) {
            tag.sent_idx += offset;
            tags.push(tag);
        }
        offset += n;
    }
    tags
}

fn flat_targets(corpus: &ParallelCorpus) -> Vec<Vec<String>> {
    corpus
        .docs
        .iter()
        .flat_map(|d| d.sentences.iter().map(|p| p.side(Side::Target).to_vec()))
        .collect()
}

pub fn run(
    s: &Settings,
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    configs: &[PathBuf],
) -> Result<()> {
    let model = load_model(checkpoint)?;
    let k = s.usize("k")?;
    if k > model.config.max_context {
        bail!("k={k} exceeds the checkpoint's max_context {}", model.config.max_context);
    }
    let dir = DataDir::new(data);
    let split = s.str("split");
    let corpus = dir.load_split(split)?;
    let (sv, tv) = dir.load_vocabs()?;
    let label = arch_label(model.config.arch);
    let at_k = format!("{label}.k{k}");
    let at_0 = format!("{label}.k0");

    let docs = translate_corpus(
        &model,
        &corpus,
        k,
        s.usize("beam")?,
        ContextMode::Correct,
        s.u64("seed")?,
        &sv,
        &tv,
    )?;
    let hyps: Vec<Vec<String>> = docs.into_iter().flatten().collect();
    let refs = flat_targets(&corpus);

    let mut lines = Vec::new();
    lines.push(metric_line("bleu", &at_k, bleu(&hyps, &refs)?));
    lines.push(metric_line("perplexity", &at_k, perplexity(&model, &corpus, k, &sv, &tv)?));
    lines.push(metric_line("perplexity", &at_0, perplexity(&model, &corpus, 0, &sv, &tv)?));

    // A phenomena-sparse corpus has no contrastive examples; the accuracy
    // rows are simply absent then.
    let contrastive_path = dir.contrastive();
    if contrastive_path.exists() {
        let examples = load_contrastive(&contrastive_path)
            .with_context(|| format!("loading {}", contrastive_path.display()))?;
        if !examples.is_empty() {
            let acc_k = contrastive_accuracy(&model, &examples, k, &sv, &tv)?;
            let acc_0 = contrastive_accuracy(&model, &examples, 0, &sv, &tv)?;
            lines.push(metric_line("contrastive_accuracy", &at_k, 100.0 * acc_k));
            lines.push(metric_line("contrastive_accuracy", &at_0, 100.0 * acc_0));
        }
    }

    let doc_lens: Vec<usize> = corpus.docs.iter().map(|d| d.sentences.len()).collect();
    let ref_tags = tag_by_doc(&refs, &doc_lens, Side::Target);
    let lens = doc_lens.clone();
    let f1 = phenomena_f1(&refs, &ref_tags, &hyps, move |h| tag_by_doc(h, &lens, Side::Target))?;
    for (kind, value) in &f1 {
        lines.push(metric_line(&format!("f1.{}", kind.as_str()), &at_k, *value));
    }

    std::fs::create_dir_all(out)?;
    let mut text = String::new();
    for line in &lines {
        text.push_str(line);
        text.push('\n');
    }
    std::fs::write(out.join("evaluate.tsv"), text)?;

    let mut inputs: Vec<(String, PathBuf)> = vec![
        ("checkpoint".to_string(), checkpoint.to_path_buf()),
        ("docs".to_string(), dir.docs(split)),
        ("vocab_src".to_string(), dir.vocab_src()),
        ("vocab_tgt".to_string(), dir.vocab_tgt()),
    ];
    if contrastive_path.exists() {
        inputs.push(("contrastive".to_string(), contrastive_path));
    }
    inputs.extend(configs.iter().enumerate().map(|(i, p)| (format!("config.{i}"), p.clone())));
    manifest::write(out, "evaluate", s.entries(), &inputs)
}
