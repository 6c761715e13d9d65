//! Context perturbation table: BLEU and CXMI under correct, random, and
//! empty context. A sentence checkpoint gets a second star row where its
//! weights consume concatenated inputs.

use super::{arch_label, fixed6, load_model, translate_corpus, DataDir};
use crate::manifest;
use crate::settings::Settings;
use anyhow::{bail, Result};
use doctx::corpus::{ParallelCorpus, Side, Vocabulary};
use doctx::decoding::ContextMode;
use doctx::metrics::{bleu, cxmi, gold_context_builder, random_context_builder};
use doctx::model::{Architecture, Model};
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] =
    &[("seed", "1"), ("k", "5"), ("beam", "4"), ("split", "test")];

struct Row {
    label: String,
    bleu: [f64; 3],
    cxmi_correct: f64,
    cxmi_random: f64,
}

fn references(corpus: &ParallelCorpus) -> Vec<Vec<String>> {
    corpus
        .docs
        .iter()
        .flat_map(|d| d.sentences.iter().map(|p| p.side(Side::Target).to_vec()))
        .collect()
}

fn row(
    model: &Model,
    label: &str,
    corpus: &ParallelCorpus,
    k: usize,
    beam: usize,
    seed: u64,
    sv: &Vocabulary,
    tv: &Vocabulary,
) -> Result<Row> {
    let refs = references(corpus);
    let mut bleu_scores = [0.0; 3];
    for (slot, mode) in
        [ContextMode::Correct, ContextMode::Random, ContextMode::None].into_iter().enumerate()
    {
        let docs = translate_corpus(model, corpus, k, beam, mode, seed, sv, tv)?;
        let hyps: Vec<Vec<String>> = docs.into_iter().flatten().collect();
        bleu_scores[slot] = bleu(&hyps, &refs)?;
    }
    let arch = model.config.arch;
    let correct = cxmi(
        model,
        corpus,
        gold_context_builder(arch, k, sv, tv),
        gold_context_builder(arch, 0, sv, tv),
    )?;
    let random = cxmi(
        model,
        corpus,
        random_context_builder(arch, k, sv, tv, seed),
        gold_context_builder(arch, 0, sv, tv),
    )?;
    Ok(Row {
        label: label.to_string(),
        bleu: bleu_scores,
        cxmi_correct: correct.mean,
        cxmi_random: random.mean,
    })
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
    let beam = s.usize("beam")?;
    let seed = s.u64("seed")?;

    let mut rows =
        vec![row(&model, arch_label(model.config.arch), &corpus, k, beam, seed, &sv, &tv)?];
    if model.config.arch == Architecture::Sentence {
        let mut star = model.clone();
        star.config.arch = Architecture::Concat2to2;
        rows.push(row(&star, "sentence_star", &corpus, k, beam, seed, &sv, &tv)?);
    }

    std::fs::create_dir_all(out)?;
    let mut text =
        String::from("#configuration\tbleu_correct\tbleu_random\tbleu_none\tcxmi_correct\tcxmi_random\n");
    for r in &rows {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.label,
            fixed6(r.bleu[0]),
            fixed6(r.bleu[1]),
            fixed6(r.bleu[2]),
            fixed6(r.cxmi_correct),
            fixed6(r.cxmi_random),
        ));
    }
    std::fs::write(out.join("perturb.tsv"), text)?;

    let mut inputs: Vec<(String, PathBuf)> = vec![
        ("checkpoint".to_string(), checkpoint.to_path_buf()),
        ("docs".to_string(), dir.docs(split)),
        ("vocab_src".to_string(), dir.vocab_src()),
        ("vocab_tgt".to_string(), dir.vocab_tgt()),
    ];
    inputs.extend(configs.iter().enumerate().map(|(i, p)| (format!("config.{i}"), p.clone())));
    manifest::write(out, "perturb", s.entries(), &inputs)
}
