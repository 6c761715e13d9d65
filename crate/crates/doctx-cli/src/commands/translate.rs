//! Document translation from a checkpoint.

use super::{load_model, parse_context_mode, translate_corpus, DataDir};
use crate::manifest;
use crate::settings::Settings;
use anyhow::{bail, Result};
use doctx::decoding::format_translations;
use doctx::model::Architecture;
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "1"),
    ("k", "5"),
    ("beam", "4"),
    ("context_mode", "correct"),
    ("split", "test"),
    ("star", "false"),
];

pub fn run(
    s: &Settings,
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    configs: &[PathBuf],
) -> Result<()> {
    let mut model = load_model(checkpoint)?;
    if s.bool("star")? {
        if model.config.arch != Architecture::Sentence {
            bail!(
                "--star needs a sentence checkpoint, got {}",
                model.config.arch.as_str()
            );
        }
        // Star evaluation: sentence weights driven through concatenated
        // inputs. The two architectures share an identical parameter set.
        model.config.arch = Architecture::Concat2to2;
    }
    let k = s.usize("k")?;
    if k > model.config.max_context {
        bail!("k={k} exceeds the checkpoint's max_context {}", model.config.max_context);
    }
    let dir = DataDir::new(data);
    let split = s.str("split");
    let corpus = dir.load_split(split)?;
    let (sv, tv) = dir.load_vocabs()?;
    let mode = parse_context_mode(s.str("context_mode"))?;

    let docs = translate_corpus(
        &model,
        &corpus,
        k,
        s.usize("beam")?,
        mode,
        s.u64("seed")?,
        &sv,
        &tv,
    )?;

    std::fs::create_dir_all(out)?;
    let mut text = String::new();
    for (doc, hyp) in corpus.docs.iter().zip(&docs) {
        text.push_str(&format_translations(&doc.doc_id, hyp));
    }
    std::fs::write(out.join("translations.tsv"), text)?;

    let mut inputs: Vec<(String, PathBuf)> = vec![
        ("checkpoint".to_string(), checkpoint.to_path_buf()),
        ("docs".to_string(), dir.docs(split)),
        ("vocab_src".to_string(), dir.vocab_src()),
        ("vocab_tgt".to_string(), dir.vocab_tgt()),
    ];
    inputs.extend(configs.iter().enumerate().map(|(i, p)| (format!("config.{i}"), p.clone())));
    manifest::write(out, "translate", s.entries(), &inputs)
}
