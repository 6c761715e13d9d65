//! Subcommand implementations over the doctx library.

pub mod attribute;
pub mod evaluate;
pub mod gen_data;
pub mod perturb;
pub mod report;
pub mod train;
pub mod translate;

use anyhow::{bail, Context, Result};
use doctx::corpus::{load_documents, ParallelCorpus, Vocabulary};
use doctx::decoding::{translate_document, ContextMode};
use doctx::model::{Architecture, Model};
use std::path::{Path, PathBuf};

/// Stable CLI names for the three architectures.
pub fn arch_label(arch: Architecture) -> &'static str {
    match arch {
        Architecture::Sentence => "sentence",
        Architecture::Concat2to2 => "concat",
        Architecture::MultiEncoder => "multi",
    }
}

pub fn arch_from_label(label: &str) -> Result<Architecture> {
    match label {
        "sentence" => Ok(Architecture::Sentence),
        "concat" => Ok(Architecture::Concat2to2),
        "multi" => Ok(Architecture::MultiEncoder),
        other => bail!("unknown architecture `{other}`"),
    }
}

pub fn parse_context_mode(s: &str) -> Result<ContextMode> {
    match s {
        "correct" => Ok(ContextMode::Correct),
        "random" => Ok(ContextMode::Random),
        "none" => Ok(ContextMode::None),
        other => bail!("unknown context mode `{other}`"),
    }
}

/// Fixed 6-decimal rendering for every numeric report field.
pub fn fixed6(v: f64) -> String {
    format!("{v:.6}")
}

/// File layout of a gen-data output directory.
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: &Path) -> DataDir {
        DataDir { root: root.to_path_buf() }
    }

    pub fn docs(&self, split: &str) -> PathBuf {
        self.root.join(format!("{split}.docs.tsv"))
    }

    pub fn annotations(&self, split: &str) -> PathBuf {
        self.root.join(format!("{split}.annotations.tsv"))
    }

    pub fn contrastive(&self) -> PathBuf {
        self.root.join("contrastive.tsv")
    }

    pub fn vocab_src(&self) -> PathBuf {
        self.root.join("vocab.src.txt")
    }

    pub fn vocab_tgt(&self) -> PathBuf {
        self.root.join("vocab.tgt.txt")
    }

    pub fn load_vocabs(&self) -> Result<(Vocabulary, Vocabulary)> {
        let sv = Vocabulary::load(&self.vocab_src())
            .with_context(|| format!("loading {}", self.vocab_src().display()))?;
        let tv = Vocabulary::load(&self.vocab_tgt())
            .with_context(|| format!("loading {}", self.vocab_tgt().display()))?;
        Ok((sv, tv))
    }

    pub fn load_split(&self, split: &str) -> Result<ParallelCorpus> {
        let path = self.docs(split);
        load_documents(&path).with_context(|| format!("loading {}", path.display()))
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Translates every document; the per-document seed offset keeps random
/// context draws independent across documents yet reproducible.
pub fn translate_corpus(
    model: &Model,
    corpus: &ParallelCorpus,
    k: usize,
    beam: usize,
    mode: ContextMode,
    seed: u64,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<Vec<Vec<Vec<String>>>> {
    let mut out = Vec::with_capacity(corpus.docs.len());
    for (di, doc) in corpus.docs.iter().enumerate() {
        let hyp = translate_document(
            model,
            doc,
            k,
            beam,
            mode,
            seed.wrapping_add(di as u64),
            src_vocab,
            tgt_vocab,
        )
        .with_context(|| format!("translating document {}", doc.doc_id))?;
        out.push(hyp);
    }
    Ok(out)
}
