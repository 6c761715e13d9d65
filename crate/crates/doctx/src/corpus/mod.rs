//! Synthetic discourse corpora, vocabulary, contrastive sets, and file IO.
//!
//! The synthetic language pair is built so that word == token and source and
//! target sentences align 1:1 by position. The source pronoun `it` carries no
//! gender; the target pronoun is `er`, `sie`, or `es` depending solely on the
//! lexical gender of the antecedent noun, which makes the supporting context
//! both necessary and sufficient for correct translation.

mod contrastive;
mod generate;
mod io;
pub mod lexicon;
mod vocab;

pub use contrastive::{
    load_contrastive, make_contrastive_set, save_contrastive, ContrastiveAntecedent,
    ContrastiveExample,
};
pub use generate::{generate_corpus, GenConfig};
pub use io::{load_annotations, load_documents, save_annotations, save_documents};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, RESERVED, SEP, UNK};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid corpus configuration: {0}")]
    Validation(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("annotation {record}: {msg}")]
    Annotation { record: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Source => "source",
            Side::Target => "target",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "source" => Some(Side::Source),
            "target" => Some(Side::Target),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PhenomenonKind {
    Pronoun,
    Formality,
    Cohesion,
    VerbForm,
}

impl PhenomenonKind {
    pub const ALL: [PhenomenonKind; 4] = [
        PhenomenonKind::Pronoun,
        PhenomenonKind::Formality,
        PhenomenonKind::Cohesion,
        PhenomenonKind::VerbForm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhenomenonKind::Pronoun => "pronoun",
            PhenomenonKind::Formality => "formality",
            PhenomenonKind::Cohesion => "cohesion",
            PhenomenonKind::VerbForm => "verb_form",
        }
    }

    pub fn parse(s: &str) -> Option<PhenomenonKind> {
        match s {
            "pronoun" => Some(PhenomenonKind::Pronoun),
            "formality" => Some(PhenomenonKind::Formality),
            "cohesion" => Some(PhenomenonKind::Cohesion),
            "verb_form" => Some(PhenomenonKind::VerbForm),
            _ => None,
        }
    }
}

/// Token span `tok_start..tok_end` inside the sentence `sent_idx` of the same
/// document, on the same side as the annotation that carries it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AntecedentRef {
    pub sent_idx: usize,
    pub tok_start: usize,
    pub tok_end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub sent_idx: usize,
    pub tok_idx: usize,
    pub kind: PhenomenonKind,
    pub side: Side,
    pub antecedent: Option<AntecedentRef>,
}

impl Annotation {
    /// Sentence distance between the annotated token and its antecedent.
    pub fn distance(&self) -> Option<usize> {
        self.antecedent.map(|a| self.sent_idx - a.sent_idx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

impl SentencePair {
    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.src,
            Side::Target => &self.tgt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelDocument {
    pub doc_id: String,
    pub sentences: Vec<SentencePair>,
    pub annotations: Vec<Annotation>,
}

impl ParallelDocument {
    /// The up-to-`k` sentences preceding sentence `i`, in document order.
    pub fn context(&self, i: usize, k: usize) -> &[SentencePair] {
        &self.sentences[i.saturating_sub(k)..i]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub docs: Vec<ParallelDocument>,
}

impl ParallelCorpus {
    pub fn sentence_count(&self) -> usize {
        self.docs.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn token_count(&self, side: Side) -> usize {
        self.docs
            .iter()
            .flat_map(|d| &d.sentences)
            .map(|p| p.side(side).len())
            .sum()
    }

    /// Splits off the last `n_valid_docs` documents as a validation set.
    /// Document-granular: no document straddles the two halves.
    pub fn split(&self, n_valid_docs: usize) -> (ParallelCorpus, ParallelCorpus) {
        let n = self.docs.len().saturating_sub(n_valid_docs);
        (
            ParallelCorpus { docs: self.docs[..n].to_vec() },
            ParallelCorpus { docs: self.docs[n..].to_vec() },
        )
    }
}
