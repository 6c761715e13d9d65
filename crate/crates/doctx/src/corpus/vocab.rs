//! Token vocabularies with fixed reserved ids.

use super::{CorpusError, ParallelCorpus, Side};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const SEP: u32 = 3;
pub const UNK: u32 = 4;

/// Reserved surface forms, in id order.
pub const RESERVED: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<sep>", "<unk>"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from an arbitrary token iterator. Tokens are
    /// deduplicated and sorted, so the result is independent of input order.
    pub fn from_tokens<I, S>(tokens: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| !RESERVED.contains(&t.as_str()))
            .collect();
        set.sort_unstable();
        set.dedup();
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(set)
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    /// Unknown tokens map to UNK; the synthetic languages never produce any.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for tok in &self.tokens {
            writeln!(f, "{tok}")?;
        }
        f.flush()?;
        Ok(())
    }

    /// Loads a vocabulary saved by [`Vocabulary::save`]; ids are line
    /// numbers. The reserved prefix is required verbatim.
    pub fn load(path: &Path) -> Result<Vocabulary, CorpusError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut tokens = Vec::new();
        let mut index = BTreeMap::new();
        for (i, line) in f.lines().enumerate() {
            let tok = line?;
            if i < RESERVED.len() && tok != RESERVED[i] {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    msg: format!("expected reserved token {:?}, found {tok:?}", RESERVED[i]),
                });
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    msg: format!("duplicate token {tok:?}"),
                });
            }
            tokens.push(tok);
        }
        if tokens.len() < RESERVED.len() {
            return Err(CorpusError::Parse {
                line: tokens.len(),
                msg: "vocabulary file shorter than the reserved prefix".into(),
            });
        }
        Ok(Vocabulary { tokens, index })
    }
}

/// Collects every token of the given side into a canonical vocabulary.
pub fn build_vocab(corpus: &ParallelCorpus, side: Side) -> Result<Vocabulary, CorpusError> {
    if corpus.docs.is_empty() {
        return Err(CorpusError::Validation("cannot build a vocabulary from an empty corpus".into()));
    }
    Ok(Vocabulary::from_tokens(
        corpus
            .docs
            .iter()
            .flat_map(|d| &d.sentences)
            .flat_map(|p| p.side(side)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ParallelDocument, SentencePair};

    fn corpus_of(tgt_sents: &[&[&str]]) -> ParallelCorpus {
        ParallelCorpus {
            docs: vec![ParallelDocument {
                doc_id: "d0000".into(),
                sentences: tgt_sents
                    .iter()
                    .map(|s| SentencePair {
                        src: s.iter().map(|t| t.to_string()).collect(),
                        tgt: s.iter().map(|t| t.to_string()).collect(),
                    })
                    .collect(),
                annotations: vec![],
            }],
        }
    }

    #[test]
    fn two_token_corpus_has_seven_entries() {
        let v = build_vocab(&corpus_of(&[&["a", "b", "a"]]), Side::Target).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.id("<pad>"), Some(PAD));
        assert_eq!(v.id("<bos>"), Some(BOS));
        assert_eq!(v.id("<eos>"), Some(EOS));
        assert_eq!(v.id("<sep>"), Some(SEP));
        assert_eq!(v.id("<unk>"), Some(UNK));
        assert_eq!(v.id("a"), Some(5));
        assert_eq!(v.id("b"), Some(6));
    }

    #[test]
    fn vocabulary_is_insertion_order_independent() {
        let a = build_vocab(&corpus_of(&[&["x", "y", "z"]]), Side::Target).unwrap();
        let b = build_vocab(&corpus_of(&[&["z"], &["y", "x"]]), Side::Target).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_decode_round_trips_known_tokens() {
        let v = build_vocab(&corpus_of(&[&["m0", "w1", "b2", "."]]), Side::Target).unwrap();
        let sent: Vec<String> = ["b2", "m0", ".", "w1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(v.decode(&v.encode(&sent)), sent);
    }

    #[test]
    fn unknown_tokens_fall_back_to_unk() {
        let v = build_vocab(&corpus_of(&[&["a"]]), Side::Target).unwrap();
        let ids = v.encode(&["mystery".to_string()]);
        assert_eq!(ids, vec![UNK]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            build_vocab(&ParallelCorpus::default(), Side::Source),
            Err(CorpusError::Validation(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = build_vocab(&corpus_of(&[&["q", "r", "s"]]), Side::Target).unwrap();
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    #[test]
    fn load_rejects_wrong_reserved_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "<pad>\n<bos>\nwrong\n<sep>\n<unk>\na\n").unwrap();
        assert!(matches!(
            Vocabulary::load(&path),
            Err(CorpusError::Parse { line: 3, .. })
        ));
    }
}
