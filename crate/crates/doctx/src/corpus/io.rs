//! Document and annotation file IO.

use super::{
    Annotation, AntecedentRef, CorpusError, ParallelCorpus, ParallelDocument, PhenomenonKind,
    SentencePair, Side,
};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// One line per sentence: `doc_id TAB sent_idx TAB src_tokens TAB tgt_tokens`.
pub fn save_documents(corpus: &ParallelCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in &corpus.docs {
        for (si, pair) in doc.sentences.iter().enumerate() {
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                doc.doc_id,
                si,
                pair.src.join(" "),
                pair.tgt.join(" ")
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Loads a documents file. See [`parse_documents`].
pub fn load_documents(path: &Path) -> Result<ParallelCorpus, CorpusError> {
    parse_documents(&std::fs::read_to_string(path)?)
}

/// Parses documents text. Lines must be grouped by document, with sentence
/// indices counting from 0 in order; a document id may not reappear after
/// its block ends. The result carries no annotations.
pub fn parse_documents(text: &str) -> Result<ParallelCorpus, CorpusError> {
    let mut docs: Vec<ParallelDocument> = Vec::new();
    let mut closed: BTreeSet<String> = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let parse = |msg: String| CorpusError::Parse { line: lineno, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let doc_id = fields[0];
        let sent_idx: usize = fields[1]
            .parse()
            .map_err(|_| parse(format!("bad sentence index {:?}", fields[1])))?;
        let pair = SentencePair {
            src: fields[2].split_whitespace().map(str::to_string).collect(),
            tgt: fields[3].split_whitespace().map(str::to_string).collect(),
        };
        let start_new = docs.last().is_none_or(|d| d.doc_id != doc_id);
        if start_new {
            if let Some(prev) = docs.last() {
                closed.insert(prev.doc_id.clone());
            }
            if closed.contains(doc_id) {
                return Err(parse(format!("document {doc_id:?} reappears after its block ended")));
            }
            docs.push(ParallelDocument {
                doc_id: doc_id.to_string(),
                sentences: Vec::new(),
                annotations: Vec::new(),
            });
        }
        let doc = docs.last_mut().unwrap();
        if sent_idx != doc.sentences.len() {
            return Err(parse(format!(
                "sentence index {sent_idx} out of order, expected {}",
                doc.sentences.len()
            )));
        }
        doc.sentences.push(pair);
    }
    Ok(ParallelCorpus { docs })
}

/// One line per annotation:
/// `doc_id TAB sent_idx TAB tok_idx TAB kind TAB side TAB ante_sent_idx TAB
/// ante_tok_start TAB ante_tok_end`, with `-` in the three antecedent fields
/// for kinds other than pronoun.
pub fn save_annotations(corpus: &ParallelCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in &corpus.docs {
        for ann in &doc.annotations {
            let (a, b, c) = match ann.antecedent {
                Some(r) => (
                    r.sent_idx.to_string(),
                    r.tok_start.to_string(),
                    r.tok_end.to_string(),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                doc.doc_id,
                ann.sent_idx,
                ann.tok_idx,
                ann.kind.as_str(),
                ann.side.as_str(),
                a,
                b,
                c
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Loads annotations from a file. See [`parse_annotations`].
pub fn load_annotations(path: &Path, corpus: &ParallelCorpus) -> Result<ParallelCorpus, CorpusError> {
    parse_annotations(&std::fs::read_to_string(path)?, corpus)
}

/// Parses annotations text and joins it onto `corpus` by `(doc_id, sent_idx)`,
/// replacing any annotations the corpus already carried. Spans are validated
/// against the joined document; failures name the offending record as
/// `doc_id:sent_idx:tok_idx`.
pub fn parse_annotations(text: &str, corpus: &ParallelCorpus) -> Result<ParallelCorpus, CorpusError> {
    let mut out = corpus.clone();
    for doc in &mut out.docs {
        doc.annotations.clear();
    }
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let parse = |msg: String| CorpusError::Parse { line: lineno, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(parse(format!(
                "expected 8 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let doc_id = fields[0];
        let sent_idx: usize = fields[1]
            .parse()
            .map_err(|_| parse(format!("bad sentence index {:?}", fields[1])))?;
        let tok_idx: usize = fields[2]
            .parse()
            .map_err(|_| parse(format!("bad token index {:?}", fields[2])))?;
        let kind = PhenomenonKind::parse(fields[3])
            .ok_or_else(|| parse(format!("unknown phenomenon kind {:?}", fields[3])))?;
        let side = Side::parse(fields[4])
            .ok_or_else(|| parse(format!("unknown side {:?}", fields[4])))?;
        let ante_raw = &fields[5..8];
        let antecedent = if ante_raw.iter().all(|&s| s == "-") {
            if kind == PhenomenonKind::Pronoun {
                return Err(parse("pronoun annotation lacks an antecedent".into()));
            }
            None
        } else {
            if kind != PhenomenonKind::Pronoun {
                return Err(parse(format!(
                    "kind {} must not carry an antecedent",
                    kind.as_str()
                )));
            }
            let num = |s: &str| -> Result<usize, CorpusError> {
                s.parse().map_err(|_| parse(format!("bad antecedent field {s:?}")))
            };
            Some(AntecedentRef {
                sent_idx: num(ante_raw[0])?,
                tok_start: num(ante_raw[1])?,
                tok_end: num(ante_raw[2])?,
            })
        };

        let record = format!("{doc_id}:{sent_idx}:{tok_idx}");
        let fail = |msg: String| CorpusError::Annotation { record: record.clone(), msg };
        let doc = out
            .docs
            .iter_mut()
            .find(|d| d.doc_id == doc_id)
            .ok_or_else(|| fail(format!("unknown document {doc_id:?}")))?;
        if sent_idx >= doc.sentences.len() {
            return Err(fail(format!(
                "sentence index beyond document length {}",
                doc.sentences.len()
            )));
        }
        let sent_len = doc.sentences[sent_idx].side(side).len();
        if tok_idx >= sent_len {
            return Err(fail(format!("token index beyond sentence length {sent_len}")));
        }
        if let Some(a) = antecedent {
            if a.sent_idx > sent_idx {
                return Err(fail("antecedent sentence follows the pronoun sentence".into()));
            }
            let ante_len = doc.sentences[a.sent_idx].side(side).len();
            if a.tok_start >= a.tok_end || a.tok_end > ante_len {
                return Err(fail(format!(
                    "antecedent span {}..{} outside its sentence of length {ante_len}",
                    a.tok_start, a.tok_end
                )));
            }
        }
        doc.annotations.push(Annotation { sent_idx, tok_idx, kind, side, antecedent });
    }
    Ok(out)
}
