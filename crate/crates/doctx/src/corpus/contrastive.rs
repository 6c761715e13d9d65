//! Contrastive pronoun test sets.

use super::lexicon;
use super::{CorpusError, ParallelCorpus, PhenomenonKind, Side};
use crate::rng::Prng;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Where the pronoun's antecedent sits, relative to the current sentence.
/// The span indexes the context sentence `distance` positions back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContrastiveAntecedent {
    pub distance: usize,
    pub tok_start: usize,
    pub tok_end: usize,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContrastiveExample {
    pub src_context: Vec<Vec<String>>,
    pub src: Vec<String>,
    pub correct: Vec<String>,
    /// One variant per wrong pronoun gender, differing from `correct` only
    /// at `pronoun_pos`.
    pub incorrect: Vec<Vec<String>>,
    pub tgt_context: Vec<Vec<String>>,
    pub pronoun_pos: usize,
    pub antecedent: ContrastiveAntecedent,
}

/// Builds a contrastive set from the corpus's gold pronoun annotations.
/// Only antecedent distances 1 through 5 are eligible; each example gets
/// one incorrect variant per wrong gender, and classes are balanced by
/// downsampling majority pronouns. An empty result means no eligible
/// pronouns existed.
pub fn make_contrastive_set(corpus: &ParallelCorpus, seed: u64) -> Vec<ContrastiveExample> {
    let mut examples = Vec::new();
    for doc in &corpus.docs {
        for ann in &doc.annotations {
            if ann.kind != PhenomenonKind::Pronoun || ann.side != Side::Target {
                continue;
            }
            let Some(ante) = ann.antecedent else { continue };
            let d = ann.sent_idx - ante.sent_idx;
            if !(1..=5).contains(&d) {
                continue;
            }
            let sent = &doc.sentences[ann.sent_idx];
            let correct = sent.tgt.clone();
            let Some(gender) = lexicon::gender_of_pronoun(&correct[ann.tok_idx]) else {
                continue;
            };
            let incorrect: Vec<Vec<String>> = lexicon::PRONOUNS
                .iter()
                .filter(|&&p| p != lexicon::pronoun_for(gender))
                .map(|&p| {
                    let mut v = correct.clone();
                    v[ann.tok_idx] = p.to_string();
                    v
                })
                .collect();
            let ctx_len = ann.sent_idx.min(5);
            let ctx = doc.context(ann.sent_idx, ctx_len);
            examples.push(ContrastiveExample {
                src_context: ctx.iter().map(|p| p.src.clone()).collect(),
                src: sent.src.clone(),
                correct,
                incorrect,
                tgt_context: ctx.iter().map(|p| p.tgt.clone()).collect(),
                pronoun_pos: ann.tok_idx,
                antecedent: ContrastiveAntecedent {
                    distance: d,
                    tok_start: ante.tok_start,
                    tok_end: ante.tok_end,
                    side: Side::Target,
                },
            });
        }
    }
    balance(examples, seed)
}

/// Downsamples majority pronoun classes to the smallest class size.
/// Selection is random under `seed`; surviving examples keep corpus order.
fn balance(examples: Vec<ContrastiveExample>, seed: u64) -> Vec<ContrastiveExample> {
    let mut by_class: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        let p = lexicon::PRONOUNS
            .iter()
            .find(|&&p| p == ex.correct[ex.pronoun_pos])
            .expect("correct token is a known pronoun");
        by_class.entry(p).or_default().push(i);
    }
    let Some(min) = by_class.values().map(Vec::len).min() else {
        return Vec::new();
    };
    let rng = Prng::new(seed).fork("contrastive.balance");
    let mut keep = Vec::new();
    for (ci, (_, mut idxs)) in by_class.into_iter().enumerate() {
        rng.fork_idx("class", ci as u64).shuffle(&mut idxs);
        idxs.truncate(min);
        keep.extend(idxs);
    }
    keep.sort_unstable();
    let mut out = Vec::with_capacity(keep.len());
    let mut examples = examples;
    for i in keep.into_iter().rev() {
        out.push(examples.swap_remove(i));
    }
    out.reverse();
    out
}

fn join_block(sents: &[Vec<String>]) -> String {
    sents
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join("||")
}

fn split_block(field: &str) -> Vec<Vec<String>> {
    if field.is_empty() {
        return Vec::new();
    }
    field
        .split("||")
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect()
}

/// One record per line:
/// `src_ctx TAB src TAB correct TAB incorrect1||incorrect2 TAB tgt_ctx TAB
/// pronoun_pos TAB distance:tok_start:tok_end:side`.
/// Context blocks join sentences with `||`.
pub fn save_contrastive(examples: &[ContrastiveExample], path: &Path) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in examples {
        let a = &ex.antecedent;
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}:{}:{}:{}",
            join_block(&ex.src_context),
            ex.src.join(" "),
            ex.correct.join(" "),
            join_block(&ex.incorrect),
            join_block(&ex.tgt_context),
            ex.pronoun_pos,
            a.distance,
            a.tok_start,
            a.tok_end,
            a.side.as_str(),
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_contrastive(path: &Path) -> Result<Vec<ContrastiveExample>, CorpusError> {
    parse_contrastive(&std::fs::read_to_string(path)?)
}

pub fn parse_contrastive(text: &str) -> Result<Vec<ContrastiveExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let parse = |msg: String| CorpusError::Parse { line: lineno, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(parse(format!(
                "expected 7 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let src_context = split_block(fields[0]);
        let src: Vec<String> = fields[1].split_whitespace().map(str::to_string).collect();
        let correct: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
        let incorrect = split_block(fields[3]);
        let tgt_context = split_block(fields[4]);
        let pronoun_pos: usize = fields[5]
            .parse()
            .map_err(|_| parse(format!("bad pronoun position {:?}", fields[5])))?;
        let ante_fields: Vec<&str> = fields[6].split(':').collect();
        if ante_fields.len() != 4 {
            return Err(parse(format!("bad antecedent reference {:?}", fields[6])));
        }
        let num = |s: &str| -> Result<usize, CorpusError> {
            s.parse().map_err(|_| parse(format!("bad antecedent number {s:?}")))
        };
        let antecedent = ContrastiveAntecedent {
            distance: num(ante_fields[0])?,
            tok_start: num(ante_fields[1])?,
            tok_end: num(ante_fields[2])?,
            side: Side::parse(ante_fields[3])
                .ok_or_else(|| parse(format!("bad side {:?}", ante_fields[3])))?,
        };
        let ex = ContrastiveExample {
            src_context,
            src,
            correct,
            incorrect,
            tgt_context,
            pronoun_pos,
            antecedent,
        };
        validate(&ex).map_err(parse)?;
        out.push(ex);
    }
    Ok(out)
}

fn validate(ex: &ContrastiveExample) -> Result<(), String> {
    if ex.pronoun_pos >= ex.correct.len() {
        return Err(format!(
            "pronoun position {} outside the target of length {}",
            ex.pronoun_pos,
            ex.correct.len()
        ));
    }
    if !(1..=5).contains(&ex.antecedent.distance) {
        return Err(format!("antecedent distance {} outside 1..=5", ex.antecedent.distance));
    }
    for inc in &ex.incorrect {
        if inc.len() != ex.correct.len() {
            return Err("incorrect variant length differs from correct target".into());
        }
        let diffs: Vec<usize> = (0..inc.len()).filter(|&j| inc[j] != ex.correct[j]).collect();
        if diffs != [ex.pronoun_pos] {
            return Err(format!(
                "incorrect variant differs from correct target at {diffs:?}, expected only the pronoun position {}",
                ex.pronoun_pos
            ));
        }
    }
    let ctx = match ex.antecedent.side {
        Side::Source => &ex.src_context,
        Side::Target => &ex.tgt_context,
    };
    if ex.antecedent.distance > ctx.len() {
        return Err(format!(
            "antecedent distance {} exceeds the {}-sentence context block",
            ex.antecedent.distance,
            ctx.len()
        ));
    }
    let sent = &ctx[ctx.len() - ex.antecedent.distance];
    if ex.antecedent.tok_start >= ex.antecedent.tok_end || ex.antecedent.tok_end > sent.len() {
        return Err(format!(
            "antecedent span {}..{} outside its context sentence of length {}",
            ex.antecedent.tok_start,
            ex.antecedent.tok_end,
            sent.len()
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, Annotation, AntecedentRef, GenConfig, ParallelDocument, SentencePair};

    fn rich_corpus() -> ParallelCorpus {
        generate_corpus(&GenConfig { n_docs: 24, ..GenConfig::default() }, 7).unwrap()
    }

    #[test]
    fn every_example_has_two_incorrect_variants_differing_at_one_token() {
        let set = make_contrastive_set(&rich_corpus(), 1);
        assert!(!set.is_empty());
        for ex in &set {
            assert_eq!(ex.incorrect.len(), 2);
            for inc in &ex.incorrect {
                let diffs: Vec<usize> =
                    (0..inc.len()).filter(|&j| inc[j] != ex.correct[j]).collect();
                assert_eq!(diffs, vec![ex.pronoun_pos]);
            }
        }
    }

    #[test]
    fn swapping_the_pronoun_back_restores_the_reference() {
        let set = make_contrastive_set(&rich_corpus(), 1);
        for ex in &set {
            for inc in &ex.incorrect {
                let mut back = inc.clone();
                back[ex.pronoun_pos] = ex.correct[ex.pronoun_pos].clone();
                assert_eq!(&back, &ex.correct);
            }
        }
    }

    #[test]
    fn antecedent_span_is_verbatim_in_the_context_block() {
        let set = make_contrastive_set(&rich_corpus(), 1);
        for ex in &set {
            let a = &ex.antecedent;
            let ctx = &ex.tgt_context;
            let sent = &ctx[ctx.len() - a.distance];
            let noun = lexicon::parse_tgt_noun(&sent[a.tok_start]).unwrap();
            let expect = lexicon::pronoun_for(lexicon::noun_gender(noun));
            assert_eq!(ex.correct[ex.pronoun_pos], expect);
        }
    }

    #[test]
    fn classes_are_balanced_after_downsampling() {
        let set = make_contrastive_set(&rich_corpus(), 5);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for ex in &set {
            *counts.entry(ex.correct[ex.pronoun_pos].clone()).or_default() += 1;
        }
        let min = counts.values().min().copied().unwrap();
        let max = counts.values().max().copied().unwrap();
        assert_eq!(min, max, "unbalanced classes: {counts:?}");
    }

    #[test]
    fn balancing_is_deterministic_in_the_seed() {
        let c = rich_corpus();
        assert_eq!(make_contrastive_set(&c, 9), make_contrastive_set(&c, 9));
    }

    #[test]
    fn distance_zero_only_corpus_yields_empty_set() {
        let tok = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
        let doc = ParallelDocument {
            doc_id: "d0000".into(),
            sentences: vec![SentencePair {
                src: tok("n0 v0 it ."),
                tgt: tok("m0 w0 er ."),
            }],
            annotations: vec![Annotation {
                sent_idx: 0,
                tok_idx: 2,
                kind: PhenomenonKind::Pronoun,
                side: Side::Target,
                antecedent: Some(AntecedentRef { sent_idx: 0, tok_start: 0, tok_end: 1 }),
            }],
        };
        let set = make_contrastive_set(&ParallelCorpus { docs: vec![doc] }, 1);
        assert!(set.is_empty());
    }

    #[test]
    fn file_round_trip_preserves_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("contrastive.tsv");
        let set = make_contrastive_set(&rich_corpus(), 3);
        save_contrastive(&set, &path).unwrap();
        assert_eq!(load_contrastive(&path).unwrap(), set);
    }

    #[test]
    fn malformed_record_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("contrastive.tsv");
        let set = make_contrastive_set(&rich_corpus(), 3);
        save_contrastive(&set[..1], &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("only\tthree\tfields\n");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_contrastive(&path),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }
}
