//! Synthetic corpus generation with train/valid/test splits, a contrastive
//! set derived from the test split, and shared vocabularies.

use super::DataDir;
use crate::manifest;
use crate::settings::Settings;
use anyhow::{Context, Result};
use doctx::corpus::{
    build_vocab, generate_corpus, make_contrastive_set, save_annotations, save_contrastive,
    save_documents, GenConfig, ParallelCorpus, Side,
};
use doctx::metrics::summary_block;
use doctx::tagger::phenomena_stats;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "17"),
    ("n_docs", "40"),
    ("n_valid_docs", "4"),
    ("n_test_docs", "16"),
    ("sents_per_doc", "12"),
    ("n_nouns", "9"),
    ("n_verbs", "8"),
    ("n_adverbs", "6"),
    ("pronoun_rate", "0.55"),
    ("distance_distribution", "0.35,0.3,0.2,0.1,0.05"),
    ("formality", "true"),
    ("cohesion", "true"),
    ("verb_form", "true"),
];

fn gen_config(s: &Settings, n_docs: usize) -> Result<GenConfig> {
    let dist = s.f64_list("distance_distribution", 5)?;
    Ok(GenConfig {
        n_docs,
        sents_per_doc: s.usize("sents_per_doc")?,
        n_nouns: s.usize("n_nouns")?,
        n_verbs: s.usize("n_verbs")?,
        n_adverbs: s.usize("n_adverbs")?,
        pronoun_rate: s.f64("pronoun_rate")?,
        distance_distribution: [dist[0], dist[1], dist[2], dist[3], dist[4]],
        formality: s.bool("formality")?,
        cohesion: s.bool("cohesion")?,
        verb_form: s.bool("verb_form")?,
    })
}

pub fn run(s: &Settings, out: &Path, configs: &[PathBuf]) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let dir = DataDir::new(out);
    let seed = s.u64("seed")?;

    // Split seeds are offsets of the root seed so each split is an
    // independent draw from the same distribution.
    let splits = [
        ("train", s.usize("n_docs")?, seed),
        ("valid", s.usize("n_valid_docs")?, seed.wrapping_add(1)),
        ("test", s.usize("n_test_docs")?, seed.wrapping_add(2)),
    ];
    let mut corpora: Vec<ParallelCorpus> = Vec::new();
    for (split, n_docs, split_seed) in splits {
        let corpus = generate_corpus(&gen_config(s, n_docs)?, split_seed)
            .with_context(|| format!("generating {split} split"))?;
        save_documents(&corpus, &dir.docs(split))?;
        save_annotations(&corpus, &dir.annotations(split))?;
        corpora.push(corpus);
    }

    let test = &corpora[2];
    let contrastive = make_contrastive_set(test, seed.wrapping_add(3));
    save_contrastive(&contrastive, &dir.contrastive())?;

    // One vocabulary pair over all splits; the lexicon is closed, so this
    // only guards against rare forms missing from the training draw.
    let mut all = corpora[0].clone();
    all.docs.extend(corpora[1].docs.iter().cloned());
    all.docs.extend(corpora[2].docs.iter().cloned());
    build_vocab(&all, Side::Source)?.save(&dir.vocab_src())?;
    build_vocab(&all, Side::Target)?.save(&dir.vocab_tgt())?;

    let stats = phenomena_stats(test);
    let mut summary = BTreeMap::new();
    summary.insert("test.documents".to_string(), test.docs.len().to_string());
    summary.insert("test.sentences".to_string(), test.sentence_count().to_string());
    summary.insert("test.contrastive_examples".to_string(), contrastive.len().to_string());
    for kind in doctx::corpus::PhenomenonKind::ALL {
        summary.insert(
            format!("test.pct.{}", kind.as_str()),
            super::fixed6(stats.percentage(kind)),
        );
    }
    std::fs::write(out.join("stats.txt"), summary_block(&summary))?;

    let inputs: Vec<(String, PathBuf)> = configs
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("config.{i}"), p.clone()))
        .collect();
    manifest::write(out, "gen-data", s.entries(), &inputs)
}
