//! Attribution dump and summary: the share of prediction mass a model's
//! pronoun decisions draw from the antecedent, the context, and the current
//! pair.

use super::{fixed6, load_model, DataDir};
use crate::manifest;
use crate::settings::Settings;
use anyhow::{bail, Context, Result};
use doctx::attribution::attribution_summary;
use doctx::corpus::load_annotations;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] = &[("k", "5"), ("split", "test")];

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
    let ann_path = dir.annotations(split);
    let corpus = load_annotations(&ann_path, &corpus)
        .with_context(|| format!("loading {}", ann_path.display()))?;
    let (sv, tv) = dir.load_vocabs()?;

    let summary = attribution_summary(&model, &corpus, k, &sv, &tv)?;

    std::fs::create_dir_all(out)?;
    let mut text = String::from("#example_id\tpronoun\tantecedent_pct\tcontext_pct\tcurrent_pct\n");
    for row in &summary.rows {
        text.push_str(&format!(
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
            row.example_id,
            row.pronoun,
            row.share.antecedent_pct,
            row.share.context_pct,
            row.share.current_pct,
        ));
    }
    std::fs::write(out.join("attribution.tsv"), text)?;

    let mut map = BTreeMap::new();
    map.insert("examples".to_string(), summary.rows.len().to_string());
    map.insert("mean.antecedent_pct".to_string(), fixed6(summary.mean.antecedent_pct));
    map.insert("mean.context_pct".to_string(), fixed6(summary.mean.context_pct));
    map.insert("mean.current_pct".to_string(), fixed6(summary.mean.current_pct));
    for (pronoun, share) in &summary.per_class {
        let n = summary.rows.iter().filter(|r| &r.pronoun == pronoun).count();
        map.insert(format!("class.{pronoun}.examples"), n.to_string());
        map.insert(format!("class.{pronoun}.antecedent_pct"), fixed6(share.antecedent_pct));
        map.insert(format!("class.{pronoun}.context_pct"), fixed6(share.context_pct));
        map.insert(format!("class.{pronoun}.current_pct"), fixed6(share.current_pct));
    }
    std::fs::write(out.join("attribution.summary.txt"), doctx::metrics::summary_block(&map))?;

    let mut inputs: Vec<(String, PathBuf)> = vec![
        ("checkpoint".to_string(), checkpoint.to_path_buf()),
        ("docs".to_string(), dir.docs(split)),
        ("annotations".to_string(), ann_path),
        ("vocab_src".to_string(), dir.vocab_src()),
        ("vocab_tgt".to_string(), dir.vocab_tgt()),
    ];
    inputs.extend(configs.iter().enumerate().map(|(i, p)| (format!("config.{i}"), p.clone())));
    manifest::write(out, "attribute", s.entries(), &inputs)
}
