//! Model training from a gen-data directory to a checkpoint.

use super::DataDir;
use crate::manifest;
use crate::settings::Settings;
use anyhow::{bail, Context, Result};
use doctx::metrics::summary_block;
use doctx::model::{Architecture, Model, ModelConfig};
use doctx::training::{train, StopReason, TrainConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "11"),
    ("n_layers", "1"),
    ("d_model", "48"),
    ("n_heads", "4"),
    ("d_ffn", "96"),
    ("dropout", "0.1"),
    ("max_positions", "128"),
    ("max_context", "5"),
    ("tied_context_embeddings", "true"),
    ("peak_lr", "0.003"),
    ("warmup", "200"),
    ("beta1", "0.9"),
    ("beta2", "0.98"),
    ("eps", "1e-8"),
    ("label_smoothing", "0.1"),
    ("batch_tokens", "256"),
    ("max_epochs", "60"),
    ("patience", "10"),
    ("eval_interval", "0"),
    ("clip_norm", "1.0"),
];

fn stop_label(stop: StopReason) -> &'static str {
    match stop {
        StopReason::EarlyStopped => "early_stopped",
        StopReason::MaxEpochs => "max_epochs",
        StopReason::Diverged => "diverged",
    }
}

pub fn run(
    s: &Settings,
    arch: Architecture,
    data: &Path,
    out: &Path,
    configs: &[PathBuf],
) -> Result<()> {
    let dir = DataDir::new(data);
    let train_set = dir.load_split("train")?;
    let valid_set = dir.load_split("valid")?;
    let (sv, tv) = dir.load_vocabs()?;
    let seed = s.u64("seed")?;

    let model_cfg = ModelConfig {
        arch,
        n_layers: s.usize("n_layers")?,
        d_model: s.usize("d_model")?,
        n_heads: s.usize("n_heads")?,
        d_ffn: s.usize("d_ffn")?,
        dropout: s.f64("dropout")?,
        src_vocab: sv.len(),
        tgt_vocab: tv.len(),
        max_positions: s.usize("max_positions")?,
        max_context: s.usize("max_context")?,
        tied_context_embeddings: s.bool("tied_context_embeddings")?,
    };
    let model = Model::new(model_cfg, seed).context("building model")?;

    let warmup = s.usize("warmup")?;
    let train_cfg = TrainConfig {
        beta1: s.f64("beta1")?,
        beta2: s.f64("beta2")?,
        eps: s.f64("eps")?,
        lr_scale: s.f64("peak_lr")? * (warmup as f64).sqrt(),
        warmup,
        label_smoothing: s.f64("label_smoothing")?,
        batch_tokens: s.usize("batch_tokens")?,
        max_epochs: s.usize("max_epochs")?,
        patience: s.usize("patience")?,
        eval_interval: s.usize("eval_interval")?,
        clip_norm: s.f64("clip_norm")?,
        seed,
    };

    let outcome = train(model, &train_set, &valid_set, &sv, &tv, &train_cfg)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    outcome.model.save(&out.join("model.ckpt"))?;
    std::fs::write(out.join("train.log.tsv"), &outcome.log)?;

    let mut summary = BTreeMap::new();
    summary.insert("arch".to_string(), arch.as_str().to_string());
    summary.insert("best_valid_ppl".to_string(), super::fixed6(outcome.best_valid_ppl));
    summary.insert("final_valid_ppl".to_string(), super::fixed6(outcome.final_valid_ppl));
    summary.insert("steps".to_string(), outcome.steps.to_string());
    summary.insert("stop".to_string(), stop_label(outcome.stop).to_string());
    let hist: Vec<String> = outcome.k_histogram.iter().map(|c| c.to_string()).collect();
    summary.insert("k_histogram".to_string(), hist.join(","));
    std::fs::write(out.join("train.summary.txt"), summary_block(&summary))?;

    let mut cfg = s.entries().clone();
    cfg.insert("arch".to_string(), arch.as_str().to_string());
    let mut inputs: Vec<(String, PathBuf)> = vec![
        ("train_docs".to_string(), dir.docs("train")),
        ("valid_docs".to_string(), dir.docs("valid")),
        ("vocab_src".to_string(), dir.vocab_src()),
        ("vocab_tgt".to_string(), dir.vocab_tgt()),
    ];
    inputs.extend(configs.iter().enumerate().map(|(i, p)| (format!("config.{i}"), p.clone())));
    manifest::write(out, "train", &cfg, &inputs)?;

    if outcome.stop == StopReason::Diverged {
        bail!("training diverged; checkpoint and log reflect the best state before divergence");
    }
    Ok(())
}
