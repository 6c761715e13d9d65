//! Pipeline driver: corpus generation, training, translation, perturbation,
//! attribution, evaluation, and combined reporting.
//!
//! Exit codes: 0 success, 1 data or validation failure, 2 flag misuse.

mod commands;
mod manifest;
mod settings;

use clap::{Args, Parser, Subcommand};
use settings::Settings;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "doctx", version, about = "document-context translation pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Layered key=value config files; later files override earlier ones.
    #[arg(long = "config", value_name = "FILE")]
    configs: Vec<PathBuf>,
    /// Direct overrides applied after config files.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    /// Defaults, then files, then --set; dedicated flags come afterwards.
    fn resolve(&self, defaults: &[(&str, &str)]) -> anyhow::Result<Settings> {
        let mut s = Settings::new(defaults);
        for path in &self.configs {
            s.layer_file(path)?;
        }
        s.apply_sets(&self.sets)?;
        Ok(s)
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Output directory for the data files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Model architecture.
    #[arg(long, value_parser = ["sentence", "concat", "multi"])]
    arch: String,
    /// gen-data output directory.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoint and logs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Trained model checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// gen-data output directory.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Context width in sentences.
    #[arg(long)]
    k: Option<usize>,
    /// Which split's documents to read.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct TranslateArgs {
    #[command(flatten)]
    base: RunArgs,
    #[arg(long, value_parser = ["correct", "random", "none"])]
    context_mode: Option<String>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate a sentence checkpoint on concatenated inputs.
    #[arg(long)]
    star: bool,
}

#[derive(Args)]
struct BeamSeedArgs {
    #[command(flatten)]
    base: RunArgs,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory with one subdirectory of result files per model.
    #[arg(long)]
    results: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic annotated parallel corpus with splits.
    GenData(GenDataArgs),
    /// Train a model on a gen-data directory.
    Train(TrainArgs),
    /// Translate one split with a trained checkpoint.
    Translate(TranslateArgs),
    /// BLEU/CXMI table under correct, random, and empty context.
    Perturb(BeamSeedArgs),
    /// Attribution dump and summary over annotated pronouns.
    Attribute(RunArgs),
    /// BLEU, perplexity, contrastive accuracy, and phenomena F1.
    Evaluate(BeamSeedArgs),
    /// Combine per-model result files; emit Pareto data.
    Report(ReportArgs),
}

impl RunArgs {
    fn resolve(&self, defaults: &[(&str, &str)]) -> anyhow::Result<Settings> {
        let mut s = self.cfg.resolve(defaults)?;
        s.override_with("k", self.k.map(|v| v.to_string()));
        s.override_with("split", self.split.clone());
        Ok(s)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::GenData(a) => {
            let mut s = a.cfg.resolve(commands::gen_data::DEFAULTS)?;
            s.override_with("seed", a.seed.map(|v| v.to_string()));
            commands::gen_data::run(&s, &a.out, &a.cfg.configs)
        }
        Cmd::Train(a) => {
            let mut s = a.cfg.resolve(commands::train::DEFAULTS)?;
            s.override_with("seed", a.seed.map(|v| v.to_string()));
            let arch = commands::arch_from_label(&a.arch)?;
            commands::train::run(&s, arch, &a.data, &a.out, &a.cfg.configs)
        }
        Cmd::Translate(a) => {
            let mut s = a.base.resolve(commands::translate::DEFAULTS)?;
            s.override_with("context_mode", a.context_mode.clone());
            s.override_with("beam", a.beam.map(|v| v.to_string()));
            s.override_with("seed", a.seed.map(|v| v.to_string()));
            if a.star {
                s.override_with("star", Some("true".to_string()));
            }
            commands::translate::run(&s, &a.base.checkpoint, &a.base.data, &a.base.out, &a.base.cfg.configs)
        }
        Cmd::Perturb(a) => {
            let mut s = a.base.resolve(commands::perturb::DEFAULTS)?;
            s.override_with("beam", a.beam.map(|v| v.to_string()));
            s.override_with("seed", a.seed.map(|v| v.to_string()));
            commands::perturb::run(&s, &a.base.checkpoint, &a.base.data, &a.base.out, &a.base.cfg.configs)
        }
        Cmd::Attribute(a) => {
            let s = a.resolve(commands::attribute::DEFAULTS)?;
            commands::attribute::run(&s, &a.checkpoint, &a.data, &a.out, &a.cfg.configs)
        }
        Cmd::Evaluate(a) => {
            let mut s = a.base.resolve(commands::evaluate::DEFAULTS)?;
            s.override_with("beam", a.beam.map(|v| v.to_string()));
            s.override_with("seed", a.seed.map(|v| v.to_string()));
            commands::evaluate::run(&s, &a.base.checkpoint, &a.base.data, &a.base.out, &a.base.cfg.configs)
        }
        Cmd::Report(a) => commands::report::run(&a.results, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<settings::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
