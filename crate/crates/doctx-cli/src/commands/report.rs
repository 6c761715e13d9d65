//! Combined report over per-model result directories, plus Pareto data on
//! (pronoun F1, antecedent attribution %). Consumes only files written by
//! the other subcommands; no model execution.

use super::fixed6;
use crate::manifest;
use anyhow::{bail, Context, Result};
use doctx::metrics::parse_summary;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

struct ModelFiles {
    name: String,
    evaluate: Option<(PathBuf, String)>,
    perturb: Option<(PathBuf, String)>,
    attribution: Option<(PathBuf, String)>,
}

fn read_optional(path: PathBuf) -> Result<Option<(PathBuf, String)>> {
    if !path.exists() {
        return Ok(None);
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some((path, text)))
}

fn scan(results: &Path) -> Result<Vec<ModelFiles>> {
    let mut names = Vec::new();
    for entry in
        std::fs::read_dir(results).with_context(|| format!("reading {}", results.display()))?
    {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let mut out = Vec::new();
    for name in names {
        let dir = results.join(&name);
        let files = ModelFiles {
            evaluate: read_optional(dir.join("evaluate.tsv"))?,
            perturb: read_optional(dir.join("perturb.tsv"))?,
            attribution: read_optional(dir.join("attribution.summary.txt"))?,
            name,
        };
        if files.evaluate.is_some() || files.perturb.is_some() || files.attribution.is_some() {
            out.push(files);
        }
    }
    if out.is_empty() {
        bail!("no result files under {}", results.display());
    }
    Ok(out)
}

/// A point is dominated iff another point is >= in both coordinates and
/// > in at least one.
fn dominated(points: &[(f64, f64)], i: usize) -> bool {
    let (x, y) = points[i];
    points
        .iter()
        .enumerate()
        .any(|(j, &(px, py))| j != i && px >= x && py >= y && (px > x || py > y))
}

const PERTURB_COLUMNS: [&str; 5] =
    ["bleu_correct", "bleu_random", "bleu_none", "cxmi_correct", "cxmi_random"];

pub fn run(results: &Path, out: &Path) -> Result<()> {
    let models = scan(results)?;

    // Combined summary: model, producing command, metric, configuration,
    // value. Values are copied verbatim from the source files.
    let mut lines = vec!["#model\tsource\tmetric\tconfiguration\tvalue".to_string()];
    let mut pareto_points: Vec<(String, f64, f64)> = Vec::new();
    for m in &models {
        let mut f1_pronoun: Option<f64> = None;
        if let Some((path, text)) = &m.evaluate {
            for line in text.lines() {
                let parts: Vec<&str> = line.split('\t').collect();
                if parts.len() != 3 {
                    bail!("{}: malformed line `{line}`", path.display());
                }
                lines.push(format!("{}\tevaluate\t{}\t{}\t{}", m.name, parts[0], parts[1], parts[2]));
                if parts[0] == "f1.pronoun" {
                    f1_pronoun = Some(parts[2].parse().with_context(|| {
                        format!("{}: non-numeric value in `{line}`", path.display())
                    })?);
                }
            }
        }
        if let Some((path, text)) = &m.perturb {
            for line in text.lines().skip(1) {
                let parts: Vec<&str> = line.split('\t').collect();
                if parts.len() != 1 + PERTURB_COLUMNS.len() {
                    bail!("{}: malformed line `{line}`", path.display());
                }
                for (col, value) in PERTURB_COLUMNS.iter().zip(&parts[1..]) {
                    lines.push(format!("{}\tperturb\t{col}\t{}\t{value}", m.name, parts[0]));
                }
            }
        }
        let mut antecedent: Option<f64> = None;
        if let Some((path, text)) = &m.attribution {
            let map = parse_summary(text)
                .with_context(|| format!("parsing {}", path.display()))?;
            for (key, value) in &map {
                lines.push(format!("{}\tattribute\t{key}\t-\t{value}", m.name));
            }
            if let Some(v) = map.get("mean.antecedent_pct") {
                antecedent = Some(v.parse().with_context(|| {
                    format!("{}: non-numeric mean.antecedent_pct", path.display())
                })?);
            }
        }
        if let (Some(f1), Some(ante)) = (f1_pronoun, antecedent) {
            pareto_points.push((m.name.clone(), f1, ante));
        }
    }

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.tsv"), lines.join("\n") + "\n")?;

    let coords: Vec<(f64, f64)> = pareto_points.iter().map(|p| (p.1, p.2)).collect();
    let mut pareto = vec!["#model\tf1_pronoun\tantecedent_pct\tstatus".to_string()];
    for (i, (name, f1, ante)) in pareto_points.iter().enumerate() {
        let status = if dominated(&coords, i) { "dominated" } else { "non_dominated" };
        pareto.push(format!("{name}\t{}\t{}\t{status}", fixed6(*f1), fixed6(*ante)));
    }
    std::fs::write(out.join("pareto.tsv"), pareto.join("\n") + "\n")?;

    let mut inputs: Vec<(String, PathBuf)> = Vec::new();
    for m in &models {
        for (tag, file) in [
            ("evaluate", &m.evaluate),
            ("perturb", &m.perturb),
            ("attribution", &m.attribution),
        ] {
            if let Some((path, _)) = file {
                inputs.push((format!("{}.{tag}", m.name), path.clone()));
            }
        }
    }
    manifest::write(out, "report", &BTreeMap::new(), &inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_non_dominated() {
        assert!(!dominated(&[(50.0, 2.0)], 0));
    }

    #[test]
    fn strictly_worse_in_both_coordinates_is_dominated() {
        let pts = [(50.0, 2.0), (60.0, 3.0)];
        assert!(dominated(&pts, 0));
        assert!(!dominated(&pts, 1));
    }

    #[test]
    fn trade_offs_and_ties_are_not_dominated() {
        let pts = [(50.0, 3.0), (60.0, 2.0)];
        assert!(!dominated(&pts, 0));
        assert!(!dominated(&pts, 1));
        let equal = [(50.0, 2.0), (50.0, 2.0)];
        assert!(!dominated(&equal, 0));
        assert!(!dominated(&equal, 1));
    }

    #[test]
    fn domination_needs_one_strict_coordinate() {
        let pts = [(50.0, 2.0), (50.0, 2.5)];
        assert!(dominated(&pts, 0));
        assert!(!dominated(&pts, 1));
    }
}
