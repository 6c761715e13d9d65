//! Reproducibility manifests: the full resolved config plus a digest per
//! input file. No timestamps or absolute paths, so a rerun with the same
//! inputs rewrites the manifest byte-identically.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write(
    out_dir: &Path,
    command: &str,
    cfg: &BTreeMap<String, String>,
    inputs: &[(String, std::path::PathBuf)],
) -> Result<()> {
    let mut map = BTreeMap::new();
    map.insert("command".to_string(), command.to_string());
    for (k, v) in cfg {
        map.insert(format!("cfg.{k}"), v.clone());
    }
    for (name, path) in inputs {
        map.insert(format!("input.{name}.sha256"), file_digest(path)?);
    }
    let path = out_dir.join(format!("manifest.{command}.txt"));
    std::fs::write(&path, doctx::metrics::summary_block(&map))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifests_are_sorted_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "payload").unwrap();
        let cfg: BTreeMap<String, String> =
            [("seed".to_string(), "7".to_string()), ("k".to_string(), "5".to_string())].into();
        let inputs = vec![("data".to_string(), input)];
        write(dir.path(), "demo", &cfg, &inputs).unwrap();
        let first = std::fs::read(dir.path().join("manifest.demo.txt")).unwrap();
        write(dir.path(), "demo", &cfg, &inputs).unwrap();
        let second = std::fs::read(dir.path().join("manifest.demo.txt")).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cfg.k=5");
        assert_eq!(lines[1], "cfg.seed=7");
        assert_eq!(lines[2], "command=demo");
        assert!(lines[3].starts_with("input.data.sha256="));
        assert_eq!(lines[3].len(), "input.data.sha256=".len() + 64);
    }
}
