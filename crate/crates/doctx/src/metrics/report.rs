//! Report formats: metric lines and key=value summaries.

use std::collections::BTreeMap;

/// One report record: `metric TAB configuration TAB value`, value in
/// 6-decimal fixed notation.
pub fn metric_line(metric: &str, configuration: &str, value: f64) -> String {
    format!("{metric}\t{configuration}\t{value:.6}")
}

/// Structured summary block: one `key=value` line per entry, sorted by key.
pub fn summary_block(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k}={v}\n"));
    }
    out
}

/// Parses a summary block back into its entries. Blank lines are ignored;
/// anything else without `=` is an error.
pub fn parse_summary(text: &str) -> Result<BTreeMap<String, String>, super::MetricsError> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            super::MetricsError::Config(format!("summary line {line:?} is not key=value"))
        })?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_lines_use_fixed_six_decimals() {
        assert_eq!(metric_line("bleu", "concat_2to2,k=5", 48.8923022), "bleu\tconcat_2to2,k=5\t48.892302");
        assert_eq!(metric_line("cxmi", "none", 0.5), "cxmi\tnone\t0.500000");
    }

    #[test]
    fn summary_round_trips() {
        let entries: BTreeMap<String, String> = [
            ("bleu".to_string(), "12.345678".to_string()),
            ("arch".to_string(), "sentence".to_string()),
        ]
        .into_iter()
        .collect();
        let text = summary_block(&entries);
        assert_eq!(text, "arch=sentence\nbleu=12.345678\n");
        assert_eq!(parse_summary(&text).unwrap(), entries);
        assert!(parse_summary("no separator here").is_err());
    }
}
