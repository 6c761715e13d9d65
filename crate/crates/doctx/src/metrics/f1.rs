//! Phenomenon-targeted F1 between tagged references and hypotheses.

use super::MetricsError;
use crate::corpus::PhenomenonKind;
use crate::tagger::PhenomenonTag;
use std::collections::BTreeMap;

fn tagged_forms<'a>(
    sentences: &'a [Vec<String>],
    tags: &[PhenomenonTag],
    sent_idx: usize,
    kind: PhenomenonKind,
) -> BTreeMap<&'a str, usize> {
    let mut forms = BTreeMap::new();
    for tag in tags {
        if tag.sent_idx == sent_idx && tag.kind == kind {
            let tok = sentences[tag.sent_idx][tag.tok_idx].as_str();
            *forms.entry(tok).or_insert(0) += 1;
        }
    }
    forms
}

/// Per-phenomenon F1 on the 0-100 scale. For each sentence pair, a match is
/// a reference-tagged word whose surface form is also tagged in the
/// hypothesis; repeated forms match as multisets, each hypothesis occurrence
/// consuming one reference occurrence. Precision counts hypothesis-tagged
/// words, recall counts reference-tagged words. A phenomenon absent from
/// both sides scores 100; absent from exactly one side scores 0.
pub fn phenomena_f1<F>(
    ref_sentences: &[Vec<String>],
    ref_tags: &[PhenomenonTag],
    hyp_sentences: &[Vec<String>],
    tagger: F,
) -> Result<BTreeMap<PhenomenonKind, f64>, MetricsError>
where
    F: Fn(&[Vec<String>]) -> Vec<PhenomenonTag>,
{
    if ref_sentences.len() != hyp_sentences.len() {
        return Err(MetricsError::Pairing {
            hyps: hyp_sentences.len(),
            refs: ref_sentences.len(),
        });
    }
    let hyp_tags = tagger(hyp_sentences);
    let mut out = BTreeMap::new();
    for kind in PhenomenonKind::ALL {
        let mut matches = 0usize;
        let mut ref_total = 0usize;
        let mut hyp_total = 0usize;
        for si in 0..ref_sentences.len() {
            let r = tagged_forms(ref_sentences, ref_tags, si, kind);
            let h = tagged_forms(hyp_sentences, &hyp_tags, si, kind);
            ref_total += r.values().sum::<usize>();
            hyp_total += h.values().sum::<usize>();
            for (form, &rc) in &r {
                matches += rc.min(h.get(form).copied().unwrap_or(0));
            }
        }
        let f1 = if ref_total == 0 && hyp_total == 0 {
            100.0
        } else if matches == 0 {
            0.0
        } else {
            let p = matches as f64 / hyp_total as f64;
            let r = matches as f64 / ref_total as f64;
            100.0 * 2.0 * p * r / (p + r)
        };
        out.insert(kind, f1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;
    use crate::tagger::tag_sentences;

    fn sents(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect()
    }

    fn target_tagger(s: &[Vec<String>]) -> Vec<PhenomenonTag> {
        tag_sentences(s, Side::Target)
    }

    #[test]
    fn identical_hypothesis_scores_one_hundred_everywhere() {
        let refs = sents(&["m0 w1 b2 .", "es w1x b0 .", "du w0 b1 .", "m0 w1 b1 ."]);
        let tags = target_tagger(&refs);
        let f1 = phenomena_f1(&refs, &tags, &refs, target_tagger).unwrap();
        for kind in PhenomenonKind::ALL {
            assert_eq!(f1[&kind], 100.0, "{kind:?}");
        }
    }

    #[test]
    fn dropping_every_tagged_word_scores_zero() {
        let refs = sents(&["m0 w0 b0 .", "es w0 b1 ."]);
        let tags = target_tagger(&refs);
        let hyps = sents(&["m0 w0 b0 .", "b2 w0 b1 ."]);
        let f1 = phenomena_f1(&refs, &tags, &hyps, target_tagger).unwrap();
        assert_eq!(f1[&PhenomenonKind::Pronoun], 0.0);
    }

    #[test]
    fn one_extra_tagged_word_gives_two_thirds() {
        // One reference-tagged pronoun; the hypothesis tags it plus a second
        // pronoun token: precision 1/2, recall 1, F1 2/3.
        let refs = sents(&["m0 w0 b0 .", "es w0 b0 ."]);
        let tags = target_tagger(&refs);
        let hyps = sents(&["m0 w0 b0 .", "es w0 er ."]);
        let f1 = phenomena_f1(&refs, &tags, &hyps, target_tagger).unwrap();
        assert!((f1[&PhenomenonKind::Pronoun] - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn multiset_matching_consumes_occurrences() {
        // Reference tags `es` twice; hypothesis tags it once. Match = 1,
        // precision 1, recall 1/2.
        let refs = sents(&["m0 w0 b0 .", "es w0 es .", "es w1 b0 ."]);
        let tags = target_tagger(&refs);
        let hyps = sents(&["m0 w0 b0 .", "es w0 b1 .", "b0 w1 b0 ."]);
        let f1 = phenomena_f1(&refs, &tags, &hyps, target_tagger).unwrap();
        // Reference has pronoun tags at (1,0), (1,2), (2,0); hypothesis at (1,0).
        let expect = 100.0 * 2.0 * (1.0) * (1.0 / 3.0) / (1.0 + 1.0 / 3.0);
        assert!((f1[&PhenomenonKind::Pronoun] - expect).abs() < 1e-9);
    }

    #[test]
    fn pairing_mismatch_is_an_error() {
        let refs = sents(&["m0 w0 b0 ."]);
        let tags = target_tagger(&refs);
        assert!(matches!(
            phenomena_f1(&refs, &tags, &[], target_tagger),
            Err(MetricsError::Pairing { .. })
        ));
    }
}
