//! Rule-based discourse phenomenon taggers for the synthetic languages.
//!
//! The rules are exact on generator output because the word lists are
//! closed: gendered pronouns, formality markers, and verb variants are
//! recognizable from the token alone, and entity repetition is visible as a
//! repeated noun token within the document.

use crate::corpus::lexicon;
use crate::corpus::{ParallelCorpus, PhenomenonKind, Side};
use std::collections::BTreeMap;

/// One tagged token. Unlike a gold annotation, a tag carries no antecedent;
/// it only asserts the phenomenon at a position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PhenomenonTag {
    pub sent_idx: usize,
    pub tok_idx: usize,
    pub kind: PhenomenonKind,
}

/// Tags for one document, in (sentence, token, kind) order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocTags {
    pub doc_id: String,
    pub tags: Vec<PhenomenonTag>,
}

fn noun_of(tok: &str, side: Side) -> Option<usize> {
    match side {
        Side::Source => lexicon::parse_src_noun(tok),
        Side::Target => lexicon::parse_tgt_noun(tok),
    }
}

/// Tags one side of a document's sentences by lexical rule:
/// - pronoun: a gendered pronoun token (target) or the genderless source
///   pronoun whose most recent noun lies in an earlier sentence;
/// - cohesion: a noun token whose noun already appeared earlier in the doc;
/// - formality: a second-person form token;
/// - verb_form: a suffix-marked verb variant token.
pub fn tag_sentences(sentences: &[Vec<String>], side: Side) -> Vec<PhenomenonTag> {
    let mut tags = Vec::new();
    let mut seen_nouns: Vec<usize> = Vec::new();
    // Sentence index of the most recent noun mention before each position.
    let mut last_noun_sent: Option<usize> = None;
    for (si, sent) in sentences.iter().enumerate() {
        for (ti, tok) in sent.iter().enumerate() {
            let is_pronoun = match side {
                Side::Source => tok == lexicon::SRC_PRONOUN,
                Side::Target => lexicon::gender_of_pronoun(tok).is_some(),
            };
            if is_pronoun {
                if let Some(s) = last_noun_sent {
                    if s < si {
                        tags.push(PhenomenonTag { sent_idx: si, tok_idx: ti, kind: PhenomenonKind::Pronoun });
                    }
                }
            }
            if let Some(n) = noun_of(tok, side) {
                if seen_nouns.contains(&n) {
                    tags.push(PhenomenonTag { sent_idx: si, tok_idx: ti, kind: PhenomenonKind::Cohesion });
                } else {
                    seen_nouns.push(n);
                }
                last_noun_sent = Some(si);
            }
            if side == Side::Target {
                if lexicon::is_formality_marker(tok) {
                    tags.push(PhenomenonTag { sent_idx: si, tok_idx: ti, kind: PhenomenonKind::Formality });
                }
                if lexicon::is_verb_variant(tok) {
                    tags.push(PhenomenonTag { sent_idx: si, tok_idx: ti, kind: PhenomenonKind::VerbForm });
                }
            }
        }
    }
    tags
}

/// Tags every document of the corpus on the given side.
pub fn tag_corpus(corpus: &ParallelCorpus, side: Side) -> Vec<DocTags> {
    corpus
        .docs
        .iter()
        .map(|doc| {
            let sentences: Vec<Vec<String>> =
                doc.sentences.iter().map(|p| p.side(side).to_vec()).collect();
            DocTags { doc_id: doc.doc_id.clone(), tags: tag_sentences(&sentences, side) }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhenomenaStats {
    /// Tagged-token count per phenomenon, target side.
    pub counts: BTreeMap<PhenomenonKind, usize>,
    pub total_tokens: usize,
}

impl PhenomenaStats {
    /// Percentage of tagged tokens out of all target tokens.
    pub fn percentage(&self, kind: PhenomenonKind) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        100.0 * self.counts.get(&kind).copied().unwrap_or(0) as f64 / self.total_tokens as f64
    }
}

/// Target-side phenomena counts and percentages over the corpus.
pub fn phenomena_stats(corpus: &ParallelCorpus) -> PhenomenaStats {
    let mut counts = BTreeMap::new();
    for doc_tags in tag_corpus(corpus, Side::Target) {
        for tag in doc_tags.tags {
            *counts.entry(tag.kind).or_insert(0) += 1;
        }
    }
    PhenomenaStats { counts, total_tokens: corpus.token_count(Side::Target) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GenConfig};
    use std::collections::BTreeSet;

    fn sents(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn all_phenomena_off_produces_zero_tags() {
        let config = GenConfig {
            pronoun_rate: 0.0,
            formality: false,
            cohesion: false,
            verb_form: false,
            ..GenConfig::default()
        };
        let corpus = generate_corpus(&config, 3).unwrap();
        for side in [Side::Source, Side::Target] {
            assert!(tag_corpus(&corpus, side).iter().all(|d| d.tags.is_empty()));
        }
    }

    #[test]
    fn repeated_entity_gets_one_tag_per_repeat() {
        let s = sents(&["m2 w0 b1 .", "m2 w1 b0 .", "m2 w0 b3 ."]);
        let tags: Vec<_> = tag_sentences(&s, Side::Target)
            .into_iter()
            .filter(|t| t.kind == PhenomenonKind::Cohesion)
            .collect();
        assert_eq!(tags.len(), 2);
        assert_eq!((tags[0].sent_idx, tags[0].tok_idx), (1, 0));
        assert_eq!((tags[1].sent_idx, tags[1].tok_idx), (2, 0));
    }

    #[test]
    fn same_sentence_referent_is_not_a_pronoun_tag() {
        let s = sents(&["m0 w0 es .", "es w1 b0 ."]);
        let pronouns: Vec<_> = tag_sentences(&s, Side::Target)
            .into_iter()
            .filter(|t| t.kind == PhenomenonKind::Pronoun)
            .collect();
        // First `es` shares a sentence with its noun; the second refers back.
        assert_eq!(pronouns.len(), 1);
        assert_eq!((pronouns[0].sent_idx, pronouns[0].tok_idx), (1, 0));
    }

    #[test]
    fn tagger_recovers_generator_gold_annotations() {
        let corpus = generate_corpus(&GenConfig::default(), 7).unwrap();
        let tagged = tag_corpus(&corpus, Side::Target);
        let mut gold_total = 0usize;
        let mut gold_found = 0usize;
        for (doc, doc_tags) in corpus.docs.iter().zip(&tagged) {
            let tag_set: BTreeSet<(usize, usize, PhenomenonKind)> = doc_tags
                .tags
                .iter()
                .map(|t| (t.sent_idx, t.tok_idx, t.kind))
                .collect();
            for ann in &doc.annotations {
                if ann.side != Side::Target {
                    continue;
                }
                if ann.kind == PhenomenonKind::Pronoun && ann.distance() == Some(0) {
                    continue;
                }
                gold_total += 1;
                if tag_set.contains(&(ann.sent_idx, ann.tok_idx, ann.kind)) {
                    gold_found += 1;
                }
            }
            // No spurious tags either: every tag matches a gold annotation.
            let gold_set: BTreeSet<(usize, usize, PhenomenonKind)> = doc
                .annotations
                .iter()
                .filter(|a| a.side == Side::Target)
                .map(|a| (a.sent_idx, a.tok_idx, a.kind))
                .collect();
            for t in &tag_set {
                assert!(gold_set.contains(t), "spurious tag {t:?} in {}", doc.doc_id);
            }
        }
        assert!(gold_total > 50, "corpus too sparse for a recovery test");
        let recall = gold_found as f64 / gold_total as f64;
        assert!(recall >= 0.99, "recall {recall} below 0.99");
    }

    #[test]
    fn stats_match_tag_cardinalities_and_token_totals() {
        let corpus = generate_corpus(&GenConfig::default(), 11).unwrap();
        let stats = phenomena_stats(&corpus);
        let tagged = tag_corpus(&corpus, Side::Target);
        for kind in PhenomenonKind::ALL {
            let n: usize = tagged
                .iter()
                .map(|d| d.tags.iter().filter(|t| t.kind == kind).count())
                .sum();
            assert_eq!(stats.counts.get(&kind).copied().unwrap_or(0), n);
            let pct = stats.percentage(kind);
            assert!((pct - 100.0 * n as f64 / stats.total_tokens as f64).abs() < 1e-12);
        }
        assert_eq!(stats.total_tokens, corpus.token_count(Side::Target));
    }

    #[test]
    fn empty_corpus_stats_are_all_zero() {
        let stats = phenomena_stats(&ParallelCorpus::default());
        assert_eq!(stats.total_tokens, 0);
        for kind in PhenomenonKind::ALL {
            assert_eq!(stats.percentage(kind), 0.0);
        }
    }

    #[test]
    fn contrastive_rich_set_has_higher_pronoun_density_than_plain() {
        // A contrastive-style corpus (every document ends in a pronoun
        // episode) against the plain default mix.
        let plain = generate_corpus(&GenConfig::default(), 7).unwrap();
        let rich = generate_corpus(
            &GenConfig {
                pronoun_rate: 0.9,
                sents_per_doc: 4,
                distance_distribution: [1.0, 0.0, 0.0, 0.0, 0.0],
                ..GenConfig::default()
            },
            7,
        )
        .unwrap();
        let p_plain = phenomena_stats(&plain).percentage(PhenomenonKind::Pronoun);
        let p_rich = phenomena_stats(&rich).percentage(PhenomenonKind::Pronoun);
        assert!(p_rich > p_plain, "rich {p_rich} not above plain {p_plain}");
    }
}
