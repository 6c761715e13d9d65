//! Synthetic corpus generation.

use super::lexicon;
use super::{
    Annotation, AntecedentRef, CorpusError, ParallelCorpus, ParallelDocument, PhenomenonKind,
    SentencePair, Side,
};
use crate::rng::Prng;

/// Generator configuration. `pronoun_rate` is the probability that an
/// unconstrained sentence slot starts a pronoun episode: a noun-introducing
/// sentence, `distance - 1` noun-free filler sentences, then a sentence whose
/// subject is the genderless source pronoun. Keeping the gap noun-free makes
/// the introduced noun the unique most recent noun when the pronoun appears.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n_docs: usize,
    pub sents_per_doc: usize,
    pub n_nouns: usize,
    pub n_verbs: usize,
    pub n_adverbs: usize,
    pub pronoun_rate: f64,
    /// Weights for antecedent sentence distances 1 through 5. Must sum to 1.
    pub distance_distribution: [f64; 5],
    pub formality: bool,
    pub cohesion: bool,
    pub verb_form: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_docs: 32,
            sents_per_doc: 12,
            n_nouns: 9,
            n_verbs: 8,
            n_adverbs: 6,
            pronoun_rate: 0.35,
            distance_distribution: [0.2; 5],
            formality: true,
            cohesion: true,
            verb_form: true,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| Err(CorpusError::Validation(msg));
        if self.n_docs == 0 || self.sents_per_doc == 0 {
            return fail("n_docs and sents_per_doc must be positive".into());
        }
        if self.n_nouns == 0 || self.n_verbs == 0 || self.n_adverbs == 0 {
            return fail("vocabulary sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.pronoun_rate) {
            return fail(format!("pronoun_rate {} outside [0,1]", self.pronoun_rate));
        }
        if self.distance_distribution.iter().any(|&w| w < 0.0) {
            return fail("distance_distribution has a negative weight".into());
        }
        let sum: f64 = self.distance_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("distance_distribution sums to {sum}, expected 1"));
        }
        Ok(())
    }
}

struct Pending {
    noun: usize,
    due: usize,
    intro_sent: usize,
}

struct DocBuilder<'a> {
    config: &'a GenConfig,
    rng: Prng,
    polite: bool,
    verb_variant: bool,
    sentences: Vec<SentencePair>,
    annotations: Vec<Annotation>,
    seen_nouns: Vec<usize>,
}

impl DocBuilder<'_> {
    /// Emits one sentence of the fixed frame [subject, verb, adverb(s), "."].
    /// Subject tokens are supplied by the caller; everything after position 0
    /// is noun-free, so subject position is the only place entities appear.
    fn emit(&mut self, src_subj: String, tgt_subj: String) {
        let verb = self.rng.below(self.config.n_verbs);
        let adv = self.rng.below(self.config.n_adverbs);
        let mut src = vec![src_subj, lexicon::src_verb(verb), lexicon::src_adverb(adv)];
        let mut tgt = vec![
            tgt_subj,
            lexicon::tgt_verb(verb, self.verb_variant),
            lexicon::tgt_adverb(adv),
        ];
        if self.rng.uniform() < 0.3 {
            let adv2 = self.rng.below(self.config.n_adverbs);
            src.push(lexicon::src_adverb(adv2));
            tgt.push(lexicon::tgt_adverb(adv2));
        }
        src.push(lexicon::STOP.into());
        tgt.push(lexicon::STOP.into());
        if self.verb_variant {
            self.annotations.push(Annotation {
                sent_idx: self.sentences.len(),
                tok_idx: 1,
                kind: PhenomenonKind::VerbForm,
                side: Side::Target,
                antecedent: None,
            });
        }
        self.sentences.push(SentencePair { src, tgt });
    }

    fn emit_noun(&mut self, noun: usize) {
        let sent_idx = self.sentences.len();
        if self.seen_nouns.contains(&noun) {
            self.annotations.push(Annotation {
                sent_idx,
                tok_idx: 0,
                kind: PhenomenonKind::Cohesion,
                side: Side::Target,
                antecedent: None,
            });
        } else {
            self.seen_nouns.push(noun);
        }
        self.emit(lexicon::src_noun(noun), lexicon::tgt_noun(noun));
    }

    fn emit_filler(&mut self) {
        if self.config.formality && self.rng.below(2) == 1 {
            let tgt_you = if self.polite {
                lexicon::TGT_YOU_POLITE
            } else {
                lexicon::TGT_YOU_INFORMAL
            };
            self.annotations.push(Annotation {
                sent_idx: self.sentences.len(),
                tok_idx: 0,
                kind: PhenomenonKind::Formality,
                side: Side::Target,
                antecedent: None,
            });
            self.emit(lexicon::SRC_YOU.into(), tgt_you.into());
        } else {
            let adv = self.rng.below(self.config.n_adverbs);
            self.emit(lexicon::src_adverb(adv), lexicon::tgt_adverb(adv));
        }
    }

    fn emit_pronoun(&mut self, pending: &Pending) {
        let sent_idx = self.sentences.len();
        let ante = AntecedentRef {
            sent_idx: pending.intro_sent,
            tok_start: 0,
            tok_end: 1,
        };
        for side in [Side::Source, Side::Target] {
            self.annotations.push(Annotation {
                sent_idx,
                tok_idx: 0,
                kind: PhenomenonKind::Pronoun,
                side,
                antecedent: Some(ante),
            });
        }
        let g = lexicon::noun_gender(pending.noun);
        self.emit(lexicon::SRC_PRONOUN.into(), lexicon::pronoun_for(g).into());
    }

    /// A noun usable in this slot, or None when cohesion is off and every
    /// noun has already been introduced (repeats would be untagged cohesion).
    fn pick_noun(&mut self) -> Option<usize> {
        if self.config.cohesion {
            Some(self.rng.below(self.config.n_nouns))
        } else {
            let unseen: Vec<usize> =
                (0..self.config.n_nouns).filter(|n| !self.seen_nouns.contains(n)).collect();
            if unseen.is_empty() {
                None
            } else {
                Some(unseen[self.rng.below(unseen.len())])
            }
        }
    }

    fn build(mut self) -> (Vec<SentencePair>, Vec<Annotation>, usize) {
        let total = self.config.sents_per_doc;
        let mut pending: Option<Pending> = None;
        let mut n_pronouns = 0;
        for s in 0..total {
            if let Some(p) = &pending {
                if p.due == s {
                    let p = pending.take().unwrap();
                    self.emit_pronoun(&p);
                    n_pronouns += 1;
                } else {
                    self.emit_filler();
                }
                continue;
            }
            if self.config.pronoun_rate > 0.0 && self.rng.uniform() < self.config.pronoun_rate {
                let d = 1 + self.rng.categorical(&self.config.distance_distribution);
                if s + d < total {
                    if let Some(noun) = self.pick_noun() {
                        self.emit_noun(noun);
                        pending = Some(Pending { noun, due: s + d, intro_sent: s });
                        continue;
                    }
                }
            }
            // Unconstrained slot: plain noun mention or filler.
            if self.rng.uniform() < 0.4 {
                if let Some(noun) = self.pick_noun() {
                    self.emit_noun(noun);
                    continue;
                }
            }
            self.emit_filler();
        }
        (self.sentences, self.annotations, n_pronouns)
    }
}

/// Generates a document-level parallel corpus with gold annotations.
/// Pure in `(config, seed)`: identical inputs produce identical corpora.
pub fn generate_corpus(config: &GenConfig, seed: u64) -> Result<ParallelCorpus, CorpusError> {
    config.validate()?;
    let root = Prng::new(seed).fork("corpus.generate");
    let mut docs = Vec::with_capacity(config.n_docs);
    let mut total_pronouns = 0;
    for di in 0..config.n_docs {
        let mut rng = root.fork_idx("doc", di as u64);
        let polite = config.formality && rng.below(2) == 1;
        let verb_variant = config.verb_form && rng.below(2) == 1;
        let builder = DocBuilder {
            config,
            rng,
            polite,
            verb_variant,
            sentences: Vec::new(),
            annotations: Vec::new(),
            seen_nouns: Vec::new(),
        };
        let (sentences, annotations, n_pronouns) = builder.build();
        total_pronouns += n_pronouns;
        docs.push(ParallelDocument {
            doc_id: format!("d{di:04}"),
            sentences,
            annotations,
        });
    }
    if config.pronoun_rate > 0.0 && total_pronouns == 0 {
        return Err(CorpusError::Validation(
            "pronoun_rate is positive but no pronoun instance fit the document length".into(),
        ));
    }
    Ok(ParallelCorpus { docs })
}
