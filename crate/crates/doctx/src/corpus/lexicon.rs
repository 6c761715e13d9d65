//! Closed word lists of the synthetic language pair.
//!
//! Source tokens: nouns `n<i>`, verbs `v<i>`, adverbs `a<i>`, pronoun `it`,
//! second person `you`, stop `.`. Target tokens align positionally: nouns
//! `m<i>`, verbs `w<i>` (suffix variant `w<i>x`), adverbs `b<i>`, gendered
//! pronouns `er`/`sie`/`es`, second person `du` (informal) or `vu` (polite),
//! stop `.`. Noun gender is fixed by index, so the correct target pronoun is
//! a pure lookup from the antecedent noun.

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gender {
    Masculine,
    Feminine,
    Neuter,
}

pub const SRC_PRONOUN: &str = "it";
pub const SRC_YOU: &str = "you";
pub const TGT_YOU_INFORMAL: &str = "du";
pub const TGT_YOU_POLITE: &str = "vu";
pub const STOP: &str = ".";

/// Target pronouns in gender order (masculine, feminine, neuter).
pub const PRONOUNS: [&str; 3] = ["er", "sie", "es"];

pub fn noun_gender(idx: usize) -> Gender {
    match idx % 3 {
        0 => Gender::Masculine,
        1 => Gender::Feminine,
        _ => Gender::Neuter,
    }
}

pub fn pronoun_for(g: Gender) -> &'static str {
    match g {
        Gender::Masculine => PRONOUNS[0],
        Gender::Feminine => PRONOUNS[1],
        Gender::Neuter => PRONOUNS[2],
    }
}

pub fn gender_of_pronoun(tok: &str) -> Option<Gender> {
    match tok {
        "er" => Some(Gender::Masculine),
        "sie" => Some(Gender::Feminine),
        "es" => Some(Gender::Neuter),
        _ => None,
    }
}

pub fn src_noun(i: usize) -> String {
    format!("n{i}")
}

pub fn tgt_noun(i: usize) -> String {
    format!("m{i}")
}

pub fn src_verb(i: usize) -> String {
    format!("v{i}")
}

pub fn tgt_verb(i: usize, variant: bool) -> String {
    if variant {
        format!("w{i}x")
    } else {
        format!("w{i}")
    }
}

pub fn src_adverb(i: usize) -> String {
    format!("a{i}")
}

pub fn tgt_adverb(i: usize) -> String {
    format!("b{i}")
}

fn indexed(tok: &str, prefix: char) -> Option<usize> {
    let rest = tok.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

pub fn parse_src_noun(tok: &str) -> Option<usize> {
    indexed(tok, 'n')
}

pub fn parse_tgt_noun(tok: &str) -> Option<usize> {
    indexed(tok, 'm')
}

/// True for `w<i>x`, the suffix-marked verb variant.
pub fn is_verb_variant(tok: &str) -> bool {
    tok.strip_prefix('w')
        .and_then(|r| r.strip_suffix('x'))
        .is_some_and(|mid| !mid.is_empty() && mid.bytes().all(|b| b.is_ascii_digit()))
}

pub fn is_formality_marker(tok: &str) -> bool {
    tok == TGT_YOU_INFORMAL || tok == TGT_YOU_POLITE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pronoun_lookup_round_trips_gender() {
        for i in 0..9 {
            let g = noun_gender(i);
            assert_eq!(gender_of_pronoun(pronoun_for(g)), Some(g));
        }
    }

    #[test]
    fn token_parsers_accept_only_their_shape() {
        assert_eq!(parse_tgt_noun("m12"), Some(12));
        assert_eq!(parse_tgt_noun("m"), None);
        assert_eq!(parse_tgt_noun("n3"), None);
        assert_eq!(parse_src_noun("n3"), Some(3));
        assert!(is_verb_variant("w0x"));
        assert!(!is_verb_variant("w0"));
        assert!(!is_verb_variant("wx"));
        assert!(is_formality_marker("du") && is_formality_marker("vu"));
        assert!(!is_formality_marker("you"));
    }
}
