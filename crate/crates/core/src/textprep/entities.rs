use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Price,
    Rating,
    ProductCode,
}

/// An entity found in normalised text. `start..end` are byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub kind: EntityKind,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

const NUM: &str = r"\d+(?:[.,]\d+)*";

fn price_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(
            r"[$€£]\s?{NUM}|\b(?:usd|eur|gbp)\s?{NUM}\b|\b{NUM}\s?(?:usd|eur|gbp|dollars|euros|pounds)\b"
        ))
        .expect("price regex")
    })
}

fn rating_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+(?:\.\d)?\s?/\s?(?:5|10)\b|\b\d(?:\.\d)?\s?stars?\b").expect("rating regex"))
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}]+(?:-[\p{L}\p{N}]+)*").expect("word regex"))
}

fn is_product_code(tok: &str) -> bool {
    let letters = tok.chars().filter(|c| c.is_alphabetic()).count();
    let digits = tok.chars().filter(|c| c.is_ascii_digit()).count();
    letters >= 2 && digits >= 2
}

/// Left-to-right, non-overlapping matches of each kind (kinds may overlap each other).
pub fn extract_entities(text: &str) -> Vec<EntityMention> {
    let mut out = Vec::new();
    let mut push = |kind, m: regex::Match<'_>| {
        out.push(EntityMention {
            kind,
            start: m.start(),
            end: m.end(),
            surface: m.as_str().to_string(),
        })
    };
    for m in price_re().find_iter(text) {
        push(EntityKind::Price, m);
    }
    for m in rating_re().find_iter(text) {
        push(EntityKind::Rating, m);
    }
    for m in word_re().find_iter(text) {
        if is_product_code(m.as_str()) {
            push(EntityKind::ProductCode, m);
        }
    }
    out.sort_by_key(|e| (e.start, e.end));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(EntityKind, String)> {
        extract_entities(text)
            .into_iter()
            .map(|e| (e.kind, e.surface))
            .collect()
    }

    #[test]
    fn price_with_symbol() {
        assert_eq!(kinds("$19.99 well spent"), vec![(EntityKind::Price, "$19.99".into())]);
        assert_eq!(kinds("paid 25 usd"), vec![(EntityKind::Price, "25 usd".into())]);
    }

    #[test]
    fn ratings() {
        assert_eq!(kinds("gave it 4/5"), vec![(EntityKind::Rating, "4/5".into())]);
        assert_eq!(kinds("solid 4 stars"), vec![(EntityKind::Rating, "4 stars".into())]);
    }

    #[test]
    fn product_codes_need_two_letters_and_two_digits() {
        assert_eq!(
            kinds("model xk-200 works"),
            vec![(EntityKind::ProductCode, "xk-200".into())]
        );
        assert!(kinds("x200 and ab1").is_empty());
    }
}
