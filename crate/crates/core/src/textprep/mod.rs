//! Preprocessing: normalisation, tokenisation, vocabulary, language routing and
//! pattern-based entity extraction.

mod entities;
mod language;
mod vocab;

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

pub use entities::{extract_entities, EntityKind, EntityMention};
pub use language::{
    cosine, detect_language, trigram_profile, Detection, LanguageProfile, DEFAULT_TOP_K, MIN_DETECT_CHARS,
};
pub use vocab::{Vocabulary, NUM, PAD, PAD_ID, SPECIALS, UNK, UNK_ID, URL};

/// Default encoder input length in tokens.
pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedText {
    pub text: String,
    /// Steps that changed the text, in application order.
    pub applied_steps: Vec<&'static str>,
}

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:[a-z][a-z0-9+.-]*://|www\.)\S+").expect("url regex"))
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+(?:[.,]\d+)*\b").expect("number regex"))
}

/// Lowercases, strips control characters, replaces URLs with `<url>` and
/// standalone numbers with `<num>`, and collapses whitespace. Numbers that are
/// part of a price, rating or product code are left in place so that
/// [`extract_entities`] still finds them. Idempotent.
pub fn normalize(raw: &str) -> NormalizedText {
    let mut steps = Vec::new();
    let mut text = raw.to_lowercase();
    if text != raw {
        steps.push("lowercase");
    }

    let cleaned: String = text
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_control() {
                None
            } else {
                Some(c)
            }
        })
        .collect();
    if cleaned != text {
        steps.push("strip_control");
    }
    text = cleaned;

    if url_re().is_match(&text) {
        text = url_re().replace_all(&text, URL).into_owned();
        steps.push("replace_urls");
    }

    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed != text {
        steps.push("collapse_whitespace");
    }
    text = collapsed;

    let protected = extract_entities(&text);
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in number_re().find_iter(&text) {
        if protected.iter().any(|e| e.start < m.end() && m.start() < e.end) {
            continue;
        }
        out.push_str(&text[last..m.start()]);
        out.push_str(NUM);
        last = m.end();
    }
    if last > 0 {
        out.push_str(&text[last..]);
        text = out;
        steps.push("replace_numbers");
    }

    NormalizedText {
        text,
        applied_steps: steps,
    }
}

fn is_atomic(chunk: &str) -> bool {
    chunk == URL || chunk == NUM
}

/// Whitespace split, then leading and trailing punctuation peeled off one
/// character at a time. `<url>` and `<num>` are never split.
pub fn tokenize(text: &NormalizedText) -> Vec<String> {
    tokenize_str(&text.text)
}

pub fn tokenize_str(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut core = chunk;
        let mut trailing = Vec::new();
        loop {
            if is_atomic(core) || core.starts_with(URL) || core.starts_with(NUM) {
                break;
            }
            match core.chars().next() {
                Some(c) if !c.is_alphanumeric() => {
                    tokens.push(c.to_string());
                    core = &core[c.len_utf8()..];
                }
                _ => break,
            }
        }
        loop {
            if is_atomic(core) || core.ends_with(URL) || core.ends_with(NUM) {
                break;
            }
            match core.chars().next_back() {
                Some(c) if !c.is_alphanumeric() => {
                    trailing.push(c.to_string());
                    core = &core[..core.len() - c.len_utf8()];
                }
                _ => break,
            }
        }
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

/// normalize -> tokenize -> encode in one call. Returns the ids and the true length.
pub fn encode_text(raw: &str, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    vocab.encode(&tokenize(&normalize(raw)), max_len)
}
