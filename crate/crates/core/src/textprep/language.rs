//! Character-trigram language identification with cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Texts shorter than this many characters are never routed to a language.
pub const MIN_DETECT_CHARS: usize = 20;
pub const DEFAULT_TOP_K: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageProfile {
    pub tag: String,
    /// Relative trigram frequencies, truncated to the top-K trigrams.
    pub trigrams: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detection {
    Language { tag: String, similarity: f64 },
    Unknown { best_similarity: Option<f64> },
}

impl Detection {
    pub fn tag(&self) -> Option<&str> {
        match self {
            Detection::Language { tag, .. } => Some(tag),
            Detection::Unknown { .. } => None,
        }
    }
}

fn trigram_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for word in text.split_whitespace() {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars().flat_map(char::to_lowercase))
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    counts
}

/// Relative trigram frequencies of a text, optionally truncated to the `top_k`
/// most frequent (ties broken lexicographically). Frequencies are relative to
/// all trigrams, so a truncated profile sums to at most 1.
pub fn trigram_profile(text: &str, top_k: Option<usize>) -> BTreeMap<String, f64> {
    let counts = trigram_counts(text);
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        ranked.truncate(k);
    }
    ranked.into_iter().map(|(g, c)| (g, c as f64 / total as f64)).collect()
}

pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

impl LanguageProfile {
    pub fn build(tag: impl Into<String>, corpus: &str, top_k: usize) -> Self {
        LanguageProfile {
            tag: tag.into(),
            trigrams: trigram_profile(corpus, Some(top_k)),
        }
    }

    /// Profile built from a bundled English sample text.
    pub fn english() -> Self {
        Self::build("en", include_str!("english_sample.txt"), DEFAULT_TOP_K)
    }

    /// `tag` header line, then `trigram<TAB>frequency` lines in descending frequency.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(&String, &f64)> = self.trigrams.iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let mut out = format!("{}\n", self.tag);
        for (g, f) in rows {
            out.push_str(&format!("{g}\t{f:?}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let tag = lines
            .next()
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::InvalidInput("language profile lacks a tag header".into()))?
            .to_string();
        let mut trigrams = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (g, f) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::InvalidInput(format!("profile line {}: missing tab", n + 2)))?;
            let f: f64 = f
                .parse()
                .map_err(|_| Error::InvalidInput(format!("profile line {}: bad frequency", n + 2)))?;
            if !f.is_finite() || f < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "profile line {}: negative frequency",
                    n + 2
                )));
            }
            trigrams.insert(g.to_string(), f);
        }
        Ok(LanguageProfile { tag, trigrams })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Best-matching profile by cosine similarity; ties go to the lexicographically
/// smallest tag.
pub fn detect_language(text: &str, profiles: &[LanguageProfile], threshold: f64) -> Detection {
    if text.chars().count() < MIN_DETECT_CHARS || profiles.is_empty() {
        return Detection::Unknown { best_similarity: None };
    }
    let probe = trigram_profile(text, None);
    let scores: BTreeMap<&str, f64> = profiles
        .iter()
        .map(|p| (p.tag.as_str(), cosine(&probe, &p.trigrams)))
        .collect();
    let mut best: Option<(&str, f64)> = None;
    for (tag, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((tag, s));
        }
    }
    let (tag, similarity) = best.expect("at least one profile");
    if similarity < threshold {
        Detection::Unknown {
            best_similarity: Some(similarity),
        }
    } else {
        Detection::Language {
            tag: tag.to_string(),
            similarity,
        }
    }
}
