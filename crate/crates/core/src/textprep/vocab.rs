use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const URL: &str = "<url>";
pub const NUM: &str = "<num>";
pub const SPECIALS: [&str; 4] = [PAD, UNK, URL, NUM];
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token <-> id mapping. Ids are dense; the four special tokens take 0..4.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    to_id: HashMap<String, usize>,
    tokens: Vec<String>,
    min_frequency: usize,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_frequency` times (clamped to 1), ordered by
    /// descending frequency and then lexicographically.
    pub fn build<'a, I, S>(corpus: I, min_frequency: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a String>,
    {
        let min_frequency = min_frequency.max(1);
        let mut freq: HashMap<&'a str, usize> = HashMap::new();
        for doc in corpus {
            for tok in doc {
                if !SPECIALS.contains(&tok.as_str()) {
                    *freq.entry(tok.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = freq.into_iter().filter(|(_, c)| *c >= min_frequency).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens, min_frequency)
    }

    fn from_tokens(tokens: Vec<String>, min_frequency: usize) -> Self {
        let to_id = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            to_id,
            tokens,
            min_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Unknown tokens map to `<unk>`; the result is truncated to `max_len`.
    pub fn encode(&self, tokens: &[String], max_len: usize) -> Vec<usize> {
        tokens
            .iter()
            .take(max_len.max(1))
            .map(|t| self.id(t).unwrap_or(UNK_ID))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK).to_string()).collect()
    }

    /// `token<TAB>id` lines in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens: Vec<Option<String>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = || Error::InvalidInput(format!("vocabulary line {}: expected token<TAB>id", n + 1));
            let (tok, id) = line.rsplit_once('\t').ok_or_else(bad)?;
            let id: usize = id.parse().map_err(|_| bad())?;
            if tokens.len() <= id {
                tokens.resize(id + 1, None);
            }
            if tokens[id].replace(tok.to_string()).is_some() {
                return Err(Error::InvalidInput(format!("vocabulary id {id} assigned twice")));
            }
        }
        let tokens: Vec<String> = tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| Error::InvalidInput(format!("vocabulary id {i} missing"))))
            .collect::<Result<_>>()?;
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()].iter().zip(SPECIALS).any(|(a, b)| a != b) {
            return Err(Error::InvalidInput(
                "vocabulary must start with the special tokens".into(),
            ));
        }
        let vocab = Self::from_tokens(tokens, 1);
        if vocab.to_id.len() != vocab.tokens.len() {
            return Err(Error::InvalidInput("vocabulary token listed twice".into()));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// SHA-256 of the persisted form, hex encoded. Checkpoints record it.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_tsv().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn empty_corpus_gives_specials_only() {
        let v = Vocabulary::build(Vec::<Vec<String>>::new().iter(), 1);
        assert_eq!(v.tokens(), &SPECIALS.map(String::from));
        assert_eq!(v.id(PAD), Some(0));
    }

    #[test]
    fn min_frequency_filters() {
        let docs = [toks("a a b")];
        let v = Vocabulary::build(docs.iter(), 2);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), None);
    }

    #[test]
    fn encode_maps_unknown_and_truncates() {
        let v = Vocabulary::build([toks("a")].iter(), 1);
        assert_eq!(v.encode(&toks("a zzz"), 128), vec![4, UNK_ID]);
        let long: Vec<String> = (0..200).map(|_| "a".to_string()).collect();
        assert_eq!(v.encode(&long, 128).len(), 128);
    }

    #[test]
    fn tsv_round_trip_and_hash() {
        let v = Vocabulary::build([toks("x y y z z z")].iter(), 1);
        let back = Vocabulary::from_tsv(&v.to_tsv()).unwrap();
        assert_eq!(back.tokens(), v.tokens());
        assert_eq!(back.content_hash(), v.content_hash());
        assert!(Vocabulary::from_tsv("a\t0\n").is_err());
    }
}
