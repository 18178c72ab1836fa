use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{softmax, Scalar};

const SEED_TERMS: &[(&str, f64)] = &[
    ("great", 1.0),
    ("excellent", 1.0),
    ("love", 1.0),
    ("amazing", 1.0),
    ("fantastic", 1.0),
    ("wonderful", 1.0),
    ("perfect", 1.0),
    ("happy", 0.8),
    ("awesome", 1.0),
    ("recommend", 0.8),
    ("good", 0.6),
    ("nice", 0.6),
    ("best", 0.9),
    ("reliable", 0.7),
    ("satisfied", 0.8),
    ("terrible", -1.0),
    ("awful", -1.0),
    ("hate", -1.0),
    ("horrible", -1.0),
    ("disappointed", -0.9),
    ("worst", -1.0),
    ("poor", -0.8),
    ("broken", -0.8),
    ("useless", -0.9),
    ("bad", -0.7),
    ("refund", -0.6),
    ("defective", -0.9),
    ("waste", -0.9),
    ("junk", -0.9),
    ("faulty", -0.8),
];

/// Signed term weights with a neutral band.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconModel {
    weights: HashMap<String, f64>,
    neutral_band: f64,
}

impl Default for LexiconModel {
    fn default() -> Self {
        LexiconModel {
            weights: SEED_TERMS.iter().map(|(t, w)| (t.to_string(), *w)).collect(),
            neutral_band: 0.1,
        }
    }
}

impl LexiconModel {
    pub fn new(weights: HashMap<String, f64>, neutral_band: f64) -> Result<Self> {
        if !(neutral_band >= 0.0 && neutral_band.is_finite()) {
            return Err(Error::InvalidInput("neutral band must be finite and >= 0".into()));
        }
        if let Some((t, _)) = weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(Error::InvalidInput(format!("lexicon weight of `{t}` is not finite")));
        }
        Ok(LexiconModel { weights, neutral_band })
    }

    pub fn neutral_band(&self) -> f64 {
        self.neutral_band
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Parses `term<TAB>weight` lines; `#` starts a comment line.
    pub fn from_tsv(text: &str, neutral_band: f64) -> Result<Self> {
        let mut weights = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (term, w) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidInput(format!("lexicon line {}: expected term<TAB>weight", n + 1)))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("lexicon line {}: bad weight", n + 1)))?;
            weights.insert(term.trim().to_lowercase(), w);
        }
        Self::new(weights, neutral_band)
    }

    pub fn load(path: impl AsRef<Path>, neutral_band: f64) -> Result<Self> {
        let path = path.as_ref();
        Self::from_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?, neutral_band)
    }

    /// Adds (or overrides) terms from another lexicon.
    pub fn extend(&mut self, other: &LexiconModel) {
        self.weights.extend(other.weights.iter().map(|(k, v)| (k.clone(), *v)));
    }

    /// Mean weight of the matched terms, 0 when nothing matches.
    pub fn score(&self, tokens: &[String]) -> f64 {
        let matched: Vec<f64> = tokens.iter().filter_map(|t| self.weight(t)).collect();
        if matched.is_empty() {
            0.0
        } else {
            matched.iter().sum::<f64>() / matched.len() as f64
        }
    }
}

/// Maps the lexicon score `s` to a distribution with a temperature-1 softmax over
/// the logits `(-s - ε, 0, s - ε)`: Positive wins iff `s > ε`, Negative iff
/// `s < -ε`, Neutral otherwise.
pub fn lexicon_classify<T: Scalar>(tokens: &[String], model: &LexiconModel) -> [T; 3] {
    let s = model.score(tokens);
    let eps = model.neutral_band;
    let p = softmax(&[T::lit(-s - eps), T::zero(), T::lit(s - eps)]);
    [p[0], p[1], p[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::argmax;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn no_match_is_neutral() {
        let p: [f64; 3] = lexicon_classify(&toks("the box arrived"), &LexiconModel::default());
        assert_eq!(argmax(&p), 1);
    }

    #[test]
    fn positive_terms_win() {
        let p: [f64; 3] = lexicon_classify(&toks("great excellent love"), &LexiconModel::default());
        assert_eq!(argmax(&p), 2);
        let p: [f64; 3] = lexicon_classify(&toks("awful junk"), &LexiconModel::default());
        assert_eq!(argmax(&p), 0);
    }

    #[test]
    fn tsv_parsing() {
        let m = LexiconModel::from_tsv("# seed\nsplendid\t0.9\nMEH\t-0.2\n", 0.05).unwrap();
        assert_eq!(m.weight("meh"), Some(-0.2));
        assert!(LexiconModel::from_tsv("broken line", 0.1).is_err());
        assert!(LexiconModel::new(HashMap::new(), -1.0).is_err());
    }
}
