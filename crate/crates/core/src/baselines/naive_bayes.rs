//! Multinomial Naive Bayes over bag-of-words with Laplace smoothing.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DomainId, Sentiment};
use crate::error::{Error, Result};
use crate::scalar::{softmax, Scalar};
use crate::textprep;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel<T> {
    smoothing: f64,
    log_priors: [T; 3],
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    /// `[class][token]` log P(token | class).
    log_likelihoods: [Vec<T>; 3],
}

/// Trains on `(tokens, label)` pairs. Every class must be present.
pub fn nb_train<T: Scalar>(corpus: &[(Vec<String>, Sentiment)], smoothing: f64) -> Result<NaiveBayesModel<T>> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidInput("smoothing must be finite and >= 0".into()));
    }
    let mut doc_counts = [0usize; 3];
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut counts: [Vec<f64>; 3] = Default::default();
    for (toks, label) in corpus {
        let c = label.index();
        doc_counts[c] += 1;
        for t in toks {
            let id = *index.entry(t.clone()).or_insert_with(|| {
                tokens.push(t.clone());
                for row in counts.iter_mut() {
                    row.push(0.0);
                }
                tokens.len() - 1
            });
            counts[c][id] += 1.0;
        }
    }
    if let Some(missing) = Sentiment::ALL.iter().find(|s| doc_counts[s.index()] == 0) {
        return Err(Error::InvalidCorpus(format!(
            "class `{}` absent from training data",
            missing.code()
        )));
    }
    let n_docs: usize = doc_counts.iter().sum();
    let v = tokens.len() as f64;
    let log_priors = doc_counts.map(|n| T::lit((n as f64 / n_docs as f64).ln()));
    let mut log_likelihoods: [Vec<T>; 3] = Default::default();
    for c in 0..3 {
        let total: f64 = counts[c].iter().sum();
        let denom = total + smoothing * v;
        if denom <= 0.0 {
            return Err(Error::InvalidCorpus(format!(
                "class `{}` has no tokens and smoothing is 0",
                Sentiment::ALL[c].code()
            )));
        }
        log_likelihoods[c] = counts[c]
            .iter()
            .map(|&n| T::lit(((n + smoothing) / denom).ln()))
            .collect();
    }
    Ok(NaiveBayesModel {
        smoothing,
        log_priors,
        index,
        tokens,
        log_likelihoods,
    })
}

/// Trains on labelled documents (normalised and tokenised internally).
pub fn nb_train_documents<T: Scalar>(docs: &[Document], smoothing: f64) -> Result<NaiveBayesModel<T>> {
    let corpus: Vec<(Vec<String>, Sentiment)> = docs
        .iter()
        .map(|d| {
            let g = d
                .gold
                .as_ref()
                .ok_or_else(|| Error::InvalidCorpus(format!("document `{}` has no gold labels", d.id)))?;
            Ok((textprep::tokenize(&textprep::normalize(&d.text)), g.sentiment))
        })
        .collect::<Result<_>>()?;
    nb_train(&corpus, smoothing)
}

/// Normalised class posterior. Tokens never seen in training are ignored.
pub fn nb_classify<T: Scalar>(tokens: &[String], model: &NaiveBayesModel<T>) -> [T; 3] {
    let mut scores = model.log_priors;
    for t in tokens {
        if let Some(&id) = model.index.get(t) {
            for (c, s) in scores.iter_mut().enumerate() {
                *s += model.log_likelihoods[c][id];
            }
        }
    }
    if scores.iter().all(|s| *s == T::neg_infinity()) {
        // Only reachable without smoothing: every class excludes some token.
        scores = model.log_priors;
    }
    let p = softmax(&scores);
    [p[0], p[1], p[2]]
}

impl<T: Scalar> NaiveBayesModel<T> {
    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn log_priors(&self) -> &[T; 3] {
        &self.log_priors
    }

    pub fn vocabulary_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn log_likelihood(&self, class: Sentiment, token: &str) -> Option<T> {
        self.index.get(token).map(|&i| self.log_likelihoods[class.index()][i])
    }

    pub fn classify(&self, tokens: &[String]) -> [T; 3] {
        nb_classify(tokens, self)
    }

    fn to_record(&self) -> NbRecord {
        let enc = |x: &T| {
            let v = x.as_f64();
            v.is_finite().then_some(v)
        };
        NbRecord {
            format: "sentiflow-naive-bayes".into(),
            version: 1,
            smoothing: self.smoothing,
            classes: Sentiment::ALL.iter().map(|s| s.code().to_string()).collect(),
            log_priors: self.log_priors.iter().map(enc).collect(),
            tokens: self.tokens.clone(),
            log_likelihoods: self
                .log_likelihoods
                .iter()
                .map(|row| row.iter().map(enc).collect())
                .collect(),
        }
    }

    fn from_record(r: NbRecord) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("naive bayes model: {m}"));
        if r.format != "sentiflow-naive-bayes" || r.version != 1 {
            return Err(bad("unknown format or version"));
        }
        if r.log_priors.len() != 3 || r.log_likelihoods.len() != 3 {
            return Err(bad("expected three classes"));
        }
        if r.log_likelihoods.iter().any(|row| row.len() != r.tokens.len()) {
            return Err(bad("likelihood table does not match token list"));
        }
        let dec = |x: &Option<f64>| x.map_or(T::neg_infinity(), T::lit);
        let log_priors = [dec(&r.log_priors[0]), dec(&r.log_priors[1]), dec(&r.log_priors[2])];
        let row = |c: usize| r.log_likelihoods[c].iter().map(dec).collect::<Vec<T>>();
        let log_likelihoods = [row(0), row(1), row(2)];
        let index: HashMap<String, usize> = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != r.tokens.len() {
            return Err(bad("duplicate token"));
        }
        Ok(NaiveBayesModel {
            smoothing: r.smoothing,
            log_priors,
            index,
            tokens: r.tokens,
            log_likelihoods,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_record())?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_record(serde_json::from_str(&raw)?)
    }
}

/// `null` encodes a log-probability of -inf.
#[derive(Serialize, Deserialize)]
struct NbRecord {
    format: String,
    version: u32,
    smoothing: f64,
    classes: Vec<String>,
    log_priors: Vec<Option<f64>>,
    tokens: Vec<String>,
    log_likelihoods: Vec<Vec<Option<f64>>>,
}

/// Optional per-domain models with a global fallback. A domain gets its own
/// model only when its documents cover all three classes.
#[derive(Debug, Clone)]
pub struct DomainNaiveBayes<T> {
    pub global: NaiveBayesModel<T>,
    pub per_domain: BTreeMap<DomainId, NaiveBayesModel<T>>,
}

impl<T: Scalar> DomainNaiveBayes<T> {
    pub fn train(docs: &[Document], smoothing: f64) -> Result<Self> {
        let global = nb_train_documents(docs, smoothing)?;
        let mut by_domain: BTreeMap<DomainId, Vec<Document>> = BTreeMap::new();
        for d in docs {
            by_domain.entry(d.domain).or_default().push(d.clone());
        }
        let mut per_domain = BTreeMap::new();
        for (dom, group) in by_domain {
            match nb_train_documents(&group, smoothing) {
                Ok(m) => {
                    per_domain.insert(dom, m);
                }
                Err(Error::InvalidCorpus(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(DomainNaiveBayes { global, per_domain })
    }

    pub fn model_for(&self, domain: DomainId) -> &NaiveBayesModel<T> {
        self.per_domain.get(&domain).unwrap_or(&self.global)
    }

    pub fn classify(&self, tokens: &[String], domain: DomainId) -> [T; 3] {
        nb_classify(tokens, self.model_for(domain))
    }
}
