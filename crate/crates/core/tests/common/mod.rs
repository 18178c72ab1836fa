#![allow(dead_code)]

use sentiflow_core::corpus::{generate_synthetic_corpus, AspectSet, Document, GeneratorSpec};
use sentiflow_core::engine::{EncodedBatch, ModelConfig};
use sentiflow_core::textprep::{normalize, tokenize, Vocabulary};

pub fn corpus(n_docs: usize, seed: u64) -> Vec<Document> {
    let spec = GeneratorSpec {
        n_docs,
        ..GeneratorSpec::default()
    };
    generate_synthetic_corpus(&spec, seed).expect("valid default spec")
}

pub fn vocab_for(docs: &[Document]) -> Vocabulary {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| tokenize(&normalize(&d.text))).collect();
    Vocabulary::build(tokens.iter().map(|t| t.iter()), 1)
}

/// Corpus, vocabulary, default config sized to them, and a labelled batch.
pub fn setup(n_docs: usize, seed: u64) -> (Vec<Document>, Vocabulary, ModelConfig, EncodedBatch) {
    let docs = corpus(n_docs, seed);
    let vocab = vocab_for(&docs);
    let aspects = AspectSet::default();
    let config = ModelConfig::new(vocab.len(), 4, aspects.len());
    let batch = EncodedBatch::from_documents(&docs, &vocab, config.max_len, &aspects).expect("encodable");
    (docs, vocab, config, batch)
}
