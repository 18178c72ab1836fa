//! Real-time sentiment analytics for e-commerce feedback.
//!
//! The crate is organised along the processing path of a feedback stream:
//!
//! * [`corpus`]: document model, line-delimited interchange format, append-only
//!   store and a synthetic labelled-corpus generator.
//! * [`textprep`]: normalisation, tokenisation, vocabulary, language routing and
//!   entity extraction.
//! * [`engine`]: a small transformer encoder with domain embeddings, per-domain
//!   relative attention bias and three task heads, trained with a weighted
//!   multi-task loss and hand-written backpropagation.
//! * [`baselines`]: lexicon scorer, multinomial Naive Bayes and the soft-vote
//!   ensemble.
//! * [`analytics`]: tumbling windows, trend slopes and EWMA spike alerts.
//! * [`evalreport`]: confusion matrices, macro metrics, latency measurement and
//!   table rendering.
//!
//! Numerical code is generic over [`Scalar`]; the aliases below fix it to `f64`,
//! which is what the rest of the system uses.

pub mod analytics;
pub mod baselines;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod evalreport;
pub mod scalar;
pub mod textprep;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = engine::Matrix<f64>;
pub type ModelParams = engine::ModelParams<f64>;
pub type SentimentResult = engine::SentimentResult<f64>;
pub type Classification = engine::Classification<f64>;
pub type NaiveBayesModel = baselines::NaiveBayesModel<f64>;
pub type MetricSet = evalreport::MetricSet<f64>;
pub type TrendEstimate = analytics::TrendEstimate<f64>;
