//! Operational shell around `sentiflow-core`: configuration, the staged
//! classification pipeline, and the HTTP service.
//!
//! ```no_run
//! use std::sync::Arc;
//! use sentiflow_service::{Models, Pipeline, PipelineOptions};
//!
//! let pipeline = Pipeline::start(Arc::new(Models::lexicon_only()), PipelineOptions::default())?;
//! // pipeline.submit(doc)?;
//! let stats = pipeline.shutdown()?;
//! assert!(stats.conserved());
//! # Ok::<(), sentiflow_service::ServiceError>(())
//! ```

pub mod config;
pub mod error;
pub mod http;
pub mod models;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{ServiceError, ServiceResult};
pub use models::{Models, Transformer};
pub use pipeline::{run_pipeline, Admission, Pipeline, PipelineOptions, PipelineStats, RunReport, Summary};
