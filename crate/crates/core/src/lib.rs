//! Concept-aligned embedding toolkit.
//!
//! Builds same/different-concept occurrence pair datasets from sense-annotated
//! corpora, trains a contrastive linear adapter over frozen contextual
//! embeddings, and evaluates embedding spaces on concept differentiation,
//! lexical semantic change, in-context similarity and geometry analyses.
//!
//! Data flows between modules as [`EmbeddingMatrix`] values keyed by
//! occurrence id. Inner loops that are independent per item (pair scoring,
//! change scores per target, silhouette per point, pair proposal per
//! occurrence) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iterators otherwise; results are identical either way.

pub mod adapter;
pub mod conceptdiff;
pub mod corpus;
pub mod cosimlex;
pub mod embedding;
mod error;
pub mod geometry;
pub mod lscd;
mod par;
pub mod rng;
pub mod spcd;
pub mod stats;
pub mod synthetic;

pub use adapter::{AdapterParams, LossForm, TrainConfig};
pub use corpus::{ConceptId, MarkedSentence, Occurrence, Pos, Taxonomy};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use spcd::{PairCategory, PairRecord, Split, SplitSpec};
pub use stats::CorrelationResult;
