//! Lexical semantic change detection.
//!
//! Builds distributional representations of words in two corpora, aligns
//! them, scores how much each target word's usage differs between the
//! corpora, and evaluates the resulting ranking against gold annotations
//! with Spearman's rank correlation.
//!
//! The stages are exposed individually ([`corpus`], [`spaces`], [`align`],
//! [`measures`], [`eval`]) and chained by [`pipeline`].

pub mod align;
pub mod corpus;
pub mod error;
pub mod eval;
mod linalg;
pub mod measures;
pub mod pipeline;
pub mod spaces;
pub mod util;

pub use corpus::{Corpus, Vocabulary, WindowMode, WindowPolicy};
pub use error::{Error, ErrorKind, Result};
pub use eval::{EvaluationReport, GoldRanking};
pub use measures::{ChangeScores, Measure};
pub use align::AlignedPair;
pub use pipeline::{run_pipeline, validate_config, PipelineConfig, ResultReport};
pub use spaces::{CooccurrenceMatrix, EmbeddingMatrix, RandomMatrix, SpaceConfig};
