//! Sparse, interpretable word embeddings from the community structure of a
//! word co-occurrence network.
//!
//! The pipeline ingests co-occurrence counts ([`ingest`]), builds a weighted
//! graph ([`graph`]), prunes it by PPMI, top-degree removal and k-core
//! ([`preprocess`]), detects communities by label propagation
//! ([`community`]) and turns each word's links into those communities into a
//! sparse vector with one dimension per community ([`embedding`]). Models
//! can be queried ([`query`]) and scored on similarity and categorization
//! benchmarks ([`eval`]).

pub mod community;
pub mod embedding;
pub mod eval;
pub mod graph;
pub mod ingest;
mod numfmt;
pub mod pipeline;
pub mod preprocess;
pub mod query;
pub mod synth;

pub use community::{label_propagation, verify_converged, CommunityId, LpConfig, LpOutcome, Partition};
pub use embedding::{build_model, embed_new_term, EmbeddingModel, SparseEmbedding};
pub use graph::{CooccurrenceGraph, NodeId};
pub use ingest::{CooccRecord, IngestConfig, PairCounts};
pub use numfmt::format_sig;
pub use pipeline::{build_artifacts, run_pipeline, PipelineConfig};
pub use preprocess::{preprocess_pipeline, PreprocessConfig, StageOrder};
pub use query::{cosine, nearest, NeighborIndex, QueryTarget};
