//! Zero-shot open-schema entity structure discovery.
//!
//! Documents go through four stages: an open zero-shot triplet extraction,
//! root-attribute-guided enrichment, mutual-dependency refinement and
//! unification into per-entity structures filtered by entity type. The
//! [`evaluation`] module scores pooled, human-judged outputs.

pub mod enrichment;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod gateway;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod refinement;
pub mod unification;

pub use error::ModelError;
pub use model::{
    dedup, normalize, Document, EntityStructure, EntityTypeSet, NormalizedText, Stage, Triplet,
    TripletKey, TripletRecord, TripletSet,
};
