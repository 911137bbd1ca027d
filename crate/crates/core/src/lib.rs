//! Latent concept analysis primitives.
//!
//! Contextual token representations are grouped into concepts by Ward
//! agglomerative clustering ([`ward`]), concepts are matched against
//! human-defined tagsets ([`align`]) and output classes ([`affinity`]), and
//! token attributions of individual predictions are mapped back onto the
//! concepts ([`explain`]).
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `parallel`
//! feature to spread nearest-neighbor scans over a rayon pool; results do
//! not depend on the thread count.
#![no_std]

extern crate alloc;

pub mod affinity;
pub mod align;
pub mod browse;
pub mod config;
pub mod corpus;
pub mod error;
pub mod explain;
pub mod filter;
pub mod job;
pub mod label;
pub mod matrix;
pub mod overview;
pub mod ward;

pub use affinity::{class_affinity, ClassAffinity};
pub use align::{align_all, align_concept, AlignmentTable, ConceptAlignment};
pub use config::PipelineConfig;
pub use corpus::{AttributionRecord, OccurrenceIndex, SentenceRecord, TagAnnotation, TokenOccurrence};
pub use error::{CoreError, Result};
pub use explain::{concept_relevance, explain_sentence, ConceptMembership, ConceptRelevance, SentenceExplanation};
pub use filter::filter_occurrences;
pub use job::JobStatus;
pub use label::{generate_label, ConceptLabel};
pub use matrix::{EmbeddingMatrix, EmbeddingView};
pub use overview::{overview, OverviewStats};
pub use ward::{
    assign_nearest_concept, build_concepts, cut_dendrogram, ward_cluster, ward_cluster_oracle, Clustering, Concept,
    Dendrogram, Merge, Partition,
};
