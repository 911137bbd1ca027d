//! Results of a finished run, as stored under `derived/`.

use std::collections::BTreeMap;

use conceptlens_core::{
    AlignmentTable, AttributionRecord, ClassAffinity, Concept, ConceptAlignment, ConceptLabel, ConceptMembership,
    ConceptRelevance, OccurrenceIndex, SentenceRecord,
};

use crate::error::{Result, ServiceError};
use crate::formats;
use crate::store::{Project, Store};

/// Retained occurrence ids; dendrogram leaf `i` is `retained[i]`.
pub const RETAINED: &str = "retained.json";
pub const DENDROGRAM: &str = "dendrogram.ndjson";
pub const CONCEPTS: &str = "concepts.json";
pub const ALIGNMENTS: &str = "alignments.ndjson";
pub const COVERAGE: &str = "coverage.json";
pub const LABELS: &str = "labels.json";
pub const MEMBERSHIP: &str = "membership.json";
pub const AFFINITY: &str = "affinity.json";
pub const RELEVANCE: &str = "relevance.json";

pub struct Analysis {
    pub project: Project,
    pub sentences: Vec<SentenceRecord>,
    pub occurrences: OccurrenceIndex,
    pub concepts: Vec<Concept>,
    pub alignments: AlignmentTable,
    pub labels: Vec<ConceptLabel>,
    pub membership: ConceptMembership,
    pub affinity: Vec<Option<ClassAffinity>>,
    /// `None` when no attributions were uploaded.
    pub relevance: Option<Vec<ConceptRelevance>>,
    pub attributions: BTreeMap<usize, AttributionRecord>,
}

impl Analysis {
    pub fn load(store: &Store, project: Project) -> Result<Self> {
        let id = project.project_id.clone();
        let sentences = store.sentences(&id)?;
        let tokens = formats::read_ndjson(&store.export_artifact(&id, "tokens")?)?;
        let occurrences = OccurrenceIndex::new(tokens, &sentences)?;
        let concepts: Vec<Concept> = store.read_derived_json(&id, CONCEPTS)?;
        let alignments: Vec<ConceptAlignment> = formats::read_ndjson(&store.read_derived(&id, ALIGNMENTS)?)?;
        let alignments = AlignmentTable {
            alignments,
            coverage: store.read_derived_json(&id, COVERAGE)?,
        };
        let labels: Vec<ConceptLabel> = store.read_derived_json(&id, LABELS)?;
        let membership: ConceptMembership = store.read_derived_json(&id, MEMBERSHIP)?;
        let affinity: Vec<Option<ClassAffinity>> = store.read_derived_json(&id, AFFINITY)?;
        let relevance: Option<Vec<ConceptRelevance>> = store.read_derived_json(&id, RELEVANCE)?;
        let attributions = store.attributions(&id, &sentences)?;

        let k = concepts.len();
        if labels.len() != k || affinity.len() != k || relevance.as_ref().is_some_and(|r| r.len() != k) {
            return Err(ServiceError::Corrupt(format!("derived results of {id} disagree on the concept count")));
        }
        if membership.concept_of.len() != occurrences.len() {
            return Err(ServiceError::Corrupt(format!("membership of {id} does not cover the manifest")));
        }
        Ok(Analysis {
            project,
            sentences,
            occurrences,
            concepts,
            alignments,
            labels,
            membership,
            affinity,
            relevance,
            attributions,
        })
    }

    pub fn concept(&self, concept_id: usize) -> Result<&Concept> {
        self.concepts
            .get(concept_id)
            .ok_or_else(|| ServiceError::NotFound(format!("concept {concept_id}")))
    }

    pub fn relevance_of(&self, concept_id: usize) -> f64 {
        self.relevance
            .as_ref()
            .and_then(|r| r.get(concept_id))
            .map_or(0.0, |r| r.relevance)
    }
}
