//! Stage runner: QUEUED → CLUSTERING → ALIGNING → SCORING → READY.
//!
//! Each stage reads only what earlier stages persisted and writes all of
//! its outputs before the state moves on, so a run interrupted at any point
//! resumes by repeating the current stage.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use conceptlens_core::ward::{build_concepts, ward_dendrogram};
use conceptlens_core::{
    align_all, class_affinity, concept_relevance, filter_occurrences, generate_label, ClassAffinity,
    Concept, ConceptMembership, CoreError, JobStatus,
};

use crate::analysis::{
    AFFINITY, ALIGNMENTS, CONCEPTS, COVERAGE, DENDROGRAM, LABELS, MEMBERSHIP, RELEVANCE, RETAINED,
};
use crate::error::{Result, ServiceError};
use crate::formats;
use crate::store::{Project, Store};

/// Drives a queued project to READY or FAILED and returns the final state.
/// Errors are only returned when the store itself is unusable.
pub fn run(store: &Store, id: &str) -> Result<JobStatus> {
    loop {
        let project = store.project(id)?;
        let status = project.state.value;
        let step = catch_unwind(AssertUnwindSafe(|| advance(store, &project)))
            .unwrap_or_else(|_| Err(ServiceError::Corrupt(format!("{status} stage panicked"))));
        match step {
            Ok(Some(next)) => {
                store.transition(id, next, None)?;
            }
            Ok(None) => return Ok(status),
            Err(e) => {
                tracing::warn!(project = id, stage = %status, error = %e, "run failed");
                store.transition(id, JobStatus::Failed, Some(format!("{}: {e}", e.code())))?;
                return Ok(JobStatus::Failed);
            }
        }
    }
}

/// Runs the stage `project` is in and names the state to move to.
fn advance(store: &Store, project: &Project) -> Result<Option<JobStatus>> {
    let started = Instant::now();
    let id = project.project_id.as_str();
    let next = match project.state.value {
        JobStatus::Queued => JobStatus::Clustering,
        JobStatus::Clustering => {
            cluster(store, project)?;
            JobStatus::Aligning
        }
        JobStatus::Aligning => {
            align(store, project)?;
            JobStatus::Scoring
        }
        JobStatus::Scoring => {
            score(store, project)?;
            JobStatus::Ready
        }
        JobStatus::Ready | JobStatus::Failed => return Ok(None),
        JobStatus::Created | JobStatus::AcceptingArtifacts => {
            return Err(ServiceError::Conflict(format!("project {id} has not been queued")))
        }
    };
    tracing::info!(project = id, stage = %project.state.value, elapsed_ms = started.elapsed().as_millis() as u64, "stage done");
    Ok(Some(next))
}

fn cluster(store: &Store, project: &Project) -> Result<()> {
    let id = project.project_id.as_str();
    let config = &project.config;
    let inputs = store.inputs(id)?;
    let retained = filter_occurrences(
        inputs.occurrences.occurrences(),
        config.min_type_frequency,
        config.max_occurrences_per_type,
        config.cluster_count,
    )?;
    let matrix = inputs.embeddings.view().select(&retained);
    let dendrogram = ward_dendrogram(&matrix.view())?;
    let partition = dendrogram.cut(config.cluster_count)?;
    let concepts = build_concepts(&partition, &matrix.view(), &retained);

    store.write_derived_json(id, RETAINED, &retained)?;
    store.write_derived(id, DENDROGRAM, &formats::write_ndjson(dendrogram.merges()))?;
    store.write_derived_json(id, CONCEPTS, &concepts)?;
    Ok(())
}

fn align(store: &Store, project: &Project) -> Result<()> {
    let id = project.project_id.as_str();
    let inputs = store.inputs(id)?;
    let concepts: Vec<Concept> = store.read_derived_json(id, CONCEPTS)?;
    let table = align_all(&concepts, &inputs.tags, project.config.alignment_threshold)?;
    let labels: Vec<_> = concepts
        .iter()
        .map(|c| generate_label(c, table.best(c.concept_id), &inputs.occurrences))
        .collect();

    store.write_derived(id, ALIGNMENTS, &formats::write_ndjson(&table.alignments))?;
    store.write_derived_json(id, COVERAGE, &table.coverage)?;
    store.write_derived_json(id, LABELS, &labels)?;
    Ok(())
}

fn score(store: &Store, project: &Project) -> Result<()> {
    let id = project.project_id.as_str();
    let inputs = store.inputs(id)?;
    let concepts: Vec<Concept> = store.read_derived_json(id, CONCEPTS)?;
    let membership = ConceptMembership::resolve(&concepts, &inputs.embeddings.view())?;

    // Gold label where the corpus has one, otherwise the model's prediction.
    let mut sentence_labels = BTreeMap::new();
    for s in &inputs.sentences {
        let label = s
            .gold_label
            .clone()
            .or_else(|| inputs.attributions.get(&s.sentence_id).map(|r| r.predicted_class.clone()));
        if let Some(label) = label {
            sentence_labels.insert(s.sentence_id, label);
        }
    }
    let affinity: Vec<Option<ClassAffinity>> = concepts
        .iter()
        .map(|c| match class_affinity(c, &inputs.occurrences, &sentence_labels) {
            Ok(a) => Ok(Some(a)),
            Err(CoreError::MissingLabels { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let relevance = if inputs.attributions.is_empty() {
        None
    } else {
        Some(concept_relevance(
            inputs.attributions.values(),
            &inputs.occurrences,
            &membership,
            concepts.len(),
        )?)
    };

    store.write_derived_json(id, MEMBERSHIP, &membership)?;
    store.write_derived_json(id, AFFINITY, &affinity)?;
    store.write_derived_json(id, RELEVANCE, &relevance)?;
    Ok(())
}
