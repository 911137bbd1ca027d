use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::align::AlignmentTable;
use crate::corpus::AttributionRecord;
use crate::explain::ConceptRelevance;
use crate::label::ConceptLabel;
use crate::ward::Concept;

/// Lower bucket edges of the concept size histogram; the last bucket is open.
pub const SIZE_BUCKET_EDGES: [usize; 8] = [1, 2, 5, 10, 25, 50, 100, 250];

pub const TOP_SALIENT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBucket {
    pub min: usize,
    /// Exclusive; `None` for the open last bucket.
    pub max: Option<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientConcept {
    pub concept_id: usize,
    pub label: String,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewStats {
    pub concept_count: usize,
    pub alignment_coverage: BTreeMap<String, f64>,
    pub size_histogram: Vec<SizeBucket>,
    pub top_salient_concepts: Vec<SalientConcept>,
    /// Number of attributed sentences per predicted class.
    pub prediction_distribution: BTreeMap<String, usize>,
}

pub fn size_histogram(concepts: &[Concept]) -> Vec<SizeBucket> {
    let mut buckets: Vec<SizeBucket> = SIZE_BUCKET_EDGES
        .iter()
        .enumerate()
        .map(|(i, &min)| SizeBucket {
            min,
            max: SIZE_BUCKET_EDGES.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    for c in concepts {
        // Sizes are at least 1, so some bucket always matches.
        let idx = SIZE_BUCKET_EDGES
            .iter()
            .rposition(|&edge| c.size >= edge)
            .unwrap_or(0);
        buckets[idx].count += 1;
    }
    buckets
}

/// Ten most relevant concepts, ties by id. Concepts without positive
/// relevance are left out.
pub fn top_salient(relevance: &[ConceptRelevance], labels: &[ConceptLabel]) -> Vec<SalientConcept> {
    let mut ranked: Vec<&ConceptRelevance> = relevance.iter().filter(|r| r.relevance > 0.0).collect();
    ranked.sort_by(|a, b| {
        b.relevance
            .total_cmp(&a.relevance)
            .then(a.concept_id.cmp(&b.concept_id))
    });
    ranked
        .into_iter()
        .take(TOP_SALIENT)
        .map(|r| SalientConcept {
            concept_id: r.concept_id,
            label: labels
                .get(r.concept_id)
                .map(|l| l.display().into())
                .unwrap_or_default(),
            relevance: r.relevance,
        })
        .collect()
}

pub fn overview<'r>(
    concepts: &[Concept],
    alignments: &AlignmentTable,
    relevance: &[ConceptRelevance],
    labels: &[ConceptLabel],
    records: impl IntoIterator<Item = &'r AttributionRecord>,
) -> OverviewStats {
    let mut prediction_distribution = BTreeMap::new();
    for r in records {
        *prediction_distribution
            .entry(r.predicted_class.clone())
            .or_default() += 1;
    }
    OverviewStats {
        concept_count: concepts.len(),
        alignment_coverage: alignments.coverage.clone(),
        size_histogram: size_histogram(concepts),
        top_salient_concepts: top_salient(relevance, labels),
        prediction_distribution,
    }
}
