//! Mapping token attributions onto latent concepts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{AttributionRecord, OccurrenceIndex, SentenceRecord};
use crate::error::{CoreError, Result};
use crate::label::ConceptLabel;
use crate::matrix::EmbeddingView;
use crate::ward::{assign_nearest_concept, Concept};

/// Concept of every manifest occurrence.
///
/// Occurrences clustered directly belong to their partition block; the
/// ones removed by filtering are attached to the nearest centroid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptMembership {
    pub concept_of: Vec<usize>,
    /// `true` where the occurrence is a clustered member.
    pub direct: Vec<bool>,
}

impl ConceptMembership {
    /// `embeddings` holds one row per manifest occurrence.
    pub fn resolve(concepts: &[Concept], embeddings: &EmbeddingView<'_>) -> Result<Self> {
        let n = embeddings.rows();
        let mut concept_of = vec![usize::MAX; n];
        let mut direct = vec![false; n];
        for concept in concepts {
            for &occ in &concept.members {
                if occ >= n {
                    return Err(CoreError::UnknownReference(format!("occurrence {occ}")));
                }
                concept_of[occ] = concept.concept_id;
                direct[occ] = true;
            }
        }
        for occ in 0..n {
            if !direct[occ] {
                concept_of[occ] = assign_nearest_concept(embeddings.row(occ), concepts)?;
            }
        }
        Ok(ConceptMembership { concept_of, direct })
    }

    pub fn concept_of(&self, occurrence_id: usize) -> Option<usize> {
        self.concept_of.get(occurrence_id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSaliency {
    pub position: usize,
    pub surface: String,
    /// Raw score divided by the sentence's largest magnitude.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedConcept {
    pub concept_id: usize,
    pub label: String,
    pub trigger_positions: Vec<usize>,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceExplanation {
    pub sentence_id: usize,
    pub predicted_class: String,
    pub class_probabilities: BTreeMap<String, f64>,
    pub word_saliencies: Vec<WordSaliency>,
    pub top_word: usize,
    pub matched_concepts: Vec<MatchedConcept>,
}

/// Scores divided by the largest magnitude; all zeros stay zero.
pub fn normalize_saliency(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if max == 0.0 {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|s| s / max).collect()
}

/// Salient words of one prediction and the concepts holding them.
///
/// Positions whose normalized saliency is positive and at least
/// `saliency_floor` are triggers; a concept's contribution is the sum of
/// its triggers' normalized saliency.
pub fn explain_sentence(
    sentence: &SentenceRecord,
    record: &AttributionRecord,
    occurrences: &OccurrenceIndex,
    membership: &ConceptMembership,
    labels: &[ConceptLabel],
    saliency_floor: f64,
) -> Result<SentenceExplanation> {
    if record.sentence_id != sentence.sentence_id {
        return Err(CoreError::UnknownReference(format!(
            "attribution for sentence {} used with sentence {}",
            record.sentence_id, sentence.sentence_id
        )));
    }
    record.validate(sentence.words.len())?;
    let normalized = normalize_saliency(&record.token_scores);

    let mut top_word = 0;
    for (i, s) in normalized.iter().enumerate() {
        if s.abs() > normalized[top_word].abs() {
            top_word = i;
        }
    }

    let mut matched: BTreeMap<usize, (Vec<usize>, f64)> = BTreeMap::new();
    for (position, &score) in normalized.iter().enumerate() {
        if score <= 0.0 || score < saliency_floor {
            continue;
        }
        let Some(occ) = occurrences.lookup(sentence.sentence_id, position) else {
            continue;
        };
        let Some(concept) = membership.concept_of(occ) else {
            continue;
        };
        let entry = matched.entry(concept).or_default();
        entry.0.push(position);
        entry.1 += score;
    }

    let mut matched_concepts = matched
        .into_iter()
        .map(|(concept_id, (trigger_positions, contribution))| {
            let label = labels
                .get(concept_id)
                .map(|l| String::from(l.display()))
                .unwrap_or_default();
            MatchedConcept {
                concept_id,
                label,
                trigger_positions,
                contribution,
            }
        })
        .collect::<Vec<_>>();
    matched_concepts.sort_by(|a, b| {
        b.contribution
            .total_cmp(&a.contribution)
            .then(a.concept_id.cmp(&b.concept_id))
    });

    Ok(SentenceExplanation {
        sentence_id: sentence.sentence_id,
        predicted_class: record.predicted_class.clone(),
        class_probabilities: record.class_probabilities.clone(),
        word_saliencies: sentence
            .words
            .iter()
            .zip(&normalized)
            .enumerate()
            .map(|(position, (w, &score))| WordSaliency {
                position,
                surface: w.clone(),
                score,
            })
            .collect(),
        top_word,
        matched_concepts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRelevance {
    pub concept_id: usize,
    pub relevance: f64,
    pub supporting_occurrence_count: usize,
}

/// Share of corpus-wide positive attribution mass landing on each concept.
///
/// Raw mass of a concept is the sum of `max(0, score)` over all attributed
/// positions whose occurrence belongs to it. Returns one entry per concept
/// id in `0..concept_count`; all zeros when there is no positive mass.
pub fn concept_relevance<'r>(
    records: impl IntoIterator<Item = &'r AttributionRecord>,
    occurrences: &OccurrenceIndex,
    membership: &ConceptMembership,
    concept_count: usize,
) -> Result<Vec<ConceptRelevance>> {
    let mut mass = vec![0.0f64; concept_count];
    let mut support = vec![0usize; concept_count];
    let mut any = false;
    for record in records {
        any = true;
        for (position, &score) in record.token_scores.iter().enumerate() {
            if score <= 0.0 {
                continue;
            }
            let Some(occ) = occurrences.lookup(record.sentence_id, position) else {
                continue;
            };
            let Some(concept) = membership.concept_of(occ) else {
                continue;
            };
            let slot = mass.get_mut(concept).ok_or_else(|| {
                CoreError::UnknownReference(format!("concept {concept}"))
            })?;
            *slot += score;
            support[concept] += 1;
        }
    }
    if !any {
        return Err(CoreError::MissingArtifact("attributions".into()));
    }
    let total: f64 = mass.iter().sum();
    Ok(mass
        .iter()
        .zip(support)
        .enumerate()
        .map(|(concept_id, (&m, supporting_occurrence_count))| ConceptRelevance {
            concept_id,
            relevance: if total > 0.0 { m / total } else { 0.0 },
            supporting_occurrence_count,
        })
        .collect())
}
