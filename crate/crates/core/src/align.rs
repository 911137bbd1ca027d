//! Alignment of latent concepts with human-defined tagsets.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::TagAnnotation;
use crate::error::{CoreError, Result};
use crate::ward::Concept;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptAlignment {
    pub concept_id: usize,
    pub tagset: String,
    pub tag: String,
    pub score: f64,
}

/// Thresholded-majority alignment of one concept against one tagset.
///
/// The score of a tag is its share among members that carry any tag in the
/// tagset. The best tag (ties alphabetical) is kept when its share reaches
/// `threshold`. Concepts where fewer than half the members are tagged are
/// never aligned.
pub fn align_concept(
    concept: &Concept,
    annotation: &TagAnnotation,
    threshold: f64,
) -> Result<Option<ConceptAlignment>> {
    if concept.members.is_empty() {
        return Err(CoreError::InvalidConcept);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tagged = 0usize;
    for occ in &concept.members {
        if let Some(tag) = annotation.tags.get(occ) {
            *counts.entry(tag.as_str()).or_default() += 1;
            tagged += 1;
        }
    }
    if tagged == 0 || 2 * tagged < concept.members.len() {
        return Ok(None);
    }
    // BTreeMap iterates alphabetically, so keeping only strictly larger
    // counts resolves ties towards the first tag.
    let (tag, count) = counts.iter().fold(("", 0usize), |best, (&t, &c)| {
        if c > best.1 {
            (t, c)
        } else {
            best
        }
    });
    let score = count as f64 / tagged as f64;
    Ok((score >= threshold).then(|| ConceptAlignment {
        concept_id: concept.concept_id,
        tagset: annotation.tagset_name.clone(),
        tag: tag.into(),
        score,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTable {
    /// Ordered by concept id, then tagset name.
    pub alignments: Vec<ConceptAlignment>,
    /// Share of concepts aligned under each tagset.
    pub coverage: BTreeMap<String, f64>,
}

impl AlignmentTable {
    pub fn for_concept(&self, concept_id: usize) -> impl Iterator<Item = &ConceptAlignment> {
        let start = self.alignments.partition_point(|a| a.concept_id < concept_id);
        self.alignments[start..]
            .iter()
            .take_while(move |a| a.concept_id == concept_id)
    }

    /// Highest-scoring alignment of a concept, ties by tagset name.
    pub fn best(&self, concept_id: usize) -> Option<&ConceptAlignment> {
        self.for_concept(concept_id)
            .fold(None, |best: Option<&ConceptAlignment>, a| match best {
                Some(b) if b.score >= a.score => Some(b),
                _ => Some(a),
            })
    }

    pub fn get(&self, concept_id: usize, tagset: &str) -> Option<&ConceptAlignment> {
        self.for_concept(concept_id).find(|a| a.tagset == tagset)
    }
}

/// Aligns every concept against every annotation.
pub fn align_all(
    concepts: &[Concept],
    annotations: &[TagAnnotation],
    threshold: f64,
) -> Result<AlignmentTable> {
    let mut annotations: Vec<&TagAnnotation> = annotations.iter().collect();
    annotations.sort_by(|a, b| a.tagset_name.cmp(&b.tagset_name));

    let mut table = AlignmentTable::default();
    let mut aligned_per_tagset: BTreeMap<&str, usize> = annotations
        .iter()
        .map(|a| (a.tagset_name.as_str(), 0))
        .collect();
    let mut ordered: Vec<&Concept> = concepts.iter().collect();
    ordered.sort_by_key(|c| c.concept_id);
    for concept in ordered {
        for annotation in &annotations {
            if let Some(a) = align_concept(concept, annotation, threshold)? {
                *aligned_per_tagset
                    .get_mut(annotation.tagset_name.as_str())
                    .expect("tagset registered") += 1;
                table.alignments.push(a);
            }
        }
    }
    if !concepts.is_empty() {
        for (tagset, aligned) in aligned_per_tagset {
            table
                .coverage
                .insert(tagset.into(), aligned as f64 / concepts.len() as f64);
        }
    }
    Ok(table)
}
