use super::Concept;
use crate::error::{CoreError, Result};

/// Concept whose centroid is closest to `vector` in Euclidean distance;
/// ties go to the smallest concept id.
pub fn assign_nearest_concept(vector: &[f32], concepts: &[Concept]) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for concept in concepts {
        if concept.centroid.len() != vector.len() {
            return Err(CoreError::Shape {
                expected: concept.centroid.len(),
                actual: vector.len(),
            });
        }
        let d: f64 = concept
            .centroid
            .iter()
            .zip(vector)
            .map(|(c, &v)| {
                let t = f64::from(v) - c;
                t * t
            })
            .sum();
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && concept.concept_id < bid),
        };
        if better {
            best = Some((d, concept.concept_id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| CoreError::UnknownReference("no concepts to assign to".into()))
}
