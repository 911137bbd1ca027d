use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::OccurrenceIndex;
use crate::error::{CoreError, Result};
use crate::ward::Concept;

/// Output-class make-up of a concept's members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAffinity {
    pub concept_id: usize,
    pub distribution: BTreeMap<String, f64>,
    pub dominant_class: String,
    pub purity: f64,
}

/// Normalized counts of the sentence labels of a concept's members.
/// Members whose sentence carries no label are skipped.
pub fn class_affinity(
    concept: &Concept,
    occurrences: &OccurrenceIndex,
    sentence_labels: &BTreeMap<usize, String>,
) -> Result<ClassAffinity> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for &occ in &concept.members {
        let sentence = occurrences
            .get(occ)
            .ok_or_else(|| CoreError::UnknownReference(alloc::format!("occurrence {occ}")))?
            .sentence_id;
        if let Some(label) = sentence_labels.get(&sentence) {
            *counts.entry(label.as_str()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(CoreError::MissingLabels {
            concept_id: concept.concept_id,
        });
    }
    let (dominant, top) = counts.iter().fold(("", 0usize), |best, (&c, &n)| {
        if n > best.1 {
            (c, n)
        } else {
            best
        }
    });
    Ok(ClassAffinity {
        concept_id: concept.concept_id,
        distribution: counts
            .iter()
            .map(|(&c, &n)| (c.into(), n as f64 / total as f64))
            .collect(),
        dominant_class: dominant.into(),
        purity: top as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SentenceRecord, TokenOccurrence};
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    /// One single-word sentence per label.
    fn fixture(labels: &[&str]) -> (Concept, OccurrenceIndex, BTreeMap<usize, String>) {
        let sentences: Vec<SentenceRecord> = (0..labels.len())
            .map(|i| SentenceRecord::from_text(i, &format!("w{i}"), None))
            .collect();
        let occs = (0..labels.len())
            .map(|i| TokenOccurrence {
                occurrence_id: i,
                sentence_id: i,
                position: 0,
                surface: format!("w{i}"),
            })
            .collect();
        let index = OccurrenceIndex::new(occs, &sentences).unwrap();
        let concept = Concept {
            concept_id: 7,
            members: (0..labels.len()).collect(),
            centroid: vec![],
            size: labels.len(),
        };
        let map = labels.iter().enumerate().map(|(i, l)| (i, l.to_string())).collect();
        (concept, index, map)
    }

    #[test]
    fn pure_concept() {
        let (c, idx, labels) = fixture(&["positive"; 4]);
        let a = class_affinity(&c, &idx, &labels).unwrap();
        assert_eq!((a.dominant_class.as_str(), a.purity), ("positive", 1.0));
    }

    #[test]
    fn three_to_one() {
        let (c, idx, labels) = fixture(&["positive", "negative", "positive", "positive"]);
        let a = class_affinity(&c, &idx, &labels).unwrap();
        assert_eq!(a.distribution["positive"], 0.75);
        assert_eq!(a.distribution["negative"], 0.25);
    }

    #[test]
    fn balanced_tie() {
        let (c, idx, labels) = fixture(&["b", "a", "b", "a", "b", "a", "b", "a", "b", "a"]);
        let a = class_affinity(&c, &idx, &labels).unwrap();
        assert_eq!((a.dominant_class.as_str(), a.purity), ("a", 0.5));
    }

    #[test]
    fn missing_labels() {
        let (c, idx, _) = fixture(&["a", "b"]);
        assert_eq!(
            class_affinity(&c, &idx, &BTreeMap::new()),
            Err(CoreError::MissingLabels { concept_id: 7 })
        );
    }
}
