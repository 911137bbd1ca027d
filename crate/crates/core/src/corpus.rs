//! Corpus-level records shared by every stage: sentences, token occurrences,
//! tag annotations and attribution records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Probability mass may deviate from 1 by at most this much.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sentence_id: usize,
    pub text: String,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
}

impl SentenceRecord {
    /// Whitespace tokenization of `text`; the stored text is the canonical
    /// single-space join of the words.
    pub fn from_text(sentence_id: usize, text: &str, gold_label: Option<String>) -> Self {
        let words: Vec<String> = text.split_whitespace().map(String::from).collect();
        SentenceRecord {
            sentence_id,
            text: words.join(" "),
            words,
            gold_label,
        }
    }
}

/// One word at one position in one sentence. `occurrence_id` is the row of
/// the embedding matrix holding its representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOccurrence {
    pub occurrence_id: usize,
    pub sentence_id: usize,
    pub position: usize,
    pub surface: String,
}

/// Validated token manifest with `(sentence, position)` lookup.
#[derive(Debug, Clone, Default)]
pub struct OccurrenceIndex {
    occurrences: Vec<TokenOccurrence>,
    by_position: BTreeMap<(usize, usize), usize>,
}

impl OccurrenceIndex {
    /// Checks density of ids, strict `(sentence, position)` ordering and that
    /// every surface matches the corpus word at that slot.
    pub fn new(occurrences: Vec<TokenOccurrence>, sentences: &[SentenceRecord]) -> Result<Self> {
        let mut by_position = BTreeMap::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, occ) in occurrences.iter().enumerate() {
            if occ.occurrence_id != i {
                return Err(CoreError::UnknownReference(format!(
                    "occurrence_id {} at manifest row {i}; ids must be dense and 0-based",
                    occ.occurrence_id
                )));
            }
            let key = (occ.sentence_id, occ.position);
            if let Some(prev) = last {
                if key <= prev {
                    return Err(CoreError::UnknownReference(format!(
                        "occurrence {i} at sentence {} position {} is out of order or duplicated",
                        occ.sentence_id, occ.position
                    )));
                }
            }
            last = Some(key);
            let sentence = sentences.get(occ.sentence_id).ok_or_else(|| {
                CoreError::UnknownReference(format!(
                    "occurrence {i} references unknown sentence {}",
                    occ.sentence_id
                ))
            })?;
            match sentence.words.get(occ.position) {
                Some(word) if *word == occ.surface => {}
                Some(word) => {
                    return Err(CoreError::UnknownReference(format!(
                        "occurrence {i} surface {:?} differs from corpus word {:?} (sentence {}, position {})",
                        occ.surface, word, occ.sentence_id, occ.position
                    )))
                }
                None => {
                    return Err(CoreError::UnknownReference(format!(
                        "occurrence {i} position {} beyond sentence {} length",
                        occ.position, occ.sentence_id
                    )))
                }
            }
            by_position.insert(key, i);
        }
        Ok(OccurrenceIndex {
            occurrences,
            by_position,
        })
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    pub fn occurrences(&self) -> &[TokenOccurrence] {
        &self.occurrences
    }

    pub fn get(&self, occurrence_id: usize) -> Option<&TokenOccurrence> {
        self.occurrences.get(occurrence_id)
    }

    pub fn lookup(&self, sentence_id: usize, position: usize) -> Option<usize> {
        self.by_position.get(&(sentence_id, position)).copied()
    }
}

/// One tagset's labels, keyed by occurrence id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TagAnnotation {
    pub tagset_name: String,
    pub tags: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub sentence_id: usize,
    pub predicted_class: String,
    pub class_probabilities: BTreeMap<String, f64>,
    pub token_scores: Vec<f64>,
    pub convergence_delta: f64,
}

impl AttributionRecord {
    /// Shape and numeric checks against the sentence's word count.
    pub fn validate(&self, word_count: usize) -> Result<()> {
        if self.token_scores.len() != word_count {
            return Err(CoreError::Shape {
                expected: word_count,
                actual: self.token_scores.len(),
            });
        }
        if let Some(col) = self.token_scores.iter().position(|s| !s.is_finite()) {
            return Err(CoreError::NonFinite {
                row: self.sentence_id,
                col,
            });
        }
        if !self.convergence_delta.is_finite() {
            return Err(CoreError::NonFinite {
                row: self.sentence_id,
                col: word_count,
            });
        }
        let mut sum = 0.0;
        for (class, p) in &self.class_probabilities {
            if !p.is_finite() || *p < 0.0 {
                return Err(CoreError::Numeric(format!(
                    "probability for class {class:?} is {p}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(CoreError::Numeric(format!(
                "class probabilities sum to {sum}"
            )));
        }
        if !self.class_probabilities.contains_key(&self.predicted_class) {
            return Err(CoreError::UnknownReference(format!(
                "predicted class {:?} has no probability",
                self.predicted_class
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn sentences() -> Vec<SentenceRecord> {
        vec![
            SentenceRecord::from_text(0, "a  masterpiece .", Some("positive".into())),
            SentenceRecord::from_text(1, "dull", None),
        ]
    }

    fn occ(id: usize, s: usize, p: usize, w: &str) -> TokenOccurrence {
        TokenOccurrence {
            occurrence_id: id,
            sentence_id: s,
            position: p,
            surface: w.to_string(),
        }
    }

    #[test]
    fn whitespace_split_canonicalizes_text() {
        let s = &sentences()[0];
        assert_eq!(s.words, ["a", "masterpiece", "."]);
        assert_eq!(s.text, "a masterpiece .");
    }

    #[test]
    fn manifest_lookup() {
        let idx = OccurrenceIndex::new(
            vec![
                occ(0, 0, 0, "a"),
                occ(1, 0, 1, "masterpiece"),
                occ(2, 0, 2, "."),
                occ(3, 1, 0, "dull"),
            ],
            &sentences(),
        )
        .unwrap();
        assert_eq!(idx.lookup(1, 0), Some(3));
        assert_eq!(idx.lookup(1, 1), None);
    }

    #[test]
    fn manifest_rejects_bad_rows() {
        let s = sentences();
        assert!(OccurrenceIndex::new(vec![occ(1, 0, 0, "a")], &s).is_err());
        assert!(OccurrenceIndex::new(vec![occ(0, 0, 0, "b")], &s).is_err());
        assert!(OccurrenceIndex::new(vec![occ(0, 0, 1, "masterpiece"), occ(1, 0, 0, "a")], &s).is_err());
        assert!(OccurrenceIndex::new(vec![occ(0, 2, 0, "x")], &s).is_err());
    }

    fn record(probs: &[(&str, f64)], scores: Vec<f64>) -> AttributionRecord {
        AttributionRecord {
            sentence_id: 0,
            predicted_class: probs[0].0.to_string(),
            class_probabilities: probs.iter().map(|(c, p)| (c.to_string(), *p)).collect(),
            token_scores: scores,
            convergence_delta: 0.0,
        }
    }

    #[test]
    fn attribution_checks() {
        record(&[("a", 0.6), ("b", 0.4)], vec![0.1; 4]).validate(4).unwrap();
        assert!(matches!(
            record(&[("a", 0.6), ("b", 0.5)], vec![0.1; 4]).validate(4),
            Err(CoreError::Numeric(_))
        ));
        assert!(matches!(
            record(&[("a", 1.0)], vec![0.1; 3]).validate(4),
            Err(CoreError::Shape { expected: 4, actual: 3 })
        ));
    }
}
