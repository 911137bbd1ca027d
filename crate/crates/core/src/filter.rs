use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::TokenOccurrence;
use crate::error::{CoreError, Result};

/// Pre-clustering corpus filter.
///
/// Drops word types rarer than `min_type_frequency` and keeps at most
/// `max_per_type` occurrences of each remaining type, earliest sentence
/// first. The manifest must already be ordered by `(sentence_id, position)`,
/// which makes "earliest" equal to "lowest occurrence id". Returns sorted
/// occurrence ids; fails if fewer than `cluster_count` survive.
pub fn filter_occurrences(
    occurrences: &[TokenOccurrence],
    min_type_frequency: usize,
    max_per_type: Option<usize>,
    cluster_count: usize,
) -> Result<Vec<usize>> {
    let mut frequency: BTreeMap<&str, usize> = BTreeMap::new();
    for occ in occurrences {
        *frequency.entry(occ.surface.as_str()).or_default() += 1;
    }

    let mut kept: BTreeMap<&str, usize> = BTreeMap::new();
    let mut retained = Vec::new();
    for occ in occurrences {
        let word = occ.surface.as_str();
        if frequency[word] < min_type_frequency {
            continue;
        }
        let seen = kept.entry(word).or_default();
        if max_per_type.is_some_and(|cap| *seen >= cap) {
            continue;
        }
        *seen += 1;
        retained.push(occ.occurrence_id);
    }
    retained.sort_unstable();

    if retained.len() < cluster_count {
        return Err(CoreError::InsufficientData {
            retained: retained.len(),
            required: cluster_count,
        });
    }
    Ok(retained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn manifest(words: &[&str]) -> Vec<TokenOccurrence> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| TokenOccurrence {
                occurrence_id: i,
                sentence_id: i / 4,
                position: i % 4,
                surface: w.to_string(),
            })
            .collect()
    }

    #[test]
    fn identity_without_limits() {
        let m = manifest(&["a", "b", "a", "c", "d"]);
        assert_eq!(filter_occurrences(&m, 1, None, 2).unwrap(), [0, 1, 2, 3, 4]);
    }

    #[test]
    fn cap_keeps_earliest() {
        let mut words = Vec::new();
        for i in 0..60 {
            words.push(if i % 6 == 0 { "x" } else { "the" });
        }
        let m = manifest(&words);
        let kept = filter_occurrences(&m, 1, Some(10), 2).unwrap();
        let the: Vec<usize> = kept.iter().copied().filter(|&i| m[i].surface == "the").collect();
        let expected: Vec<usize> = (0..60).filter(|i| i % 6 != 0).take(10).collect();
        assert_eq!(the, expected);
        assert_eq!(kept.len(), 20);
    }

    #[test]
    fn rare_types_dropped() {
        let m = manifest(&["a", "b", "a", "c", "a", "b"]);
        assert_eq!(filter_occurrences(&m, 2, None, 2).unwrap(), [0, 1, 2, 4, 5]);
    }

    #[test]
    fn too_few_for_k() {
        let m = manifest(&["a", "b", "c", "d", "e"]);
        assert_eq!(
            filter_occurrences(&m, 1, None, 10),
            Err(CoreError::InsufficientData { retained: 5, required: 10 })
        );
    }

    #[test]
    fn deterministic() {
        let m = manifest(&["a", "b", "a", "c", "a", "b", "a", "a"]);
        assert_eq!(
            filter_occurrences(&m, 1, Some(2), 2),
            filter_occurrences(&m, 1, Some(2), 2)
        );
    }
}
