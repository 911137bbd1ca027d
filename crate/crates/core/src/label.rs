use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::align::ConceptAlignment;
use crate::corpus::OccurrenceIndex;
use crate::ward::Concept;

/// Number of word types shown in an automatic label.
pub const LABEL_TOP_TYPES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptLabel {
    pub concept_id: usize,
    pub auto_label: String,
    #[serde(default)]
    pub user_label: Option<String>,
}

impl ConceptLabel {
    /// The user's label when set, else the generated one.
    pub fn display(&self) -> &str {
        self.user_label.as_deref().unwrap_or(&self.auto_label)
    }
}

/// Member word types by descending frequency, ties alphabetical.
pub fn type_frequencies(concept: &Concept, occurrences: &OccurrenceIndex) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &occ in &concept.members {
        if let Some(o) = occurrences.get(occ) {
            *counts.entry(o.surface.as_str()).or_default() += 1;
        }
    }
    let mut types: Vec<(String, usize)> = counts.into_iter().map(|(w, c)| (w.into(), c)).collect();
    types.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    types
}

/// `"<tag or latent>:<top types>#<concept_id>"`.
pub fn generate_label(
    concept: &Concept,
    best_alignment: Option<&ConceptAlignment>,
    occurrences: &OccurrenceIndex,
) -> ConceptLabel {
    let prefix = best_alignment.map_or("latent", |a| a.tag.as_str());
    let top: Vec<String> = type_frequencies(concept, occurrences)
        .into_iter()
        .take(LABEL_TOP_TYPES)
        .map(|(w, _)| w)
        .collect();
    ConceptLabel {
        concept_id: concept.concept_id,
        auto_label: format!("{prefix}:{}#{}", top.join(","), concept.concept_id),
        user_label: None,
    }
}
