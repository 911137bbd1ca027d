use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const DEFAULT_CLUSTER_COUNT: usize = 400;
pub const DEFAULT_ALIGNMENT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_MAX_OCCURRENCES_PER_TYPE: usize = 10;
pub const DEFAULT_SALIENCY_FLOOR: f64 = 0.2;

/// Knobs for one analysis run.
///
/// `max_occurrences_per_type = None` means unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cluster_count: usize,
    pub alignment_threshold: f64,
    pub max_occurrences_per_type: Option<usize>,
    pub min_type_frequency: usize,
    /// Integration steps the extractor used; informational.
    pub ig_steps: Option<u32>,
    /// Tagsets to align against. Empty means every uploaded tagset.
    pub tagsets: Vec<String>,
    pub saliency_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cluster_count: DEFAULT_CLUSTER_COUNT,
            alignment_threshold: DEFAULT_ALIGNMENT_THRESHOLD,
            max_occurrences_per_type: Some(DEFAULT_MAX_OCCURRENCES_PER_TYPE),
            min_type_frequency: 1,
            ig_steps: None,
            tagsets: Vec::new(),
            saliency_floor: DEFAULT_SALIENCY_FLOOR,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_count < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "cluster_count must be >= 2, got {}",
                self.cluster_count
            )));
        }
        if !(self.alignment_threshold > 0.0 && self.alignment_threshold <= 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "alignment_threshold must lie in (0, 1], got {}",
                self.alignment_threshold
            )));
        }
        if self.max_occurrences_per_type == Some(0) {
            return Err(CoreError::InvalidConfig(
                "max_occurrences_per_type must be >= 1".into(),
            ));
        }
        if self.min_type_frequency == 0 {
            return Err(CoreError::InvalidConfig(
                "min_type_frequency must be >= 1".into(),
            ));
        }
        if self.ig_steps == Some(0) {
            return Err(CoreError::InvalidConfig("ig_steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.saliency_floor) {
            return Err(CoreError::InvalidConfig(format!(
                "saliency_floor must lie in [0, 1], got {}",
                self.saliency_floor
            )));
        }
        if self.tagsets.iter().any(|t| !is_valid_tagset_name(t)) {
            return Err(CoreError::InvalidConfig("invalid tagset name".into()));
        }
        Ok(())
    }
}

/// Tagset names end up in file names and URL paths.
pub fn is_valid_tagset_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}
