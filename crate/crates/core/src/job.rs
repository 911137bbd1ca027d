use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Lifecycle of an analysis project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Created,
    AcceptingArtifacts,
    Queued,
    Clustering,
    Aligning,
    Scoring,
    Ready,
    Failed,
}

impl JobStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Created => "CREATED",
            JobStatus::AcceptingArtifacts => "ACCEPTING_ARTIFACTS",
            JobStatus::Queued => "QUEUED",
            JobStatus::Clustering => "CLUSTERING",
            JobStatus::Aligning => "ALIGNING",
            JobStatus::Scoring => "SCORING",
            JobStatus::Ready => "READY",
            JobStatus::Failed => "FAILED",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Ready | JobStatus::Failed)
    }

    /// States in which a worker owns the project.
    pub fn is_running(self) -> bool {
        matches!(
            self,
            JobStatus::Queued | JobStatus::Clustering | JobStatus::Aligning | JobStatus::Scoring
        )
    }

    /// The forward edge out of this state, if any.
    pub fn next(self) -> Option<JobStatus> {
        match self {
            JobStatus::Created => Some(JobStatus::AcceptingArtifacts),
            JobStatus::AcceptingArtifacts => Some(JobStatus::Queued),
            JobStatus::Queued => Some(JobStatus::Clustering),
            JobStatus::Clustering => Some(JobStatus::Aligning),
            JobStatus::Aligning => Some(JobStatus::Scoring),
            JobStatus::Scoring => Some(JobStatus::Ready),
            JobStatus::Ready | JobStatus::Failed => None,
        }
    }

    pub fn can_transition(self, to: JobStatus) -> bool {
        if to == JobStatus::Failed {
            return !self.is_terminal();
        }
        self.next() == Some(to)
    }

    pub fn transition(self, to: JobStatus) -> Result<JobStatus> {
        if self.can_transition(to) {
            Ok(to)
        } else {
            Err(CoreError::InvalidTransition {
                from: self.as_str(),
                to: to.as_str(),
            })
        }
    }
}

impl core::fmt::Display for JobStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}
