//! Latent concept discovery by agglomerative Ward clustering.

mod assign;
mod dendrogram;
mod nnchain;
mod oracle;
mod projection;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use assign::assign_nearest_concept;
pub use dendrogram::{cut_dendrogram, Dendrogram, Merge, Partition};
pub use nnchain::ward_dendrogram;
pub use oracle::ward_dendrogram_oracle;

use crate::error::{CoreError, Result};
use crate::matrix::EmbeddingView;

/// A discovered cluster of token occurrences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: usize,
    /// Sorted occurrence ids.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    pub size: usize,
}

/// Dendrogram plus the flat concepts at the requested cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub dendrogram: Dendrogram,
    pub concepts: Vec<Concept>,
}

/// Ward clustering of every row in `view`, cut into `k` concepts whose
/// members are row indices.
pub fn ward_cluster(view: &EmbeddingView<'_>, k: usize) -> Result<Clustering> {
    check_k(view, k)?;
    let dendrogram = ward_dendrogram(view)?;
    finish(view, dendrogram, k)
}

/// Same contract as [`ward_cluster`], computed by the cubic rescan.
pub fn ward_cluster_oracle(view: &EmbeddingView<'_>, k: usize) -> Result<Clustering> {
    check_k(view, k)?;
    let dendrogram = ward_dendrogram_oracle(view)?;
    finish(view, dendrogram, k)
}

fn check_k(view: &EmbeddingView<'_>, k: usize) -> Result<()> {
    if k == 0 || k > view.rows() {
        return Err(CoreError::InvalidK { k, n: view.rows() });
    }
    Ok(())
}

fn finish(view: &EmbeddingView<'_>, dendrogram: Dendrogram, k: usize) -> Result<Clustering> {
    let partition = dendrogram.cut(k)?;
    let ids: Vec<usize> = (0..view.rows()).collect();
    let concepts = build_concepts(&partition, view, &ids);
    Ok(Clustering {
        dendrogram,
        concepts,
    })
}

/// Turns a partition of matrix rows into concepts.
///
/// `occurrence_ids[row]` names the occurrence held in each row and must be
/// increasing. Concepts are numbered by size descending, ties by smallest
/// member.
pub fn build_concepts(
    partition: &Partition,
    view: &EmbeddingView<'_>,
    occurrence_ids: &[usize],
) -> Vec<Concept> {
    let dim = view.dim();
    let mut concepts: Vec<Concept> = partition
        .iter()
        .map(|block| {
            let mut centroid = vec![0.0f64; dim];
            for &row in block {
                for (c, &v) in centroid.iter_mut().zip(view.row(row)) {
                    *c += f64::from(v);
                }
            }
            let size = block.len();
            for c in &mut centroid {
                *c /= size as f64;
            }
            Concept {
                concept_id: 0,
                members: block.iter().map(|&r| occurrence_ids[r]).collect(),
                centroid,
                size,
            }
        })
        .collect();
    concepts.sort_by(|a, b| b.size.cmp(&a.size).then(a.members[0].cmp(&b.members[0])));
    for (i, c) in concepts.iter_mut().enumerate() {
        c.concept_id = i;
    }
    concepts
}
