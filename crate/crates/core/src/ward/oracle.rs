//! Direct cubic Ward clustering on a full dissimilarity table.
//!
//! Every step rescans all active pairs and updates the table with the
//! Lance–Williams recurrence. Only meant for a few hundred points; it exists
//! to cross-check [`super::ward_cluster`].

use alloc::vec;
use alloc::vec::Vec;

use super::dendrogram::{Dendrogram, Merge};
use crate::error::{CoreError, Result};
use crate::matrix::EmbeddingView;

pub fn ward_dendrogram_oracle(view: &EmbeddingView<'_>) -> Result<Dendrogram> {
    let n = view.rows();
    if n == 0 {
        return Err(CoreError::InvalidK { k: 1, n: 0 });
    }
    view.check_finite()?;

    // Initial dissimilarity: half squared Euclidean distance.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = view
                .row(i)
                .iter()
                .zip(view.row(j))
                .map(|(&a, &b)| {
                    let t = f64::from(a) - f64::from(b);
                    t * t
                })
                .sum();
            dist[i * n + j] = 0.5 * d;
            dist[j * n + i] = 0.5 * d;
        }
    }

    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        // Minimal cost; ties by smallest (left node, right node).
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in ((i + 1)..n).filter(|&j| active[j]) {
                let cost = dist[i * n + j];
                let pair = (node[i].min(node[j]), node[i].max(node[j]));
                let better = match best {
                    None => true,
                    Some((c, p, _, _)) => cost < c || (cost == c && pair < p),
                };
                if better {
                    best = Some((cost, pair, i, j));
                }
            }
        }
        let (cost, (left, right), i, j) = best.expect("two active clusters remain");

        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let nk = size[k] as f64;
            let updated = ((ni + nk) * dist[i * n + k] + (nj + nk) * dist[j * n + k]
                - nk * cost)
                / (ni + nj + nk);
            dist[i * n + k] = updated;
            dist[k * n + i] = updated;
        }
        active[j] = false;
        size[i] += size[j];
        node[i] = n + step;
        merges.push(Merge {
            left,
            right,
            cost,
            size: size[i],
        });
    }

    Dendrogram::new(n, merges)
}
