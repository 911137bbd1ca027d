use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One agglomeration step. Leaves are nodes `0..n`; the cluster created by
/// merge `i` is node `n + i`. `left < right` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub cost: f64,
    pub size: usize,
}

/// Stepwise dendrogram in merge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

/// Flat clustering: blocks of leaf indices, each sorted, blocks ordered by
/// their smallest leaf.
pub type Partition = Vec<Vec<usize>>;

impl Dendrogram {
    /// Validates the tree structure and the non-decreasing cost sequence.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        if n_leaves == 0 || merges.len() != n_leaves - 1 {
            return Err(CoreError::Shape {
                expected: n_leaves.saturating_sub(1),
                actual: merges.len(),
            });
        }
        let mut used = vec![false; 2 * n_leaves - 1];
        let mut sizes = vec![1usize; 2 * n_leaves - 1];
        let mut prev_cost = f64::NEG_INFINITY;
        for (i, m) in merges.iter().enumerate() {
            let node = n_leaves + i;
            if m.left >= m.right || m.right >= node {
                return Err(CoreError::Numeric(format!(
                    "merge {i} joins invalid nodes ({}, {})",
                    m.left, m.right
                )));
            }
            for child in [m.left, m.right] {
                if core::mem::replace(&mut used[child], true) {
                    return Err(CoreError::Numeric(format!(
                        "node {child} merged twice (merge {i})"
                    )));
                }
            }
            if !m.cost.is_finite() || m.cost < prev_cost {
                return Err(CoreError::Numeric(format!(
                    "merge {i} cost {} breaks monotonicity after {prev_cost}",
                    m.cost
                )));
            }
            prev_cost = m.cost;
            sizes[node] = sizes[m.left] + sizes[m.right];
            if sizes[node] != m.size {
                return Err(CoreError::Numeric(format!(
                    "merge {i} records size {} but children hold {}",
                    m.size, sizes[node]
                )));
            }
        }
        Ok(Dendrogram { n_leaves, merges })
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Partition after undoing the `k - 1` latest merges.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(CoreError::InvalidK { k, n });
        }
        let mut parent: Vec<usize> = (0..n).collect();
        // A leaf inside each node, used as the union-find handle.
        let mut leaf_of = Vec::with_capacity(2 * n - 1);
        leaf_of.extend(0..n);
        for m in &self.merges[..n - k] {
            let a = find(&mut parent, leaf_of[m.left]);
            let b = find(&mut parent, leaf_of[m.right]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
            leaf_of.push(lo);
        }
        let mut block_of_root = vec![usize::MAX; n];
        let mut blocks: Partition = Vec::with_capacity(k);
        for leaf in 0..n {
            let root = find(&mut parent, leaf);
            if block_of_root[root] == usize::MAX {
                block_of_root[root] = blocks.len();
                blocks.push(Vec::new());
            }
            blocks[block_of_root[root]].push(leaf);
        }
        Ok(blocks)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Free-function form of [`Dendrogram::cut`].
pub fn cut_dendrogram(dendrogram: &Dendrogram, k: usize) -> Result<Partition> {
    dendrogram.cut(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain4() -> Dendrogram {
        // ((0,1),(2,3)) then root
        Dendrogram::new(
            4,
            vec![
                Merge { left: 0, right: 1, cost: 0.5, size: 2 },
                Merge { left: 2, right: 3, cost: 0.5, size: 2 },
                Merge { left: 4, right: 5, cost: 50.0, size: 4 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn cut_extremes() {
        let d = chain4();
        assert_eq!(d.cut(1).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert_eq!(d.cut(4).unwrap(), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(d.cut(2).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(d.cut(3).unwrap(), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn cut_out_of_range() {
        let d = chain4();
        assert_eq!(d.cut(0), Err(CoreError::InvalidK { k: 0, n: 4 }));
        assert_eq!(d.cut(5), Err(CoreError::InvalidK { k: 5, n: 4 }));
    }

    #[test]
    fn rejects_decreasing_costs() {
        let r = Dendrogram::new(
            3,
            vec![
                Merge { left: 0, right: 1, cost: 2.0, size: 2 },
                Merge { left: 2, right: 3, cost: 1.0, size: 3 },
            ],
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_reused_child() {
        let r = Dendrogram::new(
            3,
            vec![
                Merge { left: 0, right: 1, cost: 1.0, size: 2 },
                Merge { left: 0, right: 2, cost: 2.0, size: 2 },
            ],
        );
        assert!(r.is_err());
    }
}
