//! Nearest-neighbor-chain Ward clustering over cluster centroids.
//!
//! Ward's criterion only needs each cluster's size and centroid:
//! `cost(A, B) = |A||B| / (|A| + |B|) * ||c_A - c_B||^2`, the increase in
//! within-cluster sum of squares. Keeping centroids instead of a pairwise
//! table makes memory `O(n·d)`.
//!
//! Neighbor scans are dominated by memory traffic, so each scan first
//! screens candidates against a short float32 projection of the centroids
//! (see [`Projection`]), block by block, and drops a candidate once a
//! rigorous lower bound on its cost exceeds the best cost so far. Survivors
//! are then evaluated exactly from the float64 centroids. Screening only
//! discards candidates that cannot win, so the chosen neighbor is the one an
//! exhaustive float64 scan picks.

use alloc::vec;
use alloc::vec::Vec;

use super::dendrogram::{Dendrogram, Merge};
use super::projection::Projection;
use crate::error::{CoreError, Result};
use crate::matrix::EmbeddingView;

/// Coordinates per screening block.
const BLOCK: usize = 32;
/// Upper limit on screening coordinates.
const SCREEN_WIDTH: usize = 4 * BLOCK;

/// Relative slack covering float32 summation inside a block.
const SUM_SLACK: f64 = 1e-4;
/// Splitting constant of `(x + e)^2 <= (1 + δ) x^2 + (1 + 1/δ) e^2`.
const SPLIT: f64 = 1e-3;

#[cfg(feature = "parallel")]
const PARALLEL_MIN_WORK: usize = 1 << 18;

struct Clusters {
    /// Float64 centroids, row-major, `width` wide with zero padding.
    exact: Vec<f64>,
    width: usize,
    projection: Projection,
    /// Projected float32 centroids, row-major, `projection.width` wide.
    screen: Vec<f32>,
    /// Squared distance of each centroid from the projection mean.
    sq_norms: Vec<f64>,
    sizes: Vec<usize>,
    /// Active slots, ascending.
    active: Vec<usize>,
    scratch: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Candidate {
    slot: usize,
    cost: f64,
}

impl Clusters {
    fn new(view: &EmbeddingView<'_>) -> Self {
        let n = view.rows();
        let d = view.dim();
        let width = d.div_ceil(8).max(1) * 8;
        let mut exact = vec![0.0f64; n * width];
        for i in 0..n {
            for (e, &v) in exact[i * width..].iter_mut().zip(view.row(i)) {
                *e = f64::from(v);
            }
        }
        let projection = Projection::fit(view, SCREEN_WIDTH, BLOCK);
        let mut clusters = Clusters {
            exact,
            width,
            screen: vec![0.0f32; n * projection.width],
            projection,
            sq_norms: vec![0.0; n],
            sizes: vec![1; n],
            active: (0..n).collect(),
            scratch: vec![0.0; d],
        };
        for slot in 0..n {
            clusters.refresh(slot);
        }
        clusters
    }

    #[inline]
    fn row(&self, slot: usize) -> &[f64] {
        &self.exact[slot * self.width..(slot + 1) * self.width]
    }

    #[inline]
    fn screen_row(&self, slot: usize) -> &[f32] {
        let w = self.projection.width;
        &self.screen[slot * w..(slot + 1) * w]
    }

    /// Re-derives the screening row and norm of a slot from its centroid.
    fn refresh(&mut self, slot: usize) {
        let (w, sw) = (self.width, self.projection.width);
        let d = self.scratch.len();
        self.sq_norms[slot] = self.projection.apply(
            &self.exact[slot * w..slot * w + d],
            &mut self.scratch,
            &mut self.screen[slot * sw..(slot + 1) * sw],
        );
    }

    #[inline]
    fn weight(&self, a: usize, b: usize) -> f64 {
        let na = self.sizes[a] as f64;
        let nb = self.sizes[b] as f64;
        na * nb / (na + nb)
    }

    fn cost(&self, a: usize, b: usize) -> f64 {
        self.weight(a, b) * sq_dist(self.row(a), self.row(b))
    }

    /// Squared distance between the screening rows of two slots.
    #[inline]
    fn screen_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (self.screen_row(a), self.screen_row(b));
        ra.chunks_exact(BLOCK)
            .zip(rb.chunks_exact(BLOCK))
            .map(|(xa, xb)| f64::from(block_sq_dist_f32(xa, xb)))
            .sum()
    }

    /// Screening distance above which `cost(a, b) > bound` is certain.
    ///
    /// With `s` the stored projections and `e` their combined error,
    /// `||s_a - s_b|| <= σ ||a - b|| + ||e||` and
    /// `||e||^2 <= 2 ε^2 (|a|^2 + |b|^2)`, so a float32 distance above
    /// `(1 + δ) σ^2 T + (1 + 1/δ) ||e||^2` certifies that the exact squared
    /// distance exceeds `T = bound / weight`. Partial sums over leading
    /// blocks are lower bounds too.
    #[inline]
    fn threshold(&self, a: usize, b: usize, bound: f64) -> f64 {
        let p = &self.projection;
        let limit_sq = bound / self.weight(a, b);
        let err_sq = 2.0 * p.eps * p.eps * (self.sq_norms[a] + self.sq_norms[b]);
        ((1.0 + 2.0 * SPLIT) * p.sigma_sq * limit_sq + (1.0 + 1.0 / SPLIT) * err_sq) / (1.0 - SUM_SLACK)
    }

    /// Block-by-block screening with early exit.
    #[inline]
    fn screened_out(&self, a: usize, b: usize, bound: f64) -> bool {
        if bound == f64::INFINITY {
            return false;
        }
        let threshold = self.threshold(a, b, bound);
        let (ra, rb) = (self.screen_row(a), self.screen_row(b));
        let mut acc = 0.0f64;
        for (xa, xb) in ra.chunks_exact(BLOCK).zip(rb.chunks_exact(BLOCK)) {
            acc += f64::from(block_sq_dist_f32(xa, xb));
            if acc > threshold {
                return true;
            }
        }
        false
    }

    /// Nearest active slot to `a`. `seed` (the previous chain element) wins
    /// ties; otherwise the smallest slot does.
    fn nearest(&self, a: usize, seed: Option<Candidate>) -> Candidate {
        #[cfg(feature = "parallel")]
        if self.active.len() * self.projection.width >= PARALLEL_MIN_WORK {
            return self.nearest_parallel(a, seed);
        }
        self.nearest_in(&self.active, a, seed)
    }

    fn nearest_in(&self, slots: &[usize], a: usize, seed: Option<Candidate>) -> Candidate {
        let seed_slot = seed.map(|s| s.slot);
        let mut best = seed.unwrap_or(Candidate {
            slot: usize::MAX,
            cost: f64::INFINITY,
        });
        let offer = |b: usize, best: &mut Candidate| {
            let cost = self.cost(a, b);
            if cost < best.cost || (cost == best.cost && b < best.slot && Some(best.slot) != seed_slot) {
                *best = Candidate { slot: b, cost };
            }
        };

        if seed.is_some() {
            // The seed's cost is already a tight bound.
            for &b in slots {
                if b != a && Some(b) != seed_slot && !self.screened_out(a, b, best.cost) {
                    offer(b, &mut best);
                }
            }
            return best;
        }

        // Without a bound, screen everything first and evaluate the most
        // promising candidate before the rest.
        let screen: Vec<f64> = slots.iter().map(|&b| self.screen_sq(a, b)).collect();
        let first = slots
            .iter()
            .zip(&screen)
            .filter(|(&b, _)| b != a)
            .map(|(&b, &sq)| (self.weight(a, b) * sq, b))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, b)| b);
        if let Some(b) = first {
            offer(b, &mut best);
        }
        for (&b, &sq) in slots.iter().zip(&screen) {
            if b != a && Some(b) != first && sq <= self.threshold(a, b, best.cost) {
                offer(b, &mut best);
            }
        }
        best
    }

    #[cfg(feature = "parallel")]
    fn nearest_parallel(&self, a: usize, seed: Option<Candidate>) -> Candidate {
        use rayon::prelude::*;
        let chunk = (self.active.len() / (4 * rayon::current_num_threads())).max(256);
        let seed_slot = seed.map(|s| s.slot);
        self.active
            .par_chunks(chunk)
            .map(|slots| self.nearest_in(slots, a, seed))
            .reduce_with(|x, y| pick(x, y, seed_slot))
            .expect("at least one active slot")
    }

    /// Where a new chain begins: the smallest cluster, lowest slot first.
    fn restart_slot(&self) -> usize {
        *self.active.iter().min_by_key(|&&s| self.sizes[s]).expect("active slot")
    }

    fn merge(&mut self, a: usize, b: usize) -> usize {
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        let nk = self.sizes[keep] as f64;
        let ng = self.sizes[gone] as f64;
        let total = nk + ng;
        let w = self.width;
        let (head, tail) = self.exact.split_at_mut(gone * w);
        let ck = &mut head[keep * w..(keep + 1) * w];
        for (u, v) in ck.iter_mut().zip(&tail[..w]) {
            *u = (nk * *u + ng * *v) / total;
        }
        self.sizes[keep] += self.sizes[gone];
        self.refresh(keep);
        let pos = self
            .active
            .binary_search(&gone)
            .expect("merged slot is active");
        self.active.remove(pos);
        keep
    }
}

#[cfg(feature = "parallel")]
fn pick(x: Candidate, y: Candidate, seed: Option<usize>) -> Candidate {
    use core::cmp::Ordering;
    match x.cost.partial_cmp(&y.cost) {
        Some(Ordering::Less) => x,
        Some(Ordering::Greater) => y,
        _ => {
            if Some(x.slot) == seed {
                x
            } else if Some(y.slot) == seed {
                y
            } else if x.slot <= y.slot {
                x
            } else {
                y
            }
        }
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    for (cx, cy) in x.chunks_exact(8).zip(y.chunks_exact(8)) {
        for l in 0..8 {
            let t = cx[l] - cy[l];
            lanes[l] += t * t;
        }
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))
}

#[inline]
fn block_sq_dist_f32(x: &[f32], y: &[f32]) -> f32 {
    let mut lanes = [0.0f32; 16];
    for (cx, cy) in x.chunks_exact(16).zip(y.chunks_exact(16)) {
        for l in 0..16 {
            let t = cx[l] - cy[l];
            lanes[l] += t * t;
        }
    }
    lanes.iter().sum()
}

/// Full Ward dendrogram by nearest-neighbor chain.
pub fn ward_dendrogram(view: &EmbeddingView<'_>) -> Result<Dendrogram> {
    let n = view.rows();
    if n == 0 {
        return Err(CoreError::InvalidK { k: 1, n: 0 });
    }
    view.check_finite()?;
    let mut clusters = Clusters::new(view);

    // (slot_a, slot_b, cost) in discovery order.
    let mut found: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<Candidate> = Vec::with_capacity(32);

    while clusters.active.len() > 1 {
        if chain.is_empty() {
            let start = clusters.restart_slot();
            chain.push(Candidate {
                slot: start,
                cost: f64::INFINITY,
            });
        }
        let (a, b, cost) = loop {
            let top = chain[chain.len() - 1];
            let seed = (chain.len() >= 2).then(|| Candidate {
                slot: chain[chain.len() - 2].slot,
                cost: top.cost,
            });
            let next = clusters.nearest(top.slot, seed);
            if seed.is_some_and(|s| s.slot == next.slot) {
                break (top.slot, next.slot, next.cost);
            }
            chain.push(next);
        };
        chain.truncate(chain.len() - 2);
        clusters.merge(a, b);
        found.push((a, b, cost));
    }

    Dendrogram::new(n, relabel(n, found))
}

/// Orders chain merges by cost and assigns node ids.
///
/// A parent's cost is lifted to its children's cost when rounding left it
/// marginally lower, so that the stable sort keeps children first.
fn relabel(n: usize, found: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    let mut slot_cost = vec![0.0f64; n];
    let mut slot_size = vec![1usize; n];
    let mut steps: Vec<(usize, usize, f64, usize)> = Vec::with_capacity(found.len());
    for (a, b, cost) in found {
        let cost = cost.max(slot_cost[a]).max(slot_cost[b]);
        let keep = a.min(b);
        let size = slot_size[a] + slot_size[b];
        slot_cost[keep] = cost;
        slot_size[keep] = size;
        steps.push((a, b, cost, size));
    }
    steps.sort_by(|x, y| x.2.total_cmp(&y.2));

    let mut node_of_slot: Vec<usize> = (0..n).collect();
    steps
        .into_iter()
        .enumerate()
        .map(|(i, (a, b, cost, size))| {
            let (na, nb) = (node_of_slot[a], node_of_slot[b]);
            node_of_slot[a.min(b)] = n + i;
            Merge {
                left: na.min(nb),
                right: na.max(nb),
                cost,
                size,
            }
        })
        .collect()
}
