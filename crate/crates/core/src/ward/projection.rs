//! Low-dimensional screening basis for neighbor scans.
//!
//! For any matrix `P` with spectral norm at most `σ`,
//! `||P(a - b)|| <= σ ||a - b||`, so distances between projected centroids
//! bound true distances from below. Projecting onto the leading principal
//! directions makes the bound tight enough to reject most candidates from a
//! few dozen coordinates. The basis only affects how much is rejected, never
//! which neighbor wins, so it is computed cheaply: a row sample, a short
//! subspace iteration, and a rigorous bound on `σ` afterwards.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::EmbeddingView;

const SAMPLE_ROWS: usize = 4096;
const ITERATIONS: usize = 10;

/// Float64 unit roundoff.
const U64: f64 = 1.0 / (1u64 << 53) as f64;
/// Float32 unit roundoff.
const U32: f64 = 1.0 / (1u64 << 24) as f64;

pub(super) struct Projection {
    dim: usize,
    /// Output coordinates, a multiple of the screening block.
    pub(super) width: usize,
    /// `width × dim`, row-major. Rows past the basis rank are zero.
    rows: Vec<f64>,
    mean: Vec<f64>,
    /// Upper bound on the squared spectral norm of `rows`.
    pub(super) sigma_sq: f64,
    /// Relative error of a projected float32 vector:
    /// `||stored - P(c - mean)|| <= eps * ||c - mean||`.
    pub(super) eps: f64,
}

impl Projection {
    /// Basis of at most `max_width` coordinates, padded to `block`.
    pub(super) fn fit(view: &EmbeddingView<'_>, max_width: usize, block: usize) -> Self {
        let n = view.rows();
        let d = view.dim();
        let mean = column_means(view);
        let rank = d.min(max_width);
        let width = rank.div_ceil(block).max(1) * block;

        let mut rows = vec![0.0f64; width * d];
        if d <= max_width {
            // Small inputs: a coordinate permutation, variance first.
            for (r, &c) in variance_order(view, &mean).iter().enumerate() {
                rows[r * d + c] = 1.0;
            }
        } else {
            let cov = sample_covariance(view, &mean, n.div_ceil(SAMPLE_ROWS));
            let basis = leading_subspace(&cov, d, rank, &variance_order(view, &mean));
            // `basis` is d × rank column-major: column j is row j of P.
            rows[..rank * d].copy_from_slice(&basis);
        }

        let sigma_sq = spectral_bound_sq(&rows, width, d);
        let sigma = sqrt(sigma_sq) * (1.0 + 1e-12);
        let matvec = (width as f64) * (d as f64 + 2.0) * U64;
        let eps = 1.01 * (sigma * (U32 + 2.0 * U64) + matvec * sigma);
        Projection {
            dim: d,
            width,
            rows,
            mean,
            sigma_sq,
            eps,
        }
    }

    /// Writes the float32 projection of `point - mean` to `out` and returns
    /// `||point - mean||^2`.
    pub(super) fn apply(&self, point: &[f64], centered: &mut [f64], out: &mut [f32]) -> f64 {
        let mut sq = 0.0;
        for ((z, &p), &m) in centered.iter_mut().zip(point).zip(&self.mean) {
            *z = p - m;
            sq += *z * *z;
        }
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(self.dim)) {
            *o = dot(row, centered) as f32;
        }
        sq
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 4];
    let mut cx = x.chunks_exact(4);
    let mut cy = y.chunks_exact(4);
    for (a, b) in (&mut cx).zip(&mut cy) {
        for l in 0..4 {
            lanes[l] += a[l] * b[l];
        }
    }
    let tail: f64 = cx.remainder().iter().zip(cy.remainder()).map(|(a, b)| a * b).sum();
    (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]) + tail
}

fn column_means(view: &EmbeddingView<'_>) -> Vec<f64> {
    let mut mean = vec![0.0f64; view.dim()];
    for i in 0..view.rows() {
        for (m, &v) in mean.iter_mut().zip(view.row(i)) {
            *m += f64::from(v);
        }
    }
    let n = view.rows().max(1) as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Column indices sorted by decreasing variance, ties by index.
fn variance_order(view: &EmbeddingView<'_>, mean: &[f64]) -> Vec<usize> {
    let mut var = vec![0.0f64; view.dim()];
    for i in 0..view.rows() {
        for ((s, &v), m) in var.iter_mut().zip(view.row(i)).zip(mean) {
            let t = f64::from(v) - m;
            *s += t * t;
        }
    }
    let mut order: Vec<usize> = (0..view.dim()).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    order
}

/// Covariance (unnormalized) of every `step`-th row, `d × d`.
fn sample_covariance(view: &EmbeddingView<'_>, mean: &[f64], step: usize) -> Vec<f64> {
    let d = view.dim();
    let mut cov = vec![0.0f64; d * d];
    let mut z = vec![0.0f64; d];
    for i in (0..view.rows()).step_by(step.max(1)) {
        for ((t, &v), m) in z.iter_mut().zip(view.row(i)).zip(mean) {
            *t = f64::from(v) - m;
        }
        for r in 0..d {
            let zr = z[r];
            for (c, &zc) in cov[r * d + r..(r + 1) * d].iter_mut().zip(&z[r..]) {
                *c += zr * zc;
            }
        }
    }
    for r in 0..d {
        for c in 0..r {
            cov[r * d + c] = cov[c * d + r];
        }
    }
    cov
}

/// Orthonormal basis (`k` columns of length `d`, stored one after another)
/// approximating the leading eigenvectors of `cov`.
fn leading_subspace(cov: &[f64], d: usize, k: usize, start: &[usize]) -> Vec<f64> {
    let mut q = vec![0.0f64; k * d];
    for (j, &c) in start.iter().take(k).enumerate() {
        q[j * d + c] = 1.0;
    }
    let mut z = vec![0.0f64; k * d];
    for _ in 0..ITERATIONS {
        for r in 0..d {
            let row = &cov[r * d..(r + 1) * d];
            for j in 0..k {
                z[j * d + r] = dot(row, &q[j * d..(j + 1) * d]);
            }
        }
        orthonormalize(&mut z, d, k);
        core::mem::swap(&mut q, &mut z);
    }
    q
}

/// Modified Gram-Schmidt, applied twice. Columns that vanish become zero.
fn orthonormalize(q: &mut [f64], d: usize, k: usize) {
    for _ in 0..2 {
        for j in 0..k {
            let (done, rest) = q.split_at_mut(j * d);
            let col = &mut rest[..d];
            for prev in done.chunks_exact(d) {
                let p = dot(prev, col);
                for (c, &v) in col.iter_mut().zip(prev) {
                    *c -= p * v;
                }
            }
            let norm = sqrt(dot(col, col));
            let scale = if norm > 1e-150 { 1.0 / norm } else { 0.0 };
            for c in col.iter_mut() {
                *c *= scale;
            }
        }
    }
}

/// Gershgorin bound on the largest eigenvalue of `P Pᵀ`, widened to cover
/// rounding in forming the Gram matrix.
fn spectral_bound_sq(rows: &[f64], width: usize, d: usize) -> f64 {
    let norms: Vec<f64> = rows.chunks_exact(d).map(|r| dot(r, r)).collect();
    let gamma = (d as f64 + 2.0) * U64 * 1.01;
    let mut worst = 0.0f64;
    for i in 0..width {
        let ri = &rows[i * d..(i + 1) * d];
        let mut sum = 0.0;
        for j in 0..width {
            let g = if i == j { norms[i] } else { dot(ri, &rows[j * d..(j + 1) * d]).abs() };
            // |computed - exact| <= γ_d ||r_i|| ||r_j||, and ||r||^2 <= norm(1 + γ_d).
            sum += g + gamma * (1.0 + gamma) * sqrt(norms[i] * norms[j]);
        }
        worst = worst.max(sum);
    }
    worst * (1.0 + 4.0 * width as f64 * U64)
}

/// Square root by Newton iteration, accurate to a few ulps.
pub(super) fn sqrt(x: f64) -> f64 {
    if !(x > 0.0) || x == f64::INFINITY {
        return if x == f64::INFINITY { x } else { 0.0 };
    }
    // Halving the exponent gives a start within a factor of two.
    let mut y = f64::from_bits((x.to_bits() >> 1) + (1023u64 << 51));
    for _ in 0..6 {
        y = 0.5 * (y + x / y);
    }
    y
}
