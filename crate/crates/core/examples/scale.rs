//! Times Ward clustering on synthetic blob data.
//!
//! `cargo run --release -p conceptlens-core --example scale -- 50000 768 400`

use std::time::Instant;

use conceptlens_core::{ward_cluster, EmbeddingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    ((-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()) as f32
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (n, d, k) = (args.first().copied().unwrap_or(10_000), args.get(1).copied().unwrap_or(768), args.get(2).copied().unwrap_or(400));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let centers: Vec<Vec<f32>> = (0..k).map(|_| (0..d).map(|_| gaussian(&mut rng)).collect()).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centers[rng.gen_range(0..k)];
        data.extend(c.iter().map(|x| x + 0.5 * gaussian(&mut rng)));
    }
    let m = EmbeddingMatrix::new(data, n, d).unwrap();
    let t = Instant::now();
    let c = ward_cluster(&m.view(), k).unwrap();
    println!("n={n} d={d} k={k}: {:.1}s, largest concept {}", t.elapsed().as_secs_f64(), c.concepts[0].size);
}
