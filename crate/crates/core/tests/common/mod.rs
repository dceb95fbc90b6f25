#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniforms(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

pub fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn epan(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Direct Nadaraya–Watson: Σ K((e−x_k)/h) y_k / Σ K((e−x_k)/h).
pub fn nw_direct(x: &[f64], y: &[f64], h: f64, k: fn(f64) -> f64, e: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (xk, yk) in x.iter().zip(y) {
        let w = k((e - xk) / h);
        num += w * yk;
        den += w;
    }
    num / den
}

/// Direct product-kernel fit at row `e` of `pts`, `None` bandwidth meaning infinite.
pub fn product_direct(cols: &[Vec<f64>], y: &[f64], h: &[Option<f64>], k: fn(f64) -> f64, pt: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        let mut w = 1.0;
        for j in 0..cols.len() {
            w *= match h[j] {
                Some(hj) => k((pt[j] - cols[j][i]) / hj) / hj,
                None => k(0.0),
            };
        }
        num += w * y[i];
        den += w;
    }
    num / den
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}
