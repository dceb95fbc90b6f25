//! Simulation designs: uniform predictors with Gaussian-copula AR(1)
//! dependence and the three benchmark regression models.
//!
//! Latent rows follow `X̃_1 = ε_1`, `X̃_j = ρ X̃_{j−1} + √(1−ρ²) ε_j`, which has
//! `Corr(X̃_j, X̃_k) = ρ^{|j−k|}` exactly; predictors are `X_j = Φ(X̃_j)`.
//! Standard normals come from the ziggurat sampler of `rand_distr` driven by
//! ChaCha8 streams, one stream per block of [`BLOCK_ROWS`] rows, so blocks can
//! be produced in any order with identical output. `Φ` is evaluated as
//! `erfc(−x/√2)/2` with the `libm` complementary error function, whose
//! absolute error is far below `1e-12`.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Rows generated from one random stream.
pub const BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Example {
    /// Additive: `4 g1(X1) + 3 g2(X2) + 3 g3(X3)`.
    Ex1,
    /// Single index: `g1(X1 + X2 − X3 − X4)`.
    Ex2,
    /// Interactions: `4 X1 + 2 sin(2πX1) sin(2πX2) + 3 sin(2πX2) sin(2πX3)`.
    Ex3,
}

impl Example {
    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(Example::Ex1),
            2 => Some(Example::Ex2),
            3 => Some(Example::Ex3),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 => 2,
            Example::Ex3 => 3,
        }
    }

    /// 0-based indices of the variables the model depends on.
    pub fn truth(self) -> Vec<usize> {
        match self {
            Example::Ex1 | Example::Ex3 => vec![0, 1, 2],
            Example::Ex2 => vec![0, 1, 2, 3],
        }
    }

    /// Noise-free regression function of the first four predictors.
    pub fn mean_response(self, x: &[f64]) -> f64 {
        match self {
            Example::Ex1 => 4.0 * g1(x[0]) + 3.0 * g2(x[1]) + 3.0 * g3(x[2]),
            Example::Ex2 => g1(x[0] + x[1] - x[2] - x[3]),
            Example::Ex3 => {
                let s = |v: f64| (2.0 * PI * v).sin();
                4.0 * x[0] + 2.0 * s(x[0]) * s(x[1]) + 3.0 * s(x[1]) * s(x[2])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSpec {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 4 {
            return Err(Error::InvalidDimension("simulation designs need p ≥ 4"));
        }
        if self.n < 2 {
            return Err(Error::InvalidDimension("simulation designs need n ≥ 2"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidRho(self.rho));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidConfig("sigma2 must be non-negative"));
        }
        Ok(())
    }
}

pub fn g1(x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    t * t
}

pub fn g2(x: f64) -> f64 {
    let s = (2.0 * PI * x).sin();
    s / (2.0 - s)
}

pub fn g3(x: f64) -> f64 {
    let s = (2.0 * PI * x).sin();
    let c = (2.0 * PI * x).cos();
    0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c * c * c + 0.5 * s * s * s
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Latent AR(1) Gaussian rows and response noise, row-major `n × p`,
/// plus `n` standard normal noise draws.
fn latent_block(seed: u64, block: usize, rows: usize, p: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream(seed, Purpose::DataBlock, block as u64);
    let innovation = (1.0 - rho * rho).sqrt();
    let mut latent = Vec::with_capacity(rows * p);
    let mut noise = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut prev: f64 = rng.sample(StandardNormal);
        latent.push(prev);
        for _ in 1..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innovation * e;
            latent.push(prev);
        }
        noise.push(rng.sample(StandardNormal));
    }
    (latent, noise)
}

fn generate(n: usize, p: usize, rho: f64, seed: u64, transform: bool) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n * p];
    let mut noise = Vec::with_capacity(n);
    let blocks = n.div_ceil(BLOCK_ROWS);
    for b in 0..blocks {
        let start = b * BLOCK_ROWS;
        let rows = BLOCK_ROWS.min(n - start);
        let (latent, eps) = latent_block(seed, b, rows, p, rho);
        for r in 0..rows {
            for j in 0..p {
                let v = latent[r * p + j];
                x[j * n + start + r] = if transform { normal_cdf(v) } else { v };
            }
        }
        noise.extend(eps);
    }
    (x, noise)
}

/// Column-major `n × p` matrix of marginally uniform predictors with
/// `Φ`-transformed AR(1) dependence.
pub fn gen_correlated_uniforms(n: usize, p: usize, rho: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    Ok(generate(n, p, rho, seed, true).0)
}

/// The latent Gaussian matrix before the `Φ` transform (column-major).
pub fn gen_latent_gaussians(n: usize, p: usize, rho: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    Ok(generate(n, p, rho, seed, false).0)
}

/// A simulated dataset with its truth set attached.
pub fn gen_example(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let (x, noise) = generate(n, p, spec.rho, spec.seed, true);
    let sd = spec.sigma2.sqrt();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let row = [x[i], x[n + i], x[2 * n + i], x[3 * n + i]];
            spec.example.mean_response(&row) + sd * noise[i]
        })
        .collect();
    Dataset::from_column_major(y, x, p)?.with_truth(spec.example.truth())
}
