//! Favored-bandwidth independence screening.
//!
//! Each predictor is smoothed marginally at two bandwidths, the small
//! candidate `h* = (L/n)^{1/5}` and `h = ∞` (the sample mean), where `L` is
//! `log p` or `log n`. Two decision rules are built on these fits:
//!
//! * the hard rule keeps `j` when `IC_j(h*) < IC_j(∞)`, with
//!   `IC_j(h) = log(RSS_j(h)/n) + τ (tr S_jh − 1) (L/n)^{1/2} h^{1/2}`;
//! * the importance measure
//!   `IM_j = [log(TSS/n) − log(RSS_j(h*)/n)] / [tr(S_jh*) (L/n)^{1/2} (h*)^{1/2}]`
//!   is thresholded at a quantile of the same statistic computed on data
//!   whose rows have been permuted against the response.
//!
//! Note the two denominators differ: the IC penalty uses `tr(S) − 1` while
//! `IM` divides by `tr(S)`. Both are kept as defined.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{ColumnScaling, Dataset};
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};
use crate::rng::{stream, Purpose};
use crate::smoothing::{mean, ProductKernel};

/// Which logarithm drives `h*` and the penalty scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rate {
    /// `log p`, for `p ≥ n`.
    #[default]
    UseP,
    /// `log n`, for the classical `n ≫ p` setting.
    UseLogN,
}

/// Level of the permutation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quantile {
    /// Lower empirical quantile at `q ∈ [0, 1)`.
    Level(f64),
    /// The maximum of the permuted statistics.
    #[default]
    Max,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScreeningConfig {
    pub tau: f64,
    pub q: Quantile,
    pub n_permutations: usize,
    pub seed: u64,
    pub rate: Rate,
    pub kernel: KernelSpec,
    /// Map each predictor onto `[0, 1]` before smoothing.
    pub rescale: bool,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            tau: 1.0,
            q: Quantile::Max,
            n_permutations: 1,
            seed: 0,
            rate: Rate::UseP,
            kernel: KernelSpec::Gaussian,
            rescale: true,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig("tau must be positive"));
        }
        if let Quantile::Level(q) = self.q {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::InvalidConfig("quantile level must lie in [0, 1)"));
            }
        }
        if self.n_permutations == 0 {
            return Err(Error::InvalidConfig("n_permutations must be positive"));
        }
        Ok(())
    }
}

/// Which candidate bandwidth the information criterion prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Favored {
    HStar,
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariableScore {
    pub ic_hstar: f64,
    pub im: f64,
    pub favored: Favored,
    /// Column has no spread; its importance is pinned to 0.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScreeningReport {
    pub h_star: f64,
    pub ic_inf: f64,
    pub variables: Vec<VariableScore>,
    pub omega_q: f64,
    /// `{j : IM_j ≥ ω}`, by descending importance.
    pub selected: Vec<usize>,
    pub permutation_ims: Vec<f64>,
}

impl ScreeningReport {
    /// `{j : IC_j(h*) < IC_j(∞)}` in ascending index order.
    pub fn hard_set(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.favored == Favored::HStar)
            .map(|(j, _)| j)
            .collect()
    }

    /// All variables by descending importance.
    pub fn ranking(&self) -> Vec<usize> {
        rank_descending(&self.ims())
    }

    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut r = self.ranking();
        r.truncate(k);
        r
    }

    pub fn ims(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.im).collect()
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// The rate logarithm `L`.
pub fn rate_log(n: usize, p: usize, rate: Rate) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidDimension("need at least two observations"));
    }
    let l = match rate {
        Rate::UseP => (p as f64).ln(),
        Rate::UseLogN => (n as f64).ln(),
    };
    if l > 0.0 {
        Ok(l)
    } else {
        Err(Error::InvalidDimension("rate logarithm must be positive (p ≥ 2)"))
    }
}

/// `h* = (L/n)^{1/5}`.
pub fn h_star(n: usize, p: usize, rate: Rate) -> Result<f64> {
    let l = rate_log(n, p, rate)?;
    Ok((l / n as f64).powf(0.2))
}

/// `(L/n)^{1/2} h^{1/2}`, the common scale of the penalty and of IM.
pub fn penalty_scale(n: usize, l: f64, h: f64) -> f64 {
    (l / n as f64).sqrt() * h.sqrt()
}

fn tss(y: &[f64]) -> f64 {
    let ybar = mean(y);
    y.iter().map(|v| (v - ybar) * (v - ybar)).sum()
}

/// `IC(∞) = log(n⁻¹ Σ (y_i − ȳ)²)`.
pub fn ic_infinity(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_finite(y, "y")?;
    let t = tss(y);
    if !(t > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    Ok((t / y.len() as f64).ln())
}

/// Information criterion of a single predictor at bandwidth `h`.
pub fn ic(x: &[f64], y: &[f64], h: Bandwidth, cfg: &ScreeningConfig, p: usize) -> Result<f64> {
    let Bandwidth::Finite(hv) = h else {
        return ic_infinity(y);
    };
    let n = y.len();
    let l = rate_log(n, p, cfg.rate)?;
    let summary = crate::smoothing::smoother_summary(x, y, h, cfg.kernel)?;
    let rss = summary.rss(y);
    if !(rss > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    Ok((rss / n as f64).ln() + cfg.tau * (summary.trace - 1.0) * penalty_scale(n, l, hv))
}

struct Marginal {
    rss: f64,
    trace: f64,
}

fn marginal_fit(x: &[f64], y: &[f64], h: f64, kernel: KernelSpec) -> Marginal {
    let summary = ProductKernel::new(&[x], &[Bandwidth::Finite(h)], kernel).summary(y);
    Marginal {
        rss: summary.rss(y),
        trace: summary.trace,
    }
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Importance measure of one predictor at `h*`.
pub fn importance_measure(
    x: &[f64],
    y: &[f64],
    h_star: f64,
    p: usize,
    cfg: &ScreeningConfig,
) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_len(y.len(), x.len())?;
    ensure_finite(x, "x")?;
    if !(h_star > 0.0 && h_star.is_finite()) {
        return Err(Error::InvalidConfig("h* must be positive"));
    }
    let ic_inf = ic_infinity(y)?;
    let l = rate_log(y.len(), p, cfg.rate)?;
    if is_constant(x) {
        return Ok(0.0);
    }
    let m = marginal_fit(x, y, h_star, cfg.kernel);
    im_from_fit(ic_inf, &m, y.len(), l, h_star)
}

fn im_from_fit(ic_inf: f64, m: &Marginal, n: usize, l: f64, h_star: f64) -> Result<f64> {
    if !(m.rss > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let numerator = ic_inf - (m.rss / n as f64).ln();
    Ok(numerator / (m.trace * penalty_scale(n, l, h_star)))
}

/// Marginal IC and IM for every predictor, without any thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalScores {
    pub h_star: f64,
    pub ic_inf: f64,
    pub variables: Vec<VariableScore>,
}

impl MarginalScores {
    pub fn ranking(&self) -> Vec<usize> {
        let ims: Vec<f64> = self.variables.iter().map(|v| v.im).collect();
        rank_descending(&ims)
    }
}

fn prepared(data: &Dataset, cfg: &ScreeningConfig) -> Dataset {
    if cfg.rescale {
        data.rescaled(&ColumnScaling::fit(data))
    } else {
        data.clone()
    }
}

fn score_all(data: &Dataset, cfg: &ScreeningConfig) -> Result<MarginalScores> {
    let (n, p) = (data.n(), data.p());
    let y = data.y();
    let l = rate_log(n, p, cfg.rate)?;
    let hs = h_star(n, p, cfg.rate)?;
    let ic_inf = ic_infinity(y)?;
    let scale = penalty_scale(n, l, hs);
    let mut variables = Vec::with_capacity(p);
    for (j, x) in data.columns().enumerate() {
        if is_constant(x) {
            variables.push(VariableScore {
                ic_hstar: ic_inf,
                im: 0.0,
                favored: Favored::Infinite,
                constant: true,
            });
            continue;
        }
        let m = marginal_fit(x, y, hs, cfg.kernel);
        if !(m.rss > 0.0) {
            return Err(Error::DegenerateFit.at_variable(j));
        }
        let ic_hstar = (m.rss / n as f64).ln() + cfg.tau * (m.trace - 1.0) * scale;
        let im = im_from_fit(ic_inf, &m, n, l, hs).map_err(|e| e.at_variable(j))?;
        variables.push(VariableScore {
            ic_hstar,
            im,
            favored: if ic_hstar < ic_inf {
                Favored::HStar
            } else {
                Favored::Infinite
            },
            constant: false,
        });
    }
    Ok(MarginalScores {
        h_star: hs,
        ic_inf,
        variables,
    })
}

/// Marginal IC/IM scores for every predictor (rescaled first when configured).
pub fn marginal_scores(data: &Dataset, cfg: &ScreeningConfig) -> Result<MarginalScores> {
    cfg.validate()?;
    score_all(&prepared(data, cfg), cfg)
}

/// Variables whose information criterion favors `h*` over `∞`.
pub fn fbis_hard_select(data: &Dataset, cfg: &ScreeningConfig) -> Result<Vec<usize>> {
    let scores = marginal_scores(data, cfg)?;
    Ok(scores
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.favored == Favored::HStar)
        .map(|(j, _)| j)
        .collect())
}

/// Lower empirical quantile: the `max(⌈q m⌉, 1)`-th smallest of `values`.
pub fn lower_quantile(values: &[f64], q: Quantile) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    match q {
        Quantile::Max => sorted[sorted.len() - 1],
        Quantile::Level(level) => {
            let m = sorted.len();
            let rank = ((level * m as f64).ceil() as usize).clamp(1, m);
            sorted[rank - 1]
        }
    }
}

/// Threshold from importance measures recomputed on row-permuted data.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationThreshold {
    pub omega_q: f64,
    pub permuted_ims: Vec<f64>,
}

/// Permuted importance measures for an already prepared dataset.
fn permuted_ims(data: &Dataset, cfg: &ScreeningConfig) -> Result<Vec<f64>> {
    let n = data.n();
    let mut out = Vec::with_capacity(data.p() * cfg.n_permutations);
    for r in 0..cfg.n_permutations {
        let mut rng = stream(cfg.seed, Purpose::Permutation, r as u64);
        let mut pi: Vec<usize> = (0..n).collect();
        pi.shuffle(&mut rng);
        // Pairing X_{π(i)} with Y_i is the same set of pairs as X_k with
        // Y_{π⁻¹(k)}, so the response is moved instead of every column.
        let mut y_perm = alloc::vec![0.0; n];
        for (i, &k) in pi.iter().enumerate() {
            y_perm[k] = data.y()[i];
        }
        let permuted = data.with_response(y_perm)?;
        let scores = score_all(&permuted, cfg)?;
        out.extend(scores.variables.iter().map(|v| v.im));
    }
    Ok(out)
}

/// `ω_(q)` from `n_permutations` decoupled copies of the data.
pub fn permutation_threshold(data: &Dataset, cfg: &ScreeningConfig) -> Result<PermutationThreshold> {
    cfg.validate()?;
    let data = prepared(data, cfg);
    let permuted_ims = permuted_ims(&data, cfg)?;
    Ok(PermutationThreshold {
        omega_q: lower_quantile(&permuted_ims, cfg.q),
        permuted_ims,
    })
}

/// Full screening: marginal scores, permutation threshold and selected set.
pub fn fbis_screen(data: &Dataset, cfg: &ScreeningConfig) -> Result<ScreeningReport> {
    cfg.validate()?;
    let prepared = prepared(data, cfg);
    let scores = score_all(&prepared, cfg)?;
    let permutation_ims = permuted_ims(&prepared, cfg)?;
    let omega_q = lower_quantile(&permutation_ims, cfg.q);
    let ims: Vec<f64> = scores.variables.iter().map(|v| v.im).collect();
    let selected = rank_descending(&ims)
        .into_iter()
        .filter(|&j| ims[j] >= omega_q)
        .collect();
    Ok(ScreeningReport {
        h_star: scores.h_star,
        ic_inf: scores.ic_inf,
        variables: scores.variables,
        omega_q,
        selected,
        permutation_ims,
    })
}

/// Absolute Pearson correlation of each column with the response.
pub fn abs_correlations(data: &Dataset) -> Vec<f64> {
    let y = data.y();
    let ybar = mean(y);
    let syy: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    data.columns()
        .map(|x| {
            let xbar = mean(x);
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (a, b) in x.iter().zip(y) {
                sxy += (a - xbar) * (b - ybar);
                sxx += (a - xbar) * (a - xbar);
            }
            if sxx > 0.0 && syy > 0.0 {
                (sxy / (sxx * syy).sqrt()).abs()
            } else {
                0.0
            }
        })
        .collect()
}

/// Linear sure independence screening: rank by `|corr(X_j, Y)|`.
pub fn sis_rank(data: &Dataset) -> Vec<usize> {
    rank_descending(&abs_correlations(data))
}
