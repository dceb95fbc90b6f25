//! Measurement-error kernel regression operator (MEKRO).
//!
//! Fits a product-kernel Nadaraya–Watson regression with one inverse
//! bandwidth `λ_j = 1/h_j` per variable by minimizing the residual sum of
//! squares subject to `λ ≥ 0` and `Σ λ_j ≤ ξ`. A variable with `λ_j = 0` has
//! an infinite bandwidth and drops out of the fit. The budget `ξ` is chosen
//! along a grid by `BIC = n log(RSS/n) + log(n) tr(S_λ)`.
//!
//! The optimizer is projected gradient descent with Armijo backtracking.
//! The first trial step of a run is `initial_step`; later iterations start
//! from the Barzilai–Borwein step of the previous move. Every accepted
//! iterate is feasible and the objective never increases within a run.
//!
//! With the Gaussian kernel `∂RSS/∂λ_j` vanishes at `λ_j = 0`, so a variable
//! driven to zero never re-enters and every sparse vertex of the feasible set
//! is stationary. Restarts therefore include a near-null start `ξ/(20d)`,
//! from which the first moves follow each variable's local contribution.
//!
//! For large budgets the fit approaches interpolation, where `log(RSS)`
//! diverges faster than the trace penalty grows. Budgets whose fit has
//! `tr(S_λ) > max_trace_fraction · n` are kept on the path but cannot be
//! selected by BIC.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::kernel::KernelSpec;
use crate::rng::{stream, Purpose};
use crate::smoothing::{mean, ProductKernel};

/// Step used by the central-difference gradient for non-smooth kernels.
pub const FD_STEP: f64 = 1e-5;

/// Budget grid for [`mekro_bic_path`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum XiGrid {
    /// `count` log-spaced points from `lo·d` to `hi·d`, `d` the number of variables.
    Scaled { lo: f64, hi: f64, count: usize },
    Explicit(Vec<f64>),
}

impl XiGrid {
    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        let grid = match self {
            XiGrid::Scaled { lo, hi, count } => {
                if !(*lo > 0.0 && hi >= lo && *count >= 1) {
                    return Err(Error::InvalidConfig("ξ grid needs 0 < lo ≤ hi and count ≥ 1"));
                }
                let (a, b) = ((lo * d as f64).ln(), (hi * d as f64).ln());
                if *count == 1 {
                    vec![(lo * d as f64)]
                } else {
                    (0..*count)
                        .map(|i| (a + (b - a) * i as f64 / (*count - 1) as f64).exp())
                        .collect()
                }
            }
            XiGrid::Explicit(v) => v.clone(),
        };
        if grid.is_empty()
            || grid.iter().any(|&x| !(x > 0.0 && x.is_finite()))
            || grid.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::InvalidConfig("ξ grid must be positive and strictly ascending"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MekroConfig {
    pub xi_grid: XiGrid,
    pub max_iterations: usize,
    /// Relative objective decrease below which a run stops.
    pub tolerance: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub restarts: usize,
    /// Largest `tr(S_λ)/n` eligible for BIC selection.
    pub max_trace_fraction: f64,
    /// `λ_j` at or below this counts as zero.
    pub support_threshold: f64,
    pub seed: u64,
    /// Start each budget on the path from the previous solution.
    pub warm_start: bool,
}

impl Default for MekroConfig {
    fn default() -> Self {
        MekroConfig {
            xi_grid: XiGrid::Scaled {
                lo: 0.5,
                hi: 8.0,
                count: 16,
            },
            max_iterations: 500,
            tolerance: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            restarts: 4,
            max_trace_fraction: 0.5,
            support_threshold: 1e-6,
            seed: 0,
            warm_start: true,
        }
    }
}

impl MekroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("iterations and restarts must be positive"));
        }
        if !(self.tolerance > 0.0 && self.initial_step > 0.0 && self.sufficient_decrease > 0.0) {
            return Err(Error::InvalidConfig("tolerances and steps must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig("shrink factor must lie in (0, 1)"));
        }
        if !(self.max_trace_fraction > 0.0 && self.max_trace_fraction <= 1.0) {
            return Err(Error::InvalidConfig("max_trace_fraction must lie in (0, 1]"));
        }
        if !(self.support_threshold >= 0.0) {
            return Err(Error::InvalidConfig("support threshold must be non-negative"));
        }
        Ok(())
    }
}

/// A fitted MEKRO model at one budget.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MekroModel {
    /// Dataset indices of the fitted variables, in fit order.
    pub columns: Vec<usize>,
    pub lambda: Vec<f64>,
    pub xi: f64,
    /// Residual sum of squares at `λ`.
    pub objective: f64,
    pub fitted: Vec<f64>,
    pub trace: f64,
    pub bic: f64,
    /// Dataset indices with `λ_j` above the support threshold.
    pub selected: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

impl MekroModel {
    /// Inverse bandwidths with sub-threshold entries set to exactly zero.
    pub fn effective_lambda(&self, support_threshold: f64) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|&l| if l > support_threshold { l } else { 0.0 })
            .collect()
    }

    /// Predictions at new points using the training sample as smoothing
    /// sample. `train_columns` are the fitted columns (in `columns` order),
    /// `points` the matching coordinates of the new points, one slice per column.
    pub fn predict(
        &self,
        train_columns: &[&[f64]],
        train_y: &[f64],
        points: &[&[f64]],
        spec: KernelSpec,
        support_threshold: f64,
    ) -> Result<Vec<f64>> {
        ensure_len(self.columns.len(), train_columns.len())?;
        ensure_len(self.columns.len(), points.len())?;
        let m = points.first().map_or(0, |c| c.len());
        for p in points {
            ensure_len(m, p.len())?;
            ensure_finite(p, "evaluation points")?;
        }
        let lambda = self.effective_lambda(support_threshold);
        let kernel = ProductKernel::from_inverse(train_columns, &lambda, spec);
        let active: Vec<usize> = (0..lambda.len()).filter(|&j| lambda[j] > 0.0).collect();
        if train_y.is_empty() {
            return Err(Error::EmptyData);
        }
        Ok(kernel.predict(&active, train_y, m, |e, j| points[j][e]).0)
    }
}

/// Result of one projected-gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after the start point and after every accepted step.
    pub history: Vec<f64>,
}

/// MEKRO fits over a budget grid and the BIC choice among them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MekroPath {
    pub best: usize,
    pub path: Vec<MekroModel>,
}

impl MekroPath {
    pub fn best_model(&self) -> &MekroModel {
        &self.path[self.best]
    }
}

/// Euclidean projection onto `{λ ≥ 0, Σλ ≤ ξ}`.
pub fn project_feasible(lambda: &[f64], xi: f64) -> Vec<f64> {
    // Rounding can leave a projected point a few ulps above ξ; the slack
    // keeps such points fixed under a second projection.
    let limit = xi * (1.0 + 1e-12);
    let clamped: Vec<f64> = lambda.iter().map(|&v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= limit {
        return clamped;
    }
    // Projection onto the face Σλ = ξ: λ_j = max(v_j − θ, 0).
    let mut sorted = lambda.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - xi) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = lambda.iter().map(|&v| (v - theta).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    if total > limit {
        let scale = xi / total;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

struct Evaluation {
    rss: f64,
    fitted: Vec<f64>,
    den: Vec<f64>,
    weights: Vec<f64>,
}

/// A MEKRO problem with pairwise squared differences cached once.
pub struct MekroProblem {
    n: usize,
    d: usize,
    y: Vec<f64>,
    labels: Vec<usize>,
    columns: Vec<Vec<f64>>,
    spec: KernelSpec,
    /// `(x_ij − x_kj)²` for each pair `i < k`, `d` values per pair.
    sq: Vec<f64>,
    tss: f64,
}

impl MekroProblem {
    pub fn new(columns: &[&[f64]], y: &[f64], spec: KernelSpec) -> Result<Self> {
        let n = y.len();
        let d = columns.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if d == 0 {
            return Err(Error::InvalidDimension("MEKRO needs at least one variable"));
        }
        ensure_finite(y, "y")?;
        for col in columns {
            ensure_len(n, col.len())?;
            ensure_finite(col, "x")?;
        }
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * d);
        for i in 0..n {
            for k in (i + 1)..n {
                for col in columns {
                    let u = col[i] - col[k];
                    sq.push(u * u);
                }
            }
        }
        let ybar = mean(y);
        Ok(MekroProblem {
            n,
            d,
            y: y.to_vec(),
            labels: (0..d).collect(),
            columns: columns.iter().map(|c| c.to_vec()).collect(),
            spec,
            sq,
            tss: y.iter().map(|v| (v - ybar) * (v - ybar)).sum(),
        })
    }

    /// Attach dataset indices to the columns, reported in fitted models.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        ensure_len(self.d, labels.len())?;
        self.labels = labels;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `Σ (y_i − ȳ)²`, the objective at `λ = 0`.
    pub fn null_objective(&self) -> f64 {
        self.tss
    }

    #[inline]
    fn pair_weight(&self, sq: &[f64], lam2: &[f64]) -> f64 {
        match self.spec {
            KernelSpec::Gaussian => {
                let s: f64 = sq.iter().zip(lam2).map(|(a, b)| a * b).sum();
                (-0.5 * s).exp()
            }
            KernelSpec::Epanechnikov => {
                let mut w = 1.0;
                for (a, b) in sq.iter().zip(lam2) {
                    let t = 1.0 - a * b;
                    if t <= 0.0 {
                        return 0.0;
                    }
                    w *= t;
                }
                w
            }
        }
    }

    fn evaluate(&self, lambda: &[f64], keep_weights: bool) -> Evaluation {
        let (n, d) = (self.n, self.d);
        let lam2: Vec<f64> = lambda.iter().map(|l| l * l).collect();
        let mut num = self.y.clone();
        let mut den = vec![1.0; n];
        let mut weights = if keep_weights {
            Vec::with_capacity(n * (n - 1) / 2)
        } else {
            Vec::new()
        };
        let mut pair = 0;
        for i in 0..n {
            let yi = self.y[i];
            let (mut ni, mut di) = (0.0, 0.0);
            for k in (i + 1)..n {
                let w = self.pair_weight(&self.sq[pair * d..(pair + 1) * d], &lam2);
                pair += 1;
                ni += w * self.y[k];
                di += w;
                num[k] += w * yi;
                den[k] += w;
                if keep_weights {
                    weights.push(w);
                }
            }
            num[i] += ni;
            den[i] += di;
        }
        let fitted: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a / b).collect();
        let rss = fitted
            .iter()
            .zip(&self.y)
            .map(|(f, v)| (v - f) * (v - f))
            .sum();
        Evaluation {
            rss,
            fitted,
            den,
            weights,
        }
    }

    /// Residual sum of squares of the product-kernel fit at `λ`.
    pub fn objective(&self, lambda: &[f64]) -> f64 {
        self.evaluate(lambda, false).rss
    }

    /// `tr(S_λ) = Σ_i 1 / Σ_k w_ik`, self weight 1.
    pub fn trace(&self, lambda: &[f64]) -> f64 {
        self.evaluate(lambda, false).den.iter().map(|d| 1.0 / d).sum()
    }

    fn analytic_gradient(&self, lambda: &[f64], ev: &Evaluation) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let a: Vec<f64> = (0..n)
            .map(|i| (self.y[i] - ev.fitted[i]) / ev.den[i])
            .collect();
        let mut acc = vec![0.0; d];
        let mut pair = 0;
        for i in 0..n {
            for k in (i + 1)..n {
                let w = ev.weights[pair];
                let coef = w
                    * (a[i] * (self.y[k] - ev.fitted[i]) + a[k] * (self.y[i] - ev.fitted[k]));
                if coef != 0.0 {
                    for (g, s) in acc.iter_mut().zip(&self.sq[pair * d..(pair + 1) * d]) {
                        *g += coef * s;
                    }
                }
                pair += 1;
            }
        }
        acc.iter().zip(lambda).map(|(g, l)| 2.0 * l * g).collect()
    }

    fn finite_difference_gradient(&self, lambda: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        let mut probe = lambda.to_vec();
        for j in 0..self.d {
            let base = lambda[j];
            // One-sided at the boundary so the probe stays feasible.
            let lo = (base - FD_STEP).max(0.0);
            let hi = base + FD_STEP;
            probe[j] = hi;
            let f_hi = self.objective(&probe);
            probe[j] = lo;
            let f_lo = self.objective(&probe);
            probe[j] = base;
            g[j] = (f_hi - f_lo) / (hi - lo);
        }
        g
    }

    /// `∂RSS/∂λ`. Analytic for the Gaussian kernel, central differences otherwise.
    pub fn gradient(&self, lambda: &[f64]) -> Vec<f64> {
        if self.spec.is_smooth() {
            let ev = self.evaluate(lambda, true);
            self.analytic_gradient(lambda, &ev)
        } else {
            self.finite_difference_gradient(lambda)
        }
    }

    fn gradient_at(&self, lambda: &[f64], ev: &Evaluation) -> Vec<f64> {
        if self.spec.is_smooth() {
            self.analytic_gradient(lambda, ev)
        } else {
            self.finite_difference_gradient(lambda)
        }
    }

    /// One projected-gradient run from `start` at budget `xi`.
    pub fn optimize(&self, xi: f64, start: &[f64], cfg: &MekroConfig) -> Run {
        let keep = self.spec.is_smooth();
        let mut lambda = project_feasible(start, xi);
        let ev = self.evaluate(&lambda, keep);
        let mut f = ev.rss;
        let mut grad = self.gradient_at(&lambda, &ev);
        let mut step = cfg.initial_step;
        let mut history = vec![f];
        let mut converged = false;
        let mut iterations = 0;
        let scale = 1.0 + lambda.iter().map(|v| v * v).sum::<f64>().sqrt();

        while iterations < cfg.max_iterations {
            iterations += 1;
            let mut t = step;
            let mut accepted = None;
            loop {
                let trial: Vec<f64> = lambda.iter().zip(&grad).map(|(l, g)| l - t * g).collect();
                let candidate = project_feasible(&trial, xi);
                let delta: Vec<f64> = candidate.iter().zip(&lambda).map(|(c, l)| c - l).collect();
                let move_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if move_norm <= 1e-15 * scale {
                    break;
                }
                let decrease: f64 = grad.iter().zip(&delta).map(|(g, s)| g * s).sum();
                let cand_ev = self.evaluate(&candidate, keep);
                if cand_ev.rss <= f + cfg.sufficient_decrease * decrease {
                    accepted = Some((candidate, delta, cand_ev));
                    break;
                }
                t *= cfg.shrink;
            }
            let Some((candidate, delta, cand_ev)) = accepted else {
                converged = true;
                break;
            };
            let new_grad = self.gradient_at(&candidate, &cand_ev);
            let ss: f64 = delta.iter().map(|v| v * v).sum();
            let sy: f64 = delta
                .iter()
                .zip(new_grad.iter().zip(&grad))
                .map(|(s, (gn, go))| s * (gn - go))
                .sum();
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (2.0 * t).min(1e12) };
            let relative = (f - cand_ev.rss) / f.abs().max(f64::MIN_POSITIVE);
            lambda = candidate;
            f = cand_ev.rss;
            grad = new_grad;
            history.push(f);
            if relative < cfg.tolerance {
                converged = true;
                break;
            }
        }
        Run {
            lambda,
            objective: f,
            converged,
            iterations,
            history,
        }
    }

    fn starts(&self, xi: f64, cfg: &MekroConfig, warm: Option<&[f64]>) -> Vec<Vec<f64>> {
        let d = self.d;
        let mut starts = vec![vec![xi / (2.0 * d as f64); d]];
        let mut concentrated = vec![0.0; d];
        if d == 1 {
            concentrated[0] = xi / 2.0;
        } else {
            concentrated[0] = xi / 2.0;
            for v in concentrated.iter_mut().skip(1) {
                *v = xi / (4.0 * (d - 1) as f64);
            }
        }
        starts.push(concentrated);
        if let Some(w) = warm {
            starts.push(w.to_vec());
        }
        starts.push(vec![xi / (20.0 * d as f64); d]);
        let mut rng = stream(cfg.seed, Purpose::MekroRestart, xi.to_bits());
        while starts.len() < cfg.restarts {
            let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            starts.push(raw.iter().map(|v| v * xi / (2.0 * total)).collect());
        }
        starts.truncate(cfg.restarts);
        starts
    }

    /// Best of the restart runs at budget `xi`.
    pub fn fit(&self, xi: f64, cfg: &MekroConfig, warm: Option<&[f64]>) -> Result<MekroModel> {
        cfg.validate()?;
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidConfig("ξ must be positive"));
        }
        if let Some(w) = warm {
            ensure_len(self.d, w.len())?;
        }
        let mut best: Option<Run> = None;
        for start in self.starts(xi, cfg, warm) {
            let run = self.optimize(xi, &start, cfg);
            if best.as_ref().map_or(true, |b| run.objective < b.objective) {
                best = Some(run);
            }
        }
        let mut run = best.expect("at least one restart");
        if run.objective > self.tss {
            run.lambda = vec![0.0; self.d];
            run.objective = self.tss;
        }
        Ok(self.model(xi, run, cfg))
    }

    fn model(&self, xi: f64, run: Run, cfg: &MekroConfig) -> MekroModel {
        let ev = self.evaluate(&run.lambda, false);
        let trace: f64 = ev.den.iter().map(|d| 1.0 / d).sum();
        let selected = run
            .lambda
            .iter()
            .zip(&self.labels)
            .filter(|(l, _)| **l > cfg.support_threshold)
            .map(|(_, j)| *j)
            .collect();
        MekroModel {
            columns: self.labels.clone(),
            xi,
            objective: ev.rss,
            bic: bic(self.n, ev.rss, trace),
            fitted: ev.fitted,
            trace,
            selected,
            lambda: run.lambda,
            converged: run.converged,
            iterations: run.iterations,
        }
    }

    /// Fits every budget in the grid and picks the smallest BIC among fits
    /// within the trace cap, ties to the smaller budget.
    pub fn bic_path(&self, cfg: &MekroConfig) -> Result<MekroPath> {
        cfg.validate()?;
        let grid = cfg.xi_grid.resolve(self.d)?;
        let mut path: Vec<MekroModel> = Vec::with_capacity(grid.len());
        for &xi in &grid {
            let warm = if cfg.warm_start {
                path.last().map(|m| m.lambda.clone())
            } else {
                None
            };
            path.push(self.fit(xi, cfg, warm.as_deref())?);
        }
        let cap = cfg.max_trace_fraction * self.n as f64;
        let eligible = |m: &MekroModel| m.trace <= cap;
        let best = if path.iter().any(eligible) {
            let mut best = path.iter().position(eligible).expect("checked above");
            for (i, m) in path.iter().enumerate() {
                if eligible(m) && m.bic < path[best].bic {
                    best = i;
                }
            }
            best
        } else {
            let mut best = 0;
            for (i, m) in path.iter().enumerate() {
                if m.trace < path[best].trace {
                    best = i;
                }
            }
            best
        };
        Ok(MekroPath { best, path })
    }

    pub fn columns(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| c.as_slice()).collect()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// `n log(RSS/n) + log(n) · trace`.
pub fn bic(n: usize, rss: f64, trace: f64) -> f64 {
    let nf = n as f64;
    nf * (rss.max(f64::MIN_POSITIVE) / nf).ln() + nf.ln() * trace
}

fn check_lambda(lambda: &[f64], d: usize) -> Result<()> {
    ensure_len(d, lambda.len())?;
    ensure_finite(lambda, "lambda")?;
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::InvalidConfig("inverse bandwidths must be non-negative"));
    }
    Ok(())
}

/// RSS of the product-kernel fit with inverse bandwidths `lambda`.
pub fn mekro_objective(lambda: &[f64], columns: &[&[f64]], y: &[f64], spec: KernelSpec) -> Result<f64> {
    check_lambda(lambda, columns.len())?;
    Ok(MekroProblem::new(columns, y, spec)?.objective(lambda))
}

/// Analytic `∂RSS/∂λ` for the Gaussian kernel.
pub fn mekro_gradient(lambda: &[f64], columns: &[&[f64]], y: &[f64], spec: KernelSpec) -> Result<Vec<f64>> {
    if !spec.is_smooth() {
        return Err(Error::Unsupported("analytic gradient needs a differentiable kernel"));
    }
    check_lambda(lambda, columns.len())?;
    Ok(MekroProblem::new(columns, y, spec)?.gradient(lambda))
}

/// MEKRO at a single budget `xi`.
pub fn mekro_fit(
    columns: &[&[f64]],
    y: &[f64],
    xi: f64,
    cfg: &MekroConfig,
    spec: KernelSpec,
) -> Result<MekroModel> {
    if y.len() < 3 {
        return Err(Error::InvalidDimension("MEKRO needs at least three observations"));
    }
    MekroProblem::new(columns, y, spec)?.fit(xi, cfg, None)
}

/// MEKRO over the configured budget grid with BIC selection.
pub fn mekro_bic_path(columns: &[&[f64]], y: &[f64], cfg: &MekroConfig, spec: KernelSpec) -> Result<MekroPath> {
    if y.len() < 3 {
        return Err(Error::InvalidDimension("MEKRO needs at least three observations"));
    }
    MekroProblem::new(columns, y, spec)?.bic_path(cfg)
}
