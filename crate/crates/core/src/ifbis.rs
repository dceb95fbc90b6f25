//! Iterative favored-bandwidth screening.
//!
//! 1. Screen marginally and keep `A_1 = {j : IM_j ≥ ω}`.
//! 2. Fit MEKRO on `A_1` with BIC-tuned budget; its support is `M_1`.
//! 3. Use the MEKRO fitted values, rescaled to `[0, 1]`, as a surrogate `Z`.
//! 4. Score every `j ∉ M_l` by the conditional importance of `X_j` given `Z`
//!    and keep the top ones as `A_{l+1}`.
//! 5. Refit MEKRO on `M_l ∪ A_{l+1}`; its support is `M_{l+1}`.
//! 6. Repeat 3–5 until `|M_l| ≥ s0` or `M_l = M_{l−1}` (including the case
//!    where no candidate passes the cut), or the iteration cap is reached.
//!
//! The conditional importance of `X_j` compares two bivariate product-kernel
//! fits on `(Z, X_j)`, one with bandwidths `(h*, ∞)` and one with `(h*, h*)`:
//!
//! `IM_{j|M} = [log(RSS_{h*,∞}/n) − log(RSS_{h*,h*}/n)] /
//!             ([tr S_{h*,h*} − tr S_{h*,∞}] (L/n)^{1/2} (h*)^{1/2})`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{min_max, ColumnScaling, Dataset};
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::kernel::KernelSpec;
use crate::mekro::{MekroConfig, MekroModel, MekroProblem};
use crate::rng::{stream, Purpose};
use crate::screening::{
    fbis_screen, h_star, ic_infinity, lower_quantile, penalty_scale, rank_descending, rate_log,
    Quantile, ScreeningConfig,
};
use crate::smoothing::mean;

/// Denominators at or below this mark the conditional measure as degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// How `A_{l+1}` is cut from the conditional ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConditionalRule {
    /// Keep variables at or above the largest conditional measure obtained
    /// after permuting the rows of the candidate columns.
    #[default]
    PermutationMax,
    TopK(usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IfbisConfig {
    pub screening: ScreeningConfig,
    pub mekro: MekroConfig,
    /// Kernel of the MEKRO refits and of the final predictor.
    pub mekro_kernel: KernelSpec,
    /// Model size cap; `None` means `⌊n / log n⌋`.
    pub s0: Option<usize>,
    pub k_max: usize,
    pub max_iterations: usize,
    pub rule: ConditionalRule,
}

impl Default for IfbisConfig {
    fn default() -> Self {
        // At h* ≈ 0.4 a Gaussian kernel damps a sin(2πx) signal by
        // exp(−2π²h²) ≈ 0.02 while the Epanechnikov kernel keeps about 0.4 of
        // it, so oscillating effects only surface in the conditional step with
        // the compact kernel. MEKRO keeps the Gaussian kernel: with compact
        // support BIC rewards near-interpolating fits.
        IfbisConfig {
            screening: ScreeningConfig {
                kernel: KernelSpec::Epanechnikov,
                ..ScreeningConfig::default()
            },
            mekro: MekroConfig::default(),
            mekro_kernel: KernelSpec::Gaussian,
            s0: None,
            k_max: 10,
            max_iterations: 10,
            rule: ConditionalRule::PermutationMax,
        }
    }
}

impl IfbisConfig {
    /// Size cap for `n` observations.
    pub fn size_cap(&self, n: usize) -> usize {
        self.s0
            .unwrap_or_else(|| ((n as f64) / (n as f64).ln()).floor() as usize)
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.screening.validate()?;
        self.mekro.validate()?;
        if self.s0 == Some(0) || self.k_max == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidConfig("s0, k_max and max_iterations must be positive"));
        }
        if self.rule == ConditionalRule::TopK(0) {
            return Err(Error::InvalidConfig("TopK needs k ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StopReason {
    /// `M_l = M_{l−1}`, or `M_1 = ∅`.
    Converged,
    SizeCap,
    IterationCap,
    /// Every variable is already in the model; nothing was left to score.
    EmptyAddition,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// `A_l`, in ranking order.
    pub candidates: Vec<usize>,
    /// `M_l`, ascending.
    pub selected: Vec<usize>,
    pub mekro_model: Option<MekroModel>,
    /// `(j, IM_{j|M_{l−1}})` for every scored variable; empty for the
    /// marginal first step.
    pub conditional_ims: Vec<(usize, f64)>,
    /// Cut-off applied to the scores, when a permutation threshold was used.
    pub threshold: Option<f64>,
    /// The surrogate was constant and marginal scores were used instead.
    pub surrogate_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IfbisTrace {
    pub h_star: f64,
    /// Map from raw predictors to the scale all fits were computed on.
    pub scaling: ColumnScaling,
    pub iterations: Vec<IterationRecord>,
    pub final_set: Vec<usize>,
    pub stop_reason: StopReason,
}

impl IfbisTrace {
    /// The MEKRO model behind `final_set`, if any variable was kept.
    pub fn final_model(&self) -> Option<&MekroModel> {
        if self.final_set.is_empty() {
            return None;
        }
        self.iterations
            .iter()
            .rev()
            .find_map(|r| r.mekro_model.as_ref().filter(|m| sorted(m.selected.clone()) == self.final_set))
    }

    /// Predictions for the rows of `test` from the final MEKRO fit, smoothing
    /// over the rows of `train`. Both datasets are in raw units.
    pub fn predict(&self, train: &Dataset, test: &Dataset, cfg: &IfbisConfig) -> Result<Vec<f64>> {
        ensure_len(train.p(), test.p())?;
        let Some(model) = self.final_model() else {
            return Ok(vec![mean(train.y()); test.n()]);
        };
        let train_cols: Vec<Vec<f64>> = model
            .columns
            .iter()
            .map(|&j| train.column(j).iter().map(|&v| self.scaling.apply(j, v)).collect())
            .collect();
        let test_cols: Vec<Vec<f64>> = model
            .columns
            .iter()
            .map(|&j| test.column(j).iter().map(|&v| self.scaling.apply(j, v)).collect())
            .collect();
        let tc: Vec<&[f64]> = train_cols.iter().map(|c| c.as_slice()).collect();
        let pc: Vec<&[f64]> = test_cols.iter().map(|c| c.as_slice()).collect();
        model.predict(&tc, train.y(), &pc, cfg.mekro_kernel, cfg.mekro.support_threshold)
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// MEKRO fitted values mapped onto `[0, 1]`.
pub fn surrogate(model: &MekroModel) -> Result<Vec<f64>> {
    let (lo, hi) = min_max(&model.fitted);
    if model.fitted.is_empty() || !(hi > lo) {
        return Err(Error::DegenerateSurrogate);
    }
    Ok(model.fitted.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Conditional importance of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalIm {
    pub value: f64,
    /// The degrees-of-freedom difference vanished; `value` is pinned to 0.
    pub degenerate: bool,
}

/// Scores candidate columns against a fixed surrogate, reusing the surrogate
/// kernel weights across columns.
pub struct ConditionalScorer<'a> {
    y: &'a [f64],
    kernel: KernelSpec,
    inv_h: f64,
    /// Surrogate pair weights `K((z_i − z_k)/h*)/K(0)` for `i < k`.
    z_weights: Vec<f64>,
    log_rss_base: f64,
    trace_base: f64,
    scale: f64,
}

impl<'a> ConditionalScorer<'a> {
    pub fn new(z: &[f64], y: &'a [f64], h_star: f64, p: usize, cfg: &ScreeningConfig) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        ensure_len(n, z.len())?;
        ensure_finite(z, "surrogate")?;
        ic_infinity(y)?;
        if !(h_star > 0.0 && h_star.is_finite()) {
            return Err(Error::InvalidConfig("h* must be positive"));
        }
        let l = rate_log(n, p, cfg.rate)?;
        let inv_h = 1.0 / h_star;
        let mut z_weights = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for k in (i + 1)..n {
                z_weights.push(cfg.kernel.relative((z[i] - z[k]) * inv_h));
            }
        }
        let mut scorer = ConditionalScorer {
            y,
            kernel: cfg.kernel,
            inv_h,
            z_weights,
            log_rss_base: 0.0,
            trace_base: 0.0,
            scale: penalty_scale(n, l, h_star),
        };
        let (rss, trace) = scorer.fit(None);
        if !(rss > 0.0) {
            return Err(Error::DegenerateFit);
        }
        scorer.log_rss_base = (rss / n as f64).ln();
        scorer.trace_base = trace;
        Ok(scorer)
    }

    /// RSS and trace of the bivariate fit; `x = None` is the `(h*, ∞)` fit.
    fn fit(&self, x: Option<&[f64]>) -> (f64, f64) {
        let y = self.y;
        let n = y.len();
        let mut num = y.to_vec();
        let mut den = vec![1.0; n];
        let mut pair = 0;
        for i in 0..n {
            let yi = y[i];
            let (mut ni, mut di) = (0.0, 0.0);
            for k in (i + 1)..n {
                let mut w = self.z_weights[pair];
                pair += 1;
                if let Some(x) = x {
                    if w != 0.0 {
                        w *= self.kernel.relative((x[i] - x[k]) * self.inv_h);
                    }
                }
                ni += w * y[k];
                di += w;
                num[k] += w * yi;
                den[k] += w;
            }
            num[i] += ni;
            den[i] += di;
        }
        let mut rss = 0.0;
        let mut trace = 0.0;
        for i in 0..n {
            let r = y[i] - num[i] / den[i];
            rss += r * r;
            trace += 1.0 / den[i];
        }
        (rss, trace)
    }

    pub fn score(&self, x: &[f64]) -> Result<ConditionalIm> {
        ensure_len(self.y.len(), x.len())?;
        ensure_finite(x, "x")?;
        let (rss, trace) = self.fit(Some(x));
        let df = trace - self.trace_base;
        if df <= DEGENERATE_DENOMINATOR {
            return Ok(ConditionalIm {
                value: 0.0,
                degenerate: true,
            });
        }
        if !(rss > 0.0) {
            return Err(Error::DegenerateFit);
        }
        let n = self.y.len() as f64;
        Ok(ConditionalIm {
            value: (self.log_rss_base - (rss / n).ln()) / (df * self.scale),
            degenerate: false,
        })
    }
}

/// Conditional importance of `x` given the surrogate `z`.
pub fn conditional_importance(
    z: &[f64],
    x: &[f64],
    y: &[f64],
    h_star: f64,
    p: usize,
    cfg: &ScreeningConfig,
) -> Result<ConditionalIm> {
    ConditionalScorer::new(z, y, h_star, p, cfg)?.score(x)
}

struct Step {
    candidates: Vec<usize>,
    scores: Vec<(usize, f64)>,
    threshold: Option<f64>,
    fallback: bool,
}

fn fit_mekro(data: &Dataset, columns: &[usize], cfg: &IfbisConfig) -> Result<MekroModel> {
    let cols: Vec<&[f64]> = columns.iter().map(|&j| data.column(j)).collect();
    let problem = MekroProblem::new(&cols, data.y(), cfg.mekro_kernel)?.with_labels(columns.to_vec())?;
    Ok(problem.bic_path(&cfg.mekro)?.best_model().clone())
}

/// Ranks `j ∉ M_l` and cuts `A_{l+1}`.
fn conditional_step(
    data: &Dataset,
    current: &[usize],
    model: &MekroModel,
    marginal_ims: &[f64],
    marginal_omega: f64,
    hs: f64,
    room: usize,
    iteration: usize,
    cfg: &IfbisConfig,
) -> Result<Step> {
    let p = data.p();
    let outside: Vec<usize> = (0..p).filter(|j| !current.contains(j)).collect();
    let limit = match cfg.rule {
        ConditionalRule::PermutationMax => cfg.k_max,
        ConditionalRule::TopK(k) => k.min(cfg.k_max),
    }
    .min(room);

    let z = match surrogate(model) {
        Ok(z) => z,
        Err(Error::DegenerateSurrogate) => {
            let scores: Vec<(usize, f64)> = outside.iter().map(|&j| (j, marginal_ims[j])).collect();
            let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
            let mut candidates: Vec<usize> = rank_descending(&values)
                .into_iter()
                .filter(|&k| cfg.rule != ConditionalRule::PermutationMax || values[k] >= marginal_omega)
                .map(|k| scores[k].0)
                .collect();
            candidates.truncate(limit);
            return Ok(Step {
                candidates,
                scores,
                threshold: Some(marginal_omega),
                fallback: true,
            });
        }
        Err(e) => return Err(e),
    };

    let scorer = ConditionalScorer::new(&z, data.y(), hs, p, &cfg.screening)?;
    let mut scores = Vec::with_capacity(outside.len());
    for &j in &outside {
        let s = scorer.score(data.column(j)).map_err(|e| e.at_variable(j))?;
        scores.push((j, s.value));
    }
    let values: Vec<f64> = scores.iter().map(|s| s.1).collect();

    let threshold = match cfg.rule {
        ConditionalRule::TopK(_) => None,
        ConditionalRule::PermutationMax => {
            let n = data.n();
            let mut rng = stream(cfg.screening.seed, Purpose::ConditionalPermutation, iteration as u64);
            let mut pi: Vec<usize> = (0..n).collect();
            pi.shuffle(&mut rng);
            let mut permuted = vec![0.0; n];
            let mut null = Vec::with_capacity(outside.len());
            for &j in &outside {
                let col = data.column(j);
                for (dst, &src) in permuted.iter_mut().zip(&pi) {
                    *dst = col[src];
                }
                null.push(scorer.score(&permuted).map_err(|e| e.at_variable(j))?.value);
            }
            Some(lower_quantile(&null, Quantile::Max))
        }
    };

    let mut candidates: Vec<usize> = rank_descending(&values)
        .into_iter()
        .filter(|&k| threshold.map_or(true, |t| values[k] >= t))
        .map(|k| scores[k].0)
        .collect();
    candidates.truncate(limit);
    Ok(Step {
        candidates,
        scores,
        threshold,
        fallback: false,
    })
}

/// Runs the full iterative procedure.
pub fn ifbis_run(data: &Dataset, cfg: &IfbisConfig) -> Result<IfbisTrace> {
    cfg.validate()?;
    let scaling = if cfg.screening.rescale {
        ColumnScaling::fit(data)
    } else {
        ColumnScaling::identity(data.p())
    };
    let scaled = data.rescaled(&scaling);
    let (n, p) = (data.n(), data.p());
    let hs = h_star(n, p, cfg.screening.rate)?;
    let s0 = cfg.size_cap(n);

    // Steps 1–2. The data are already on the unit scale.
    let screen_cfg = ScreeningConfig {
        rescale: false,
        ..cfg.screening.clone()
    };
    let report = fbis_screen(&scaled, &screen_cfg).map_err(|e| e.at_iteration(1))?;
    let marginal_ims = report.ims();
    let mut a1 = report.selected.clone();
    a1.truncate(s0);

    let mut iterations = Vec::new();
    if a1.is_empty() {
        iterations.push(IterationRecord {
            candidates: a1,
            selected: Vec::new(),
            mekro_model: None,
            conditional_ims: Vec::new(),
            threshold: Some(report.omega_q),
            surrogate_fallback: false,
        });
        return Ok(IfbisTrace {
            h_star: hs,
            scaling,
            iterations,
            final_set: Vec::new(),
            stop_reason: StopReason::Converged,
        });
    }
    let model = fit_mekro(&scaled, &a1, cfg).map_err(|e| e.at_iteration(1))?;
    let mut current = sorted(model.selected.clone());
    iterations.push(IterationRecord {
        candidates: a1,
        selected: current.clone(),
        mekro_model: Some(model.clone()),
        conditional_ims: Vec::new(),
        threshold: Some(report.omega_q),
        surrogate_fallback: false,
    });
    if current.is_empty() {
        return Ok(IfbisTrace {
            h_star: hs,
            scaling,
            iterations,
            final_set: current,
            stop_reason: StopReason::Converged,
        });
    }
    if current.len() >= s0 {
        return Ok(IfbisTrace {
            h_star: hs,
            scaling,
            iterations,
            final_set: current,
            stop_reason: StopReason::SizeCap,
        });
    }

    let mut model = model;
    let stop_reason = loop {
        if iterations.len() >= cfg.max_iterations {
            break StopReason::IterationCap;
        }
        let iteration = iterations.len() + 1;
        let room = s0 - current.len();
        let step = conditional_step(
            &scaled,
            &current,
            &model,
            &marginal_ims,
            report.omega_q,
            hs,
            room,
            iteration,
            cfg,
        )
        .map_err(|e| e.at_iteration(iteration))?;
        if step.candidates.is_empty() {
            let nothing_scored = step.scores.is_empty();
            iterations.push(IterationRecord {
                candidates: Vec::new(),
                selected: current.clone(),
                mekro_model: None,
                conditional_ims: step.scores,
                threshold: step.threshold,
                surrogate_fallback: step.fallback,
            });
            // Scored but nothing passed: M is unchanged, which is convergence.
            break if nothing_scored {
                StopReason::EmptyAddition
            } else {
                StopReason::Converged
            };
        }
        // Previously kept variables first, strongest first, then the additions.
        let mut order: Vec<usize> = current.clone();
        let weight = |j: usize| {
            model
                .columns
                .iter()
                .position(|&c| c == j)
                .map_or(0.0, |k| model.lambda[k])
        };
        order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
        order.extend(step.candidates.iter().copied());
        let next = fit_mekro(&scaled, &order, cfg).map_err(|e| e.at_iteration(iteration))?;
        let next_set = sorted(next.selected.clone());
        iterations.push(IterationRecord {
            candidates: step.candidates,
            selected: next_set.clone(),
            mekro_model: Some(next.clone()),
            conditional_ims: step.scores,
            threshold: step.threshold,
            surrogate_fallback: step.fallback,
        });
        let unchanged = next_set == current;
        current = next_set;
        model = next;
        if current.len() >= s0 {
            break StopReason::SizeCap;
        }
        if unchanged {
            break StopReason::Converged;
        }
        if current.is_empty() {
            break StopReason::Converged;
        }
    };
    Ok(IfbisTrace {
        h_star: hs,
        scaling,
        iterations,
        final_set: current,
        stop_reason,
    })
}
