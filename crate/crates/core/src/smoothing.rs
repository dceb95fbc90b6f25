//! Local-constant (Nadaraya–Watson) smoothing with univariate and product kernels.
//!
//! Fits at the design points always include the self weight, so the smoother
//! matrix `S(i,k) = K_h(x_k - x_i) / Σ_l K_h(x_l - x_i)` has a strictly positive
//! diagonal and its trace is the effective degrees of freedom of the fit.
//!
//! Rows whose kernel mass drops below [`WEIGHT_FLOOR`] fall back to the sample
//! mean of `y` and are counted in [`SmootherSummary::degenerate_rows`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};

/// Smallest admissible kernel mass `Σ_l K_h(x_l - e)` for one evaluation point.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Fitted values and trace of a linear smoother evaluated at its design points.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherSummary {
    pub fitted: Vec<f64>,
    pub trace: f64,
    pub degenerate_rows: usize,
}

impl SmootherSummary {
    /// Residual sum of squares against `y`.
    pub fn rss(&self, y: &[f64]) -> f64 {
        self.fitted
            .iter()
            .zip(y)
            .map(|(f, v)| (v - f) * (v - f))
            .sum()
    }
}

pub(crate) fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// The coordinates that take part in a product-kernel weight, i.e. those with
/// a finite bandwidth. Infinite coordinates contribute `K(0)` to every weight
/// and cancel from the ratio, so they are dropped here.
pub(crate) struct ProductKernel<'a> {
    cols: Vec<&'a [f64]>,
    inv: Vec<f64>,
    spec: KernelSpec,
    /// `Σ_j ln(K(0)/h_j)` over active coordinates.
    log_scale: f64,
}

impl<'a> ProductKernel<'a> {
    pub(crate) fn new(cols: &[&'a [f64]], h: &[Bandwidth], spec: KernelSpec) -> Self {
        let mut active = Vec::new();
        let mut inv = Vec::new();
        let mut log_scale = 0.0;
        for (col, bw) in cols.iter().zip(h) {
            if let Bandwidth::Finite(v) = bw {
                active.push(*col);
                inv.push(1.0 / v);
                log_scale += (spec.at_zero() / v).ln();
            }
        }
        ProductKernel {
            cols: active,
            inv,
            spec,
            log_scale,
        }
    }

    pub(crate) fn from_inverse(cols: &[&'a [f64]], lambda: &[f64], spec: KernelSpec) -> Self {
        let h: Vec<Bandwidth> = lambda.iter().map(|&l| Bandwidth::from_inverse(l)).collect();
        Self::new(cols, &h, spec)
    }

    pub(crate) fn is_constant(&self) -> bool {
        self.cols.is_empty()
    }

    /// `K(u)/K(0)` product between design row `k` and an arbitrary point given
    /// by `coord(j)` for active coordinate `j`.
    #[inline]
    fn weight_with(&self, k: usize, coord: impl Fn(usize) -> f64) -> f64 {
        match self.spec {
            KernelSpec::Gaussian => {
                let mut s = 0.0;
                for (j, (col, inv)) in self.cols.iter().zip(&self.inv).enumerate() {
                    let u = (coord(j) - col[k]) * inv;
                    s += u * u;
                }
                self.spec.relative_sq(s)
            }
            KernelSpec::Epanechnikov => {
                let mut w = 1.0;
                for (j, (col, inv)) in self.cols.iter().zip(&self.inv).enumerate() {
                    w *= self.spec.relative((coord(j) - col[k]) * inv);
                    if w == 0.0 {
                        break;
                    }
                }
                w
            }
        }
    }

    #[inline]
    pub(crate) fn pair(&self, i: usize, k: usize) -> f64 {
        self.weight_with(k, |j| self.cols[j][i])
    }

    /// True when a row with relative kernel mass `den` falls under the floor.
    #[inline]
    fn below_floor(&self, den: f64) -> bool {
        !(den > 0.0) || den.ln() + self.log_scale < WEIGHT_FLOOR.ln()
    }

    /// Numerators and relative denominators at the design points, exploiting
    /// the symmetry of the pair weights.
    pub(crate) fn design_sums(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let mut num = y.to_vec();
        let mut den = vec![1.0; n];
        for i in 0..n {
            let yi = y[i];
            let (mut ni, mut di) = (0.0, 0.0);
            for k in (i + 1)..n {
                let w = self.pair(i, k);
                ni += w * y[k];
                di += w;
                num[k] += w * yi;
                den[k] += w;
            }
            num[i] += ni;
            den[i] += di;
        }
        (num, den)
    }

    pub(crate) fn summary(&self, y: &[f64]) -> SmootherSummary {
        let n = y.len();
        let ybar = mean(y);
        if self.is_constant() {
            return SmootherSummary {
                fitted: vec![ybar; n],
                trace: 1.0,
                degenerate_rows: 0,
            };
        }
        let (num, den) = self.design_sums(y);
        let mut fitted = Vec::with_capacity(n);
        let mut trace = 0.0;
        let mut degenerate_rows = 0;
        for (nu, de) in num.iter().zip(&den) {
            if self.below_floor(*de) {
                fitted.push(ybar);
                trace += 1.0 / n as f64;
                degenerate_rows += 1;
            } else {
                fitted.push(nu / de);
                trace += 1.0 / de;
            }
        }
        SmootherSummary {
            fitted,
            trace,
            degenerate_rows,
        }
    }

    /// Trace only, without touching a response.
    pub(crate) fn trace(&self, n: usize) -> f64 {
        if self.is_constant() {
            return 1.0;
        }
        let mut den = vec![1.0; n];
        for i in 0..n {
            let mut di = 0.0;
            for (k, dk) in den.iter_mut().enumerate().skip(i + 1) {
                let w = self.pair(i, k);
                di += w;
                *dk += w;
            }
            den[i] += di;
        }
        den.iter()
            .map(|&d| if self.below_floor(d) { 1.0 / n as f64 } else { 1.0 / d })
            .sum()
    }

    /// Fit at points that need not coincide with the design rows.
    /// `point(m, j)` returns coordinate `j` (over all original columns) of point `m`.
    pub(crate) fn predict(
        &self,
        active_index: &[usize],
        y: &[f64],
        m: usize,
        point: impl Fn(usize, usize) -> f64,
    ) -> (Vec<f64>, usize) {
        let ybar = mean(y);
        if self.is_constant() {
            return (vec![ybar; m], 0);
        }
        let mut out = Vec::with_capacity(m);
        let mut degenerate = 0;
        for e in 0..m {
            let (mut nu, mut de) = (0.0, 0.0);
            for (k, yk) in y.iter().enumerate() {
                let w = self.weight_with(k, |j| point(e, active_index[j]));
                nu += w * yk;
                de += w;
            }
            if self.below_floor(de) {
                out.push(ybar);
                degenerate += 1;
            } else {
                out.push(nu / de);
            }
        }
        (out, degenerate)
    }
}

fn check_xy(x: &[f64], y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_len(y.len(), x.len())?;
    ensure_finite(x, "x")?;
    ensure_finite(y, "y")
}

fn check_columns(cols: &[&[f64]], y: &[f64], h: &[Bandwidth]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    if cols.is_empty() {
        return Err(Error::InvalidDimension("product kernel needs at least one column"));
    }
    ensure_len(cols.len(), h.len())?;
    for col in cols {
        ensure_len(y.len(), col.len())?;
        ensure_finite(col, "x")?;
    }
    for bw in h {
        bw.validate()?;
    }
    ensure_finite(y, "y")
}

/// Univariate Nadaraya–Watson fit evaluated at `eval_points`.
pub fn nw_fit(
    x: &[f64],
    y: &[f64],
    h: Bandwidth,
    spec: KernelSpec,
    eval_points: &[f64],
) -> Result<Vec<f64>> {
    check_xy(x, y)?;
    h.validate()?;
    ensure_finite(eval_points, "evaluation points")?;
    let kernel = ProductKernel::new(&[x], &[h], spec);
    Ok(kernel
        .predict(&[0], y, eval_points.len(), |e, _| eval_points[e])
        .0)
}

/// Fitted values at the design points together with `tr(S)`.
pub fn smoother_summary(
    x: &[f64],
    y: &[f64],
    h: Bandwidth,
    spec: KernelSpec,
) -> Result<SmootherSummary> {
    check_xy(x, y)?;
    h.validate()?;
    Ok(ProductKernel::new(&[x], &[h], spec).summary(y))
}

/// The dense `n × n` smoother matrix, row-major. Intended for diagnostics and
/// small problems.
pub fn smoother_matrix(x: &[f64], h: Bandwidth, spec: KernelSpec) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_finite(x, "x")?;
    h.validate()?;
    let n = x.len();
    let kernel = ProductKernel::new(&[x], &[h], spec);
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut s[i * n..(i + 1) * n];
        for (k, v) in row.iter_mut().enumerate() {
            *v = if k == i { 1.0 } else { kernel.pair(i, k) };
        }
        let total: f64 = row.iter().sum();
        if kernel.below_floor(total) {
            row.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        } else {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    Ok(s)
}

/// Product-kernel Nadaraya–Watson fit. `columns` holds the `d` design columns
/// (each of length `n`); `eval_points` holds `d` columns of length `m`.
pub fn nw_fit_product(
    columns: &[&[f64]],
    y: &[f64],
    h: &[Bandwidth],
    spec: KernelSpec,
    eval_points: &[&[f64]],
) -> Result<Vec<f64>> {
    check_columns(columns, y, h)?;
    ensure_len(columns.len(), eval_points.len())?;
    let m = eval_points.first().map_or(0, |c| c.len());
    for col in eval_points {
        ensure_len(m, col.len())?;
        ensure_finite(col, "evaluation points")?;
    }
    let kernel = ProductKernel::new(columns, h, spec);
    let active: Vec<usize> = (0..columns.len())
        .filter(|&j| !h[j].is_infinite())
        .collect();
    Ok(kernel.predict(&active, y, m, |e, j| eval_points[j][e]).0)
}

/// Product-kernel fit at the design points, with trace.
pub fn smoother_summary_product(
    columns: &[&[f64]],
    y: &[f64],
    h: &[Bandwidth],
    spec: KernelSpec,
) -> Result<SmootherSummary> {
    check_columns(columns, y, h)?;
    Ok(ProductKernel::new(columns, h, spec).summary(y))
}

/// `tr(S)` of the product-kernel smoother.
pub fn smoother_trace_product(columns: &[&[f64]], h: &[Bandwidth], spec: KernelSpec) -> Result<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    if n == 0 {
        return Err(Error::EmptyData);
    }
    for col in columns {
        ensure_len(n, col.len())?;
        ensure_finite(col, "x")?;
    }
    ensure_len(columns.len(), h.len())?;
    for bw in h {
        bw.validate()?;
    }
    Ok(ProductKernel::new(columns, h, spec).trace(n))
}

/// `h · tr(S_h)`, which approaches `K(0)` for local-constant smoothing as the
/// sample grows with `h → 0` and `nh → ∞`.
pub fn scaled_trace(x: &[f64], h: f64, spec: KernelSpec) -> Result<f64> {
    let bw = Bandwidth::finite(h).ok_or(Error::InvalidConfig("bandwidth must be positive"))?;
    if x.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_finite(x, "x")?;
    Ok(h * ProductKernel::new(&[x], &[bw], spec).trace(x.len()))
}
