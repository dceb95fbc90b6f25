//! Nonparametric variable screening for ultrahigh-dimensional regression.
//!
//! Predictors are ranked by the smoothing bandwidth their marginal
//! Nadaraya–Watson fit prefers: an important predictor favors a small
//! bandwidth, an irrelevant one favors `h = ∞`. The crate provides
//!
//! * [`smoothing`]: univariate and product-kernel local-constant smoothers
//!   together with their smoother-matrix traces;
//! * [`screening`]: the two-bandwidth information criterion, the importance
//!   measure and its permutation threshold, plus a linear SIS baseline;
//! * [`mekro`]: kernel regression with per-variable inverse bandwidths
//!   under a budget `Σλ ≤ ξ`, tuned by BIC;
//! * [`ifbis`]: the iterative procedure alternating surrogate-conditional
//!   screening and MEKRO refinement;
//! * [`datagen`] and [`metrics`]: simulation designs and evaluation helpers.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod data;
pub mod datagen;
pub mod error;
pub mod ifbis;
pub mod kernel;
pub mod mekro;
pub mod metrics;
pub mod rng;
pub mod screening;
pub mod smoothing;

pub use data::{ColumnScaling, Dataset};
pub use error::{Error, Result};
pub use kernel::{kernel_eval, Bandwidth, KernelSpec};
