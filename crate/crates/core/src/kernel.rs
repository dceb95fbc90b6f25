//! Kernel families and bandwidths.

use core::fmt;

/// `(2π)^(-1/2)`, the Gaussian kernel at zero.
pub const GAUSSIAN_AT_ZERO: f64 = 0.398_942_280_401_432_7;

/// Normalized kernel family shared by every smoother.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum KernelSpec {
    /// `K(u) = (2π)^(-1/2) exp(-u²/2)`.
    #[default]
    Gaussian,
    /// `K(u) = 0.75 (1 - u²)` on `|u| <= 1`.
    Epanechnikov,
}

impl KernelSpec {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => GAUSSIAN_AT_ZERO * (-0.5 * u * u).exp(),
            KernelSpec::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K(0)`.
    #[inline]
    pub fn at_zero(self) -> f64 {
        match self {
            KernelSpec::Gaussian => GAUSSIAN_AT_ZERO,
            KernelSpec::Epanechnikov => 0.75,
        }
    }

    /// `K(u) / K(0)`. Normalizing constants cancel in every Nadaraya–Watson
    /// ratio, so the hot loops work with this relative weight.
    #[inline]
    pub(crate) fn relative(self, u: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => (-0.5 * u * u).exp(),
            KernelSpec::Epanechnikov => {
                let t = 1.0 - u * u;
                if t > 0.0 {
                    t
                } else {
                    0.0
                }
            }
        }
    }

    /// Relative weight as a function of the squared scaled distance.
    #[inline]
    pub(crate) fn relative_sq(self, u2: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => (-0.5 * u2).exp(),
            KernelSpec::Epanechnikov => {
                let t = 1.0 - u2;
                if t > 0.0 {
                    t
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the kernel is differentiable everywhere.
    pub fn is_smooth(self) -> bool {
        matches!(self, KernelSpec::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Gaussian => "gaussian",
            KernelSpec::Epanechnikov => "epanechnikov",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "gaussian" => Some(KernelSpec::Gaussian),
            "epanechnikov" => Some(KernelSpec::Epanechnikov),
            _ => None,
        }
    }
}

/// `K(u)` for the given family.
pub fn kernel_eval(u: f64, spec: KernelSpec) -> f64 {
    spec.eval(u)
}

/// A smoothing bandwidth. `Infinite` reduces every smoother to the sample mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Bandwidth {
    Finite(f64),
    Infinite,
}

impl Bandwidth {
    /// A finite bandwidth, or `None` unless `h` is positive and finite.
    pub fn finite(h: f64) -> Option<Self> {
        (h.is_finite() && h > 0.0).then_some(Bandwidth::Finite(h))
    }

    /// Bandwidth from an inverse bandwidth `λ = 1/h`; `λ = 0` is infinite.
    pub fn from_inverse(lambda: f64) -> Self {
        if lambda > 0.0 {
            Bandwidth::Finite(1.0 / lambda)
        } else {
            Bandwidth::Infinite
        }
    }

    /// `1/h`, zero for the infinite bandwidth.
    pub fn inverse(self) -> f64 {
        match self {
            Bandwidth::Finite(h) => 1.0 / h,
            Bandwidth::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bandwidth::Infinite)
    }

    pub(crate) fn validate(self) -> crate::Result<()> {
        match self {
            Bandwidth::Finite(h) if !(h.is_finite() && h > 0.0) => {
                Err(crate::Error::InvalidConfig("bandwidth must be positive and finite"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Finite(h) => write!(f, "{h}"),
            Bandwidth::Infinite => f.write_str("inf"),
        }
    }
}
