//! Bias-aware test of `H0: alpha = 0` for the CPC estimate.
//!
//! Under `H0` the estimate has mean at most `N / D` in magnitude and variance
//! `sigma^2 / D`, with `N = ||X_j|| * ||gamma_(k+1:r)||_1` and
//! `D = |X_j^T X_j - ||X_j^T U_(1:k)||^2|`. For a standardized design these are
//! `||gamma_(k+1:r)||_1` and `|1 - ||X_j^T U_(1:k)||^2|`. The acceptance region
//! is `[-N/D - q sqrt(sigma^2/D), N/D + q sqrt(sigma^2/D)]`.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::estimators::{basis_for, residual_denominator, Method};
use crate::linalg::{GenotypeMatrix, SpectralBasis};

/// Relative floor on `D`, scaled by `X_j^T X_j`.
pub const DEGENERATE_D_TOL: f64 = 1e-10;

/// Where the bias-bound numerator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSource {
    /// `||gamma_tail||_1` computed from known true coefficients.
    Truth,
    /// A user-supplied bound `B >= ||gamma_tail||_1`.
    UserBound,
}

impl BoundSource {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundSource::Truth => "truth",
            BoundSource::UserBound => "user_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasBound {
    pub numerator: f64,
    pub denominator: f64,
    pub source: BoundSource,
}

impl BiasBound {
    pub fn ratio(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// `||gamma_(k+1:r)||_1`.
pub fn gamma_tail_l1(gamma: &DVector<f64>, k: usize) -> f64 {
    gamma.iter().skip(k).map(|g| g.abs()).sum()
}

pub fn compute_nd(
    x: &GenotypeMatrix,
    target: usize,
    k: usize,
    gamma_tail_l1: f64,
    source: BoundSource,
) -> Result<BiasBound> {
    let basis = basis_for(x, Method::Cpc, target)?;
    compute_nd_with_basis(x, &basis, target, k, gamma_tail_l1, source)
}

/// `basis` must be the CPC decomposition of `x` for `target`.
pub fn compute_nd_with_basis(
    x: &GenotypeMatrix,
    basis: &SpectralBasis,
    target: usize,
    k: usize,
    gamma_tail_l1: f64,
    source: BoundSource,
) -> Result<BiasBound> {
    x.check_target(target)?;
    if !(gamma_tail_l1 >= 0.0) || !gamma_tail_l1.is_finite() {
        return Err(Error::InvalidBound(gamma_tail_l1));
    }
    if k > basis.rank() {
        return Err(Error::KTooLarge { k, rank: basis.rank() });
    }
    let xj = x.column(target);
    let self_norm2 = xj.norm_squared();
    let denominator = residual_denominator(&xj, basis, &basis.alignments(&xj), k);
    if !(denominator >= DEGENERATE_D_TOL * self_norm2) {
        return Err(Error::DegenerateD(denominator));
    }
    Ok(BiasBound {
        numerator: self_norm2.sqrt() * gamma_tail_l1,
        denominator,
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Known(f64),
    Estimated(f64),
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Known(s) | Sigma::Estimated(s) => s,
        }
    }

    pub fn is_estimated(self) -> bool {
        matches!(self, Sigma::Estimated(_))
    }
}

/// Degrees of freedom for the Student quantile when sigma is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DofConvention {
    /// `n - 1`.
    #[default]
    SampleSize,
    /// `n - k - 1`.
    Residual,
}

impl DofConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            DofConvention::SampleSize => "n-1",
            DofConvention::Residual => "n-k-1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "n-1" | "sample_size" => Some(DofConvention::SampleSize),
            "n-k-1" | "residual" => Some(DofConvention::Residual),
            _ => None,
        }
    }

    pub fn dof(self, n: usize, k: usize) -> Result<usize> {
        let used = match self {
            DofConvention::SampleSize => 1,
            DofConvention::Residual => k + 1,
        };
        if n <= used {
            return Err(Error::InsufficientDof { n, k });
        }
        Ok(n - used)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileFamily {
    Normal,
    Student { dof: usize },
}

impl fmt::Display for QuantileFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantileFamily::Normal => f.write_str("normal"),
            QuantileFamily::Student { dof } => write!(f, "student_t({dof})"),
        }
    }
}

impl QuantileFamily {
    /// Upper `a/2` quantile.
    pub fn upper_quantile(self, level: f64) -> f64 {
        let p = 1.0 - level / 2.0;
        match self {
            QuantileFamily::Normal => Normal::standard().inverse_cdf(p),
            QuantileFamily::Student { dof } => StudentsT::new(0.0, 1.0, dof as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub alpha_hat: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub sigma: f64,
    pub sigma_estimated: bool,
    pub level: f64,
    pub family: QuantileFamily,
    pub quantile: f64,
    pub interval: (f64, f64),
    pub reject: bool,
}

/// Rejects `H0` when `alpha_hat` falls outside the bias-widened interval.
///
/// `k` only matters for the `n - k - 1` degrees-of-freedom convention.
#[allow(clippy::too_many_arguments)]
pub fn test_h0(
    alpha_hat: f64,
    numerator: f64,
    denominator: f64,
    sigma: Sigma,
    n: usize,
    k: usize,
    level: f64,
    dof: DofConvention,
) -> Result<TestOutcome> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(denominator > 0.0) || !denominator.is_finite() {
        return Err(Error::DegenerateD(denominator));
    }
    if !(numerator >= 0.0) || !numerator.is_finite() {
        return Err(Error::InvalidBound(numerator));
    }
    let s = sigma.value();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidSigma(s));
    }
    let family = if sigma.is_estimated() {
        QuantileFamily::Student { dof: dof.dof(n, k)? }
    } else {
        QuantileFamily::Normal
    };
    let quantile = family.upper_quantile(level);
    let half_width = numerator / denominator + quantile * (s * s / denominator).sqrt();
    let interval = (-half_width, half_width);
    Ok(TestOutcome {
        alpha_hat,
        numerator,
        denominator,
        sigma: s,
        sigma_estimated: sigma.is_estimated(),
        level,
        family,
        quantile,
        interval,
        reject: !(alpha_hat >= interval.0 && alpha_hat <= interval.1),
    })
}

/// `sqrt(||residuals||^2 / (n - k - 1))`.
pub fn estimate_sigma(residuals: &DVector<f64>, k: usize) -> Result<f64> {
    let n = residuals.len();
    if n < k + 2 {
        return Err(Error::InsufficientDof { n, k });
    }
    Ok((residuals.norm_squared() / (n - k - 1) as f64).sqrt())
}
