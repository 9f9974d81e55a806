//! PSC and CPC regressions for a single coefficient, with their closed-form
//! bias and variance.
//!
//! Both methods regress the response on the target column `X_j` plus the top
//! `k` left singular vectors of a decomposition: PSC decomposes the full
//! matrix `X`, CPC decomposes `X` with column `j` removed. Target indices are
//! zero-based throughout the library.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_least_squares, thin_svd, GenotypeMatrix, SpectralBasis, DEFAULT_COND_TOL};

/// Relative tolerance on the identifiability denominator, scaled by `X_j^T X_j`.
pub const DENOMINATOR_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Components from the full matrix.
    Psc,
    /// Components from the matrix with the target column removed.
    Cpc,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Psc, Method::Cpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Psc => "PSC",
            Method::Cpc => "CPC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The decomposition `method` uses for target column `target`.
pub fn basis_for(x: &GenotypeMatrix, method: Method, target: usize) -> Result<SpectralBasis> {
    x.check_target(target)?;
    match method {
        Method::Psc => thin_svd(x.values(), 1.0),
        Method::Cpc => thin_svd(&x.without_column(target), 1.0),
    }
}

/// `[X_j | U_(1) .. U_(k)]`.
pub fn design_from_basis(x: &GenotypeMatrix, basis: &SpectralBasis, target: usize, k: usize) -> Result<DMatrix<f64>> {
    x.check_target(target)?;
    if k > basis.rank() {
        return Err(Error::KTooLarge { k, rank: basis.rank() });
    }
    let n = x.nrows();
    let mut z = DMatrix::zeros(n, k + 1);
    z.set_column(0, &x.column(target));
    z.columns_mut(1, k).copy_from(&basis.left().columns(0, k));
    Ok(z)
}

pub fn build_design(
    x: &GenotypeMatrix,
    method: Method,
    target: usize,
    k: usize,
) -> Result<(DMatrix<f64>, SpectralBasis)> {
    let basis = basis_for(x, method, target)?;
    let z = design_from_basis(x, &basis, target, k)?;
    Ok((z, basis))
}

/// Least-squares fit of one method at one `(target, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: Method,
    pub target: usize,
    pub k: usize,
    pub alpha_hat: f64,
    pub gamma_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub condition_ratio: f64,
}

pub fn fit(x: &GenotypeMatrix, y: &DVector<f64>, method: Method, target: usize, k: usize) -> Result<FitResult> {
    let basis = basis_for(x, method, target)?;
    fit_with_basis(x, y, &basis, method, target, k, DEFAULT_COND_TOL)
}

/// Fits with a precomputed decomposition. `basis` must be the one
/// `basis_for(x, method, target)` would return.
pub fn fit_with_basis(
    x: &GenotypeMatrix,
    y: &DVector<f64>,
    basis: &SpectralBasis,
    method: Method,
    target: usize,
    k: usize,
    cond_tol: f64,
) -> Result<FitResult> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    let z = design_from_basis(x, basis, target, k)?;
    let ls = solve_least_squares(&z, y, cond_tol)?;
    let residuals = y - &z * &ls.coefficients;
    Ok(FitResult {
        method,
        target,
        k,
        alpha_hat: ls.coefficients[0],
        gamma_hat: ls.coefficients.rows(1, k).into_owned(),
        residuals,
        condition_ratio: ls.condition_ratio,
    })
}

fn beta_without(beta: &DVector<f64>, target: usize) -> DVector<f64> {
    beta.clone().remove_row(target)
}

fn check_beta(x: &GenotypeMatrix, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but coefficient vector has length {}",
            x.ncols(),
            beta.len()
        )));
    }
    Ok(())
}

/// `diag(sigma) V^T b`: coordinates of `M b` in the left singular basis of `M`.
pub fn gamma_from_basis(basis: &SpectralBasis, b: &DVector<f64>) -> DVector<f64> {
    basis.right().tr_mul(b).component_mul(basis.singular_values())
}

/// Exact CPC coefficients: `X_(-j) beta_(-j) = U gamma`.
pub fn gamma_truth_cpc(x: &GenotypeMatrix, beta: &DVector<f64>, target: usize) -> Result<DVector<f64>> {
    check_beta(x, beta)?;
    let basis = basis_for(x, Method::Cpc, target)?;
    Ok(gamma_from_basis(&basis, &beta_without(beta, target)))
}

/// Exact PSC coefficients: `X beta = U_bar gamma_bar`.
pub fn gamma_truth_psc(x: &GenotypeMatrix, beta: &DVector<f64>) -> Result<DVector<f64>> {
    check_beta(x, beta)?;
    let basis = thin_svd(x.values(), 1.0)?;
    Ok(gamma_from_basis(&basis, beta))
}

/// The coefficient vector a method's decomposition absorbs: `beta_(-j)` for
/// CPC and the full `beta` for PSC.
pub fn gamma_truth_with_basis(
    basis: &SpectralBasis,
    beta: &DVector<f64>,
    method: Method,
    target: usize,
) -> DVector<f64> {
    match method {
        Method::Psc => gamma_from_basis(basis, beta),
        Method::Cpc => gamma_from_basis(basis, &beta_without(beta, target)),
    }
}

/// Closed-form moments of the estimated target coefficient, conditional on X.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalMoments {
    pub method: Method,
    pub k: usize,
    pub bias: f64,
    pub variance: f64,
    pub expectation: f64,
    /// `c_s = X_j^T U_(s)` for the `k` retained components.
    pub corr_coeffs: DVector<f64>,
    /// `X_j^T X_j - sum_{s<=k} c_s^2`.
    pub denominator: f64,
}

pub fn denominator_tol(x: &GenotypeMatrix, target: usize) -> f64 {
    DENOMINATOR_REL_TOL * x.column(target).norm_squared()
}

/// `D = X_j^T X_j - sum_{s<=k} c_s^2`, evaluated as the squared norm of the
/// residual `X_j - U_(1:k) c_(1:k)`. The direct difference loses all accuracy
/// when `D` is tiny relative to `X_j^T X_j`.
pub fn residual_denominator(
    xj: &nalgebra::DVectorView<'_, f64>,
    basis: &SpectralBasis,
    c: &DVector<f64>,
    k: usize,
) -> f64 {
    let fitted = basis.left().columns(0, k) * c.rows(0, k);
    (xj - fitted).norm_squared()
}

/// Moments from a precomputed decomposition and its truth coefficients.
///
/// CPC: `E = beta_j + X_j^T U_tail gamma_tail / D`.
/// PSC: `E = X_j^T U_tail gamma_tail / D` (the target column is absorbed by
/// the components, so `beta_j` enters only through `gamma`).
/// In both cases `Var = sigma^2 / D`.
#[allow(clippy::too_many_arguments)]
pub fn moments_from_basis(
    x: &GenotypeMatrix,
    basis: &SpectralBasis,
    gamma: &DVector<f64>,
    beta_target: f64,
    method: Method,
    target: usize,
    k: usize,
    noise_var: f64,
) -> Result<TheoreticalMoments> {
    x.check_target(target)?;
    let r = basis.rank();
    if k > r {
        return Err(Error::KTooLarge { k, rank: r });
    }
    if gamma.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "gamma has length {} but the decomposition has rank {r}",
            gamma.len()
        )));
    }
    let xj = x.column(target);
    let c = basis.alignments(&xj);
    let denominator = residual_denominator(&xj, basis, &c, k);
    let tol = denominator_tol(x, target);
    if !(denominator > tol) || (method == Method::Psc && k == r) {
        return Err(Error::NotIdentifiable {
            measure: denominator,
            tolerance: tol,
        });
    }
    let tail: f64 = c
        .rows(k, r - k)
        .iter()
        .zip(gamma.rows(k, r - k).iter())
        .map(|(a, b)| a * b)
        .sum();
    let expectation = match method {
        Method::Cpc => beta_target + tail / denominator,
        Method::Psc => tail / denominator,
    };
    Ok(TheoreticalMoments {
        method,
        k,
        bias: expectation - beta_target,
        variance: noise_var / denominator,
        expectation,
        corr_coeffs: c.rows(0, k).into_owned(),
        denominator,
    })
}

pub fn cpc_moments(
    x: &GenotypeMatrix,
    beta: &DVector<f64>,
    target: usize,
    k: usize,
    noise_var: f64,
) -> Result<TheoreticalMoments> {
    method_moments(x, beta, Method::Cpc, target, k, noise_var)
}

pub fn psc_moments(
    x: &GenotypeMatrix,
    beta: &DVector<f64>,
    target: usize,
    k: usize,
    noise_var: f64,
) -> Result<TheoreticalMoments> {
    method_moments(x, beta, Method::Psc, target, k, noise_var)
}

pub fn method_moments(
    x: &GenotypeMatrix,
    beta: &DVector<f64>,
    method: Method,
    target: usize,
    k: usize,
    noise_var: f64,
) -> Result<TheoreticalMoments> {
    check_beta(x, beta)?;
    let basis = basis_for(x, method, target)?;
    let gamma = gamma_truth_with_basis(&basis, beta, method, target);
    moments_from_basis(x, &basis, &gamma, beta[target], method, target, k, noise_var)
}

/// `||X_j^T U_bar_(1:k)||^2 - ||X_j^T U_(1:k)||^2`; nonnegative exactly when
/// CPC has the smaller variance.
pub fn variance_dominance(x: &GenotypeMatrix, target: usize, k: usize) -> Result<f64> {
    let psc = basis_for(x, Method::Psc, target)?;
    let cpc = basis_for(x, Method::Cpc, target)?;
    variance_dominance_with(x, &psc, &cpc, target, k)
}

pub fn variance_dominance_with(
    x: &GenotypeMatrix,
    psc: &SpectralBasis,
    cpc: &SpectralBasis,
    target: usize,
    k: usize,
) -> Result<f64> {
    let rank = psc.rank().min(cpc.rank());
    if k > rank {
        return Err(Error::KTooLarge { k, rank });
    }
    let xj = x.column(target);
    let head = |b: &SpectralBasis| b.left().columns(0, k).tr_mul(&xj).norm_squared();
    Ok(head(psc) - head(cpc))
}

/// Upper bound on |CPC bias| given `||gamma||_1 <= bound`:
/// `bound * sum_{s>k} |c_s| / D`.
pub fn bias_bound_l1(x: &GenotypeMatrix, target: usize, k: usize, bound: f64) -> Result<f64> {
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::InvalidBound(bound));
    }
    let basis = basis_for(x, Method::Cpc, target)?;
    let r = basis.rank();
    if k > r {
        return Err(Error::KTooLarge { k, rank: r });
    }
    let xj = x.column(target);
    let c = basis.alignments(&xj);
    let denominator = xj.norm_squared() - c.rows(0, k).norm_squared();
    let tol = denominator_tol(x, target);
    if !(denominator > tol) {
        return Err(Error::NotIdentifiable {
            measure: denominator,
            tolerance: tol,
        });
    }
    let tail: f64 = c.rows(k, r - k).iter().map(|v| v.abs()).sum();
    Ok(bound * tail / denominator)
}

/// Memoizes decompositions of one matrix, keyed by the excluded column
/// (`None` for the full matrix). Safe for concurrent readers.
pub struct DecompositionCache<'a> {
    x: &'a GenotypeMatrix,
    entries: RwLock<HashMap<Option<usize>, Arc<SpectralBasis>>>,
    computed: AtomicUsize,
}

impl<'a> DecompositionCache<'a> {
    pub fn new(x: &'a GenotypeMatrix) -> Self {
        Self {
            x,
            entries: RwLock::new(HashMap::new()),
            computed: AtomicUsize::new(0),
        }
    }

    pub fn matrix(&self) -> &'a GenotypeMatrix {
        self.x
    }

    pub fn basis(&self, method: Method, target: usize) -> Result<Arc<SpectralBasis>> {
        self.x.check_target(target)?;
        let key = match method {
            Method::Psc => None,
            Method::Cpc => Some(target),
        };
        if let Some(b) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(b));
        }
        let basis = Arc::new(basis_for(self.x, method, target)?);
        self.computed.fetch_add(1, Ordering::Relaxed);
        let mut entries = self.entries.write().expect("cache lock poisoned");
        Ok(Arc::clone(entries.entry(key).or_insert(basis)))
    }

    /// Drops a cached leave-one-out decomposition.
    pub fn evict(&self, target: usize) {
        self.entries.write().expect("cache lock poisoned").remove(&Some(target));
    }

    /// Number of decompositions computed so far.
    pub fn decompositions(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> GenotypeMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        GenotypeMatrix::center_normalize(&raw).unwrap()
    }

    /// Centered, orthonormal columns (Hadamard rows without the constant one).
    fn orthonormal_design() -> GenotypeMatrix {
        #[rustfmt::skip]
        let h = DMatrix::from_row_slice(8, 4, &[
             1.0,  1.0,  1.0,  1.0,
            -1.0,  1.0, -1.0,  1.0,
             1.0, -1.0, -1.0,  1.0,
            -1.0, -1.0,  1.0,  1.0,
             1.0,  1.0,  1.0, -1.0,
            -1.0,  1.0, -1.0, -1.0,
             1.0, -1.0, -1.0, -1.0,
            -1.0, -1.0,  1.0, -1.0,
        ]);
        GenotypeMatrix::center_normalize(&h).unwrap()
    }

    fn random_beta(p: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn k_zero_is_univariate() {
        let x = gaussian(20, 5, 1);
        for method in Method::ALL {
            let (z, _) = build_design(&x, method, 2, 0).unwrap();
            assert_eq!(z.ncols(), 1);
            assert_eq!(z.column(0), x.column(2));
        }
    }

    #[test]
    fn cpc_on_orthonormal_design_is_orthogonal() {
        let x = orthonormal_design();
        let (z, basis) = build_design(&x, Method::Cpc, 0, 3).unwrap();
        let gram = z.tr_mul(&z);
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-12);
        assert!(basis.alignments(&x.column(0)).amax() < 1e-12);
    }

    #[test]
    fn psc_at_full_rank_is_not_identifiable() {
        let x = gaussian(30, 6, 2);
        let y = random_beta(30, 3);
        let rank = basis_for(&x, Method::Psc, 0).unwrap().rank();
        assert!(fit(&x, &y, Method::Psc, 0, rank).unwrap_err().is_not_identifiable());
    }

    #[test]
    fn k_above_rank_is_rejected() {
        let x = gaussian(10, 4, 4);
        assert!(matches!(
            build_design(&x, Method::Cpc, 0, 4),
            Err(Error::KTooLarge { k: 4, rank: 3 })
        ));
    }

    #[test]
    fn noiseless_target_only_response_is_recovered_by_cpc() {
        let x = gaussian(40, 8, 5);
        let y = x.column(0).into_owned();
        for k in 0..=7 {
            let f = fit(&x, &y, Method::Cpc, 0, k).unwrap();
            assert_abs_diff_eq!(f.alpha_hat, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn residuals_match_design() {
        let x = gaussian(25, 6, 6);
        let y = random_beta(25, 7);
        for method in Method::ALL {
            let f = fit(&x, &y, method, 1, 3).unwrap();
            let (z, _) = build_design(&x, method, 1, 3).unwrap();
            let mut coef = DVector::zeros(4);
            coef[0] = f.alpha_hat;
            coef.rows_mut(1, 3).copy_from(&f.gamma_hat);
            assert!((&f.residuals - (&y - z * coef)).amax() < 1e-12);
        }
    }

    #[test]
    fn gamma_truth_cpc_cases() {
        let x = gaussian(30, 6, 8);
        let mut beta = DVector::zeros(6);
        beta[2] = 1.5;
        assert_eq!(gamma_truth_cpc(&x, &beta, 2).unwrap().amax(), 0.0);

        let beta = random_beta(6, 9);
        let gamma = gamma_truth_cpc(&x, &beta, 2).unwrap();
        let basis = basis_for(&x, Method::Cpc, 2).unwrap();
        let lhs = basis.left() * gamma;
        let rhs = x.without_column(2) * beta.remove_row(2);
        assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn gamma_truth_cpc_orthonormal_has_unit_spectrum() {
        let x = orthonormal_design();
        let beta = DVector::from_vec(vec![0.3, 1.0, -2.0, 0.5]);
        let gamma = gamma_truth_cpc(&x, &beta, 0).unwrap();
        let basis = basis_for(&x, Method::Cpc, 0).unwrap();
        for s in basis.singular_values().iter() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
        }
        let expected = basis.right().tr_mul(&beta.remove_row(0));
        assert!((gamma - expected).amax() < 1e-12);
    }

    #[test]
    fn gamma_truth_psc_cases() {
        let x = gaussian(12, 5, 10);
        assert_eq!(gamma_truth_psc(&x, &DVector::zeros(5)).unwrap().amax(), 0.0);

        let beta = random_beta(5, 11);
        let gamma = gamma_truth_psc(&x, &beta).unwrap();
        let basis = thin_svd(x.values(), 1.0).unwrap();
        assert!((basis.left() * gamma - x.values() * &beta).amax() < 1e-10);
    }

    #[test]
    fn gamma_truth_psc_rank_one() {
        let u = DVector::from_vec(vec![1.0, -1.0, 2.0, -2.0]);
        let v = DVector::from_vec(vec![1.0, 3.0]);
        let x = GenotypeMatrix::new(&u * v.transpose()).unwrap();
        let beta = DVector::from_vec(vec![0.5, -1.0]);
        let basis = thin_svd(x.values(), 1.0).unwrap();
        assert_eq!(basis.rank(), 1);
        let gamma = gamma_truth_psc(&x, &beta).unwrap();
        let v1 = basis.right().column(0);
        assert_abs_diff_eq!(gamma[0], basis.singular_values()[0] * v1.dot(&beta), epsilon = 1e-12);
    }

    #[test]
    fn cpc_moments_full_rank_has_zero_bias() {
        let x = gaussian(40, 7, 12);
        let beta = random_beta(7, 13);
        let r = basis_for(&x, Method::Cpc, 0).unwrap().rank();
        let m = cpc_moments(&x, &beta, 0, r, 1.0).unwrap();
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn cpc_variance_is_noise_when_target_orthogonal() {
        let x = orthonormal_design();
        let beta = DVector::from_vec(vec![1.0, 1.0, -1.0, 0.0]);
        for k in 0..=3 {
            let m = cpc_moments(&x, &beta, 0, k, 2.5).unwrap();
            assert_abs_diff_eq!(m.variance, 2.5, epsilon = 1e-12);
            assert_abs_diff_eq!(m.denominator, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn psc_moments_zero_beta() {
        let x = gaussian(30, 6, 14);
        let m = psc_moments(&x, &DVector::zeros(6), 0, 2, 1.0).unwrap();
        assert_eq!(m.expectation, 0.0);
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn psc_moments_at_full_rank_are_not_identifiable() {
        let x = gaussian(30, 6, 15);
        let beta = random_beta(6, 16);
        assert!(psc_moments(&x, &beta, 0, 6, 1.0).unwrap_err().is_not_identifiable());
    }

    #[test]
    fn noiseless_fit_equals_expectation() {
        for seed in 0..10 {
            let x = gaussian(30, 8, 100 + seed);
            let beta = random_beta(8, 200 + seed);
            let y = x.values() * &beta;
            for method in Method::ALL {
                for k in 0..6 {
                    let target = (seed as usize) % 8;
                    let m = method_moments(&x, &beta, method, target, k, 1.0).unwrap();
                    let f = fit(&x, &y, method, target, k).unwrap();
                    assert_abs_diff_eq!(f.alpha_hat, m.expectation, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn variance_matches_inverse_gram_entry() {
        // appendix route: sigma^2 [(Z^T Z)^{-1}]_00
        let x = gaussian(50, 10, 17);
        let beta = random_beta(10, 18);
        for method in Method::ALL {
            for k in [0, 1, 4, 8] {
                let m = method_moments(&x, &beta, method, 3, k, 1.7).unwrap();
                let (z, _) = build_design(&x, method, 3, k).unwrap();
                let inv = z.tr_mul(&z).try_inverse().unwrap();
                assert_abs_diff_eq!(m.variance, 1.7 * inv[(0, 0)], epsilon = 1e-10 * m.variance.max(1.0));
            }
        }
    }

    #[test]
    fn zero_confounding_gives_zero_cpc_bias() {
        let x = orthonormal_design();
        let beta = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        for k in 0..=3 {
            let m = cpc_moments(&x, &beta, 0, k, 1.0).unwrap();
            assert!(m.bias.abs() < 1e-12);
        }
    }

    #[test]
    fn dominance_on_orthonormal_design() {
        let x = orthonormal_design();
        for k in 1..=3 {
            assert!(variance_dominance(&x, 0, k).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn dominance_on_gaussian_designs() {
        for seed in 0..30 {
            let x = gaussian(40, 10, 300 + seed);
            for k in 1..=8 {
                assert!(variance_dominance(&x, 0, k).unwrap() >= -1e-8);
            }
        }
    }

    #[test]
    fn l1_bound_cases() {
        let x = gaussian(40, 8, 19);
        assert_eq!(bias_bound_l1(&x, 0, 2, 0.0).unwrap(), 0.0);
        let r = basis_for(&x, Method::Cpc, 0).unwrap().rank();
        assert_eq!(bias_bound_l1(&x, 0, r, 3.0).unwrap(), 0.0);
        assert!(matches!(bias_bound_l1(&x, 0, 2, -1.0), Err(Error::InvalidBound(_))));
    }

    #[test]
    fn l1_bound_dominates_bias() {
        for seed in 0..20 {
            let x = gaussian(40, 10, 400 + seed);
            let beta = random_beta(10, 500 + seed);
            let gamma = gamma_truth_cpc(&x, &beta, 0).unwrap();
            let b = gamma.lp_norm(1);
            for k in 0..9 {
                let m = cpc_moments(&x, &beta, 0, k, 1.0).unwrap();
                let bound = bias_bound_l1(&x, 0, k, b).unwrap();
                assert!(bound + 1e-12 >= m.bias.abs());
            }
        }
    }

    #[test]
    fn cache_counts_decompositions() {
        let x = gaussian(20, 5, 20);
        let cache = DecompositionCache::new(&x);
        for j in 0..5 {
            cache.basis(Method::Psc, j).unwrap();
            cache.basis(Method::Cpc, j).unwrap();
            cache.basis(Method::Cpc, j).unwrap();
        }
        assert_eq!(cache.decompositions(), 6);
        assert_eq!(
            *cache.basis(Method::Cpc, 3).unwrap(),
            basis_for(&x, Method::Cpc, 3).unwrap()
        );
    }
}
