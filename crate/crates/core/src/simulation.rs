//! Scenario generators and the Monte Carlo runner.
//!
//! Every replicate draws from its own ChaCha8 streams, seeded by
//! [`replicate_seed`], so a replicate's data does not depend on the number of
//! replicates or on how work is scheduled across threads. Fits use the
//! standardized design rescaled to unit-variance columns (column norm
//! `sqrt(n)`), the scale of the raw N(0, 1) and {-1, +1} draws.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_with_basis, gamma_truth_with_basis, moments_from_basis, Method, TheoreticalMoments};
use crate::inference::{
    compute_nd_with_basis, estimate_sigma, gamma_tail_l1, test_h0, BoundSource, DofConvention, Sigma,
};
use crate::linalg::{thin_svd, GenotypeMatrix, SpectralBasis, DEFAULT_COND_TOL};

/// Minimum |X_1^T u| over the top-2 left singular vectors for a structured design.
pub const STRUCTURED_ALIGNMENT: f64 = 0.99;

const STRUCTURED_RETRIES: usize = 8;

/// Column whose coefficient is estimated in simulations (`beta_1`).
pub const TARGET: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    Independent,
    Dependent,
    Binary,
    Structured,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Independent,
        Scenario::Dependent,
        Scenario::Binary,
        Scenario::Structured,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Independent => "independent",
            Scenario::Dependent => "dependent",
            Scenario::Binary => "binary",
            Scenario::Structured => "structured",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s.trim())
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub scenarios: Vec<Scenario>,
    pub ar_rho: f64,
    pub structured_tau: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Hold X and beta fixed across replicates, redrawing only the noise.
    pub fixed_design: bool,
    pub dof_convention: DofConvention,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: 100,
            sparsity: 20,
            sigma: 1.0,
            scenarios: vec![Scenario::Independent],
            ar_rho: 0.5,
            structured_tau: 0.1,
            k_min: 1,
            k_max: 30,
            replicates: 100,
            seed: 0,
            fixed_design: false,
            dof_convention: DofConvention::SampleSize,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        if self.p < 2 {
            return Err(Error::config("p", "must be at least 2"));
        }
        if self.sparsity < 1 || self.sparsity > self.p {
            return Err(Error::config("sparsity", format!("must lie in [1, p = {}]", self.p)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("sigma", "must be positive and finite"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("scenario", "at least one scenario is required"));
        }
        if !(self.ar_rho.abs() < 1.0) {
            return Err(Error::config("ar_rho", "must lie in (-1, 1)"));
        }
        if !(self.structured_tau > 0.0) || !self.structured_tau.is_finite() {
            return Err(Error::config("structured_tau", "must be positive and finite"));
        }
        if self.k_min > self.k_max {
            return Err(Error::config("k_min", "must not exceed k_max"));
        }
        if self.k_max >= self.n.min(self.p) {
            return Err(Error::config(
                "k_max",
                format!("must be below min(n, p) = {}", self.n.min(self.p)),
            ));
        }
        if self.replicates < 1 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.scenarios.contains(&Scenario::Structured) {
            if self.p < 3 {
                return Err(Error::config("p", "structured scenario needs p >= 3"));
            }
            if self.n <= self.p {
                return Err(Error::config("n", "structured scenario needs n > p"));
            }
        }
        Ok(())
    }

    pub fn design_params(&self) -> DesignParams {
        DesignParams {
            ar_rho: self.ar_rho,
            structured_tau: self.structured_tau,
        }
    }

    pub fn k_values(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub ar_rho: f64,
    pub structured_tau: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self {
            ar_rho: 0.5,
            structured_tau: 0.1,
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed_m = splitmix64(seed ^ splitmix64(m))`.
pub fn replicate_seed(seed: u64, m: u64) -> u64 {
    splitmix64(seed ^ splitmix64(m))
}

/// Independent random streams within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Design = 0,
    Coefficients = 1,
    Noise = 2,
}

pub fn stream_rng(replicate_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn scenario_base_seed(seed: u64, scenario: Scenario) -> u64 {
    replicate_seed(seed, u64::MAX - scenario.index())
}

fn normal_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    // row-major fill so the draw order is (sample, covariate)
    let data: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(n, p, &data)
}

fn unit_centered<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let mut v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    v.normalize()
}

/// Draws a standardized design for one scenario.
pub fn gen_design<R: Rng + ?Sized>(
    scenario: Scenario,
    n: usize,
    p: usize,
    params: &DesignParams,
    rng: &mut R,
) -> Result<GenotypeMatrix> {
    match scenario {
        Scenario::Independent => GenotypeMatrix::center_normalize(&normal_matrix(n, p, rng)),
        Scenario::Dependent => {
            let rho = params.ar_rho;
            let innovation = (1.0 - rho * rho).sqrt();
            let mut raw = DMatrix::zeros(n, p);
            for i in 0..n {
                let mut prev: f64 = StandardNormal.sample(rng);
                raw[(i, 0)] = prev;
                for j in 1..p {
                    let z: f64 = StandardNormal.sample(rng);
                    prev = rho * prev + innovation * z;
                    raw[(i, j)] = prev;
                }
            }
            GenotypeMatrix::center_normalize(&raw)
        }
        Scenario::Binary => {
            let mut raw = DMatrix::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    raw[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            // redraw constant columns; the probability is 2^(1-n) per column
            for j in 0..p {
                while raw.column(j).iter().all(|v| *v == raw[(0, j)]) {
                    for i in 0..n {
                        raw[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    }
                }
            }
            GenotypeMatrix::center_normalize(&raw)
        }
        Scenario::Structured => structured_design(n, p, params.structured_tau, rng),
    }
}

/// Column 2 is a direction `g`; columns 3..p are `g` plus noise of squared
/// norm about `tau^2`. Column 1 is a direction orthogonal to columns 2..p,
/// mixed with weight `tau` into the noise subspace of columns 3..p so it
/// carries its own leading principal component without being exactly one.
fn structured_design<R: Rng + ?Sized>(n: usize, p: usize, tau: f64, rng: &mut R) -> Result<GenotypeMatrix> {
    if p < 3 {
        return Err(Error::config("p", "structured scenario needs p >= 3"));
    }
    if n <= p {
        return Err(Error::config("n", "structured scenario needs n > p"));
    }
    let g = unit_centered(n, rng);
    let f = unit_centered(n, rng);

    let mut raw = DMatrix::zeros(n, p);
    raw.set_column(1, &g);
    let noise_scale = tau / (n as f64).sqrt();
    for j in 2..p {
        let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(rng)) * noise_scale;
        raw.set_column(j, &(&g + noise));
    }
    // placeholder so the rest can be standardized
    raw.set_column(0, &f);
    let mut x = GenotypeMatrix::center_normalize(&raw)?.into_values();

    let rest = x.columns(1, p - 1).into_owned();
    let span = thin_svd(&rest, 1.0)?;
    let f_perp = &f - span.left() * span.left().tr_mul(&f);
    if f_perp.norm() < 1e-8 {
        return Err(Error::StructuredConstructionFailed { alignment: 0.0 });
    }
    let f_perp = f_perp.normalize();

    let coeffs = DVector::from_fn(p - 2, |_, _| StandardNormal.sample(rng));
    let mut leak = x.columns(2, p - 2) * coeffs;
    leak -= &g * g.dot(&leak);
    let leak = if leak.norm() > 0.0 { leak.normalize() } else { leak };

    x.set_column(0, &(f_perp + leak * tau));
    let x = GenotypeMatrix::center_normalize(&x)?;

    let alignment = structured_alignment(&x)?;
    if alignment <= STRUCTURED_ALIGNMENT {
        return Err(Error::StructuredConstructionFailed { alignment });
    }
    Ok(x)
}

/// `max |X_1^T u|` over the top-2 left singular vectors of `X`.
pub fn structured_alignment(x: &GenotypeMatrix) -> Result<f64> {
    let basis = thin_svd(x.values(), 1.0)?;
    let top = basis.rank().min(2);
    Ok(basis.left().columns(0, top).tr_mul(&x.column(TARGET)).amax())
}

/// Like [`gen_design`], but a failed structured construction is retried with
/// half the noise level, up to a fixed number of times.
pub fn gen_design_with_retry<R: Rng + ?Sized>(
    scenario: Scenario,
    n: usize,
    p: usize,
    params: &DesignParams,
    rng: &mut R,
) -> Result<GenotypeMatrix> {
    let mut params = *params;
    let mut last = None;
    for _ in 0..STRUCTURED_RETRIES {
        match gen_design(scenario, n, p, &params, rng) {
            Err(e @ Error::StructuredConstructionFailed { .. }) => {
                params.structured_tau /= 2.0;
                last = Some(e);
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// `beta_1 = 1`; `s - 1` further entries at distinct random indices are `+-1`.
pub fn gen_beta<R: Rng + ?Sized>(p: usize, s: usize, rng: &mut R) -> DVector<f64> {
    assert!(s >= 1 && s <= p, "sparsity must lie in [1, p]");
    let mut beta = DVector::zeros(p);
    beta[0] = 1.0;
    let mut picks: Vec<usize> = index::sample(rng, p - 1, s - 1).into_iter().collect();
    picks.sort_unstable();
    for i in picks {
        beta[i + 1] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    beta
}

/// `y = X beta + eps`, `eps ~ N(0, sigma^2)` i.i.d.
pub fn simulate_response<R: Rng + ?Sized>(
    x: &GenotypeMatrix,
    beta: &DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> DVector<f64> {
    let mut y = x.values() * beta;
    if sigma != 0.0 {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
    }
    y
}

/// Minimum-norm least-squares coefficients via the pseudoinverse.
pub fn oracle_full_ols(x: &GenotypeMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {n} rows, response {}",
            y.len()
        )));
    }
    let svd = x.values().clone().svd(true, true);
    let tol = n.max(p) as f64 * svd.singular_values.max() * f64::EPSILON;
    let rank = svd.rank(tol);
    if p >= n || rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    let pinv = svd.pseudo_inverse(tol).map_err(|_| Error::NumericalFailure)?;
    Ok(pinv * y)
}

/// Design, coefficients and decompositions shared by the fits of one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateDesign {
    /// Standardized design scaled to unit-variance columns.
    pub design: GenotypeMatrix,
    pub beta: DVector<f64>,
    pub psc: SpectralBasis,
    pub cpc: SpectralBasis,
    pub gamma_psc: DVector<f64>,
    pub gamma_cpc: DVector<f64>,
}

impl ReplicateDesign {
    pub fn new(x: &GenotypeMatrix, beta: DVector<f64>) -> Result<Self> {
        let design = x.scaled((x.nrows() as f64).sqrt());
        let psc = thin_svd(design.values(), 1.0)?;
        let cpc = thin_svd(&design.without_column(TARGET), 1.0)?;
        let gamma_psc = gamma_truth_with_basis(&psc, &beta, Method::Psc, TARGET);
        let gamma_cpc = gamma_truth_with_basis(&cpc, &beta, Method::Cpc, TARGET);
        Ok(Self {
            design,
            beta,
            psc,
            cpc,
            gamma_psc,
            gamma_cpc,
        })
    }

    /// Draws X (with structured retries) and beta from the replicate streams.
    pub fn draw(config: &SimulationConfig, scenario: Scenario, seed_m: u64) -> Result<Self> {
        let mut design_rng = stream_rng(seed_m, Stream::Design);
        let x = gen_design_with_retry(scenario, config.n, config.p, &config.design_params(), &mut design_rng)?;
        let mut beta_rng = stream_rng(seed_m, Stream::Coefficients);
        let beta = gen_beta(config.p, config.sparsity, &mut beta_rng);
        Self::new(&x, beta)
    }

    pub fn basis(&self, method: Method) -> &SpectralBasis {
        match method {
            Method::Psc => &self.psc,
            Method::Cpc => &self.cpc,
        }
    }

    pub fn moments(&self, method: Method, k: usize, noise_var: f64) -> Result<TheoreticalMoments> {
        let gamma = match method {
            Method::Psc => &self.gamma_psc,
            Method::Cpc => &self.gamma_cpc,
        };
        moments_from_basis(
            &self.design,
            self.basis(method),
            gamma,
            self.beta[TARGET],
            method,
            TARGET,
            k,
            noise_var,
        )
    }

    pub fn fit_alpha(&self, y: &DVector<f64>, method: Method, k: usize) -> Result<f64> {
        fit_with_basis(&self.design, y, self.basis(method), method, TARGET, k, DEFAULT_COND_TOL).map(|f| f.alpha_hat)
    }

    pub fn noiseless_response(&self) -> DVector<f64> {
        self.design.values() * &self.beta
    }
}

/// Replicate 0 of `scenario`, i.e. the design used by fixed-design runs.
pub fn first_replicate(config: &SimulationConfig, scenario: Scenario) -> Result<ReplicateDesign> {
    ReplicateDesign::draw(
        config,
        scenario,
        replicate_seed(scenario_base_seed(config.seed, scenario), 0),
    )
}

/// Why a fit produced no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFlag {
    Ok,
    NotIdentifiable,
    KTooLarge,
    Failed,
}

impl FitFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FitFlag::Ok => "ok",
            FitFlag::NotIdentifiable => "not_identifiable",
            FitFlag::KTooLarge => "k_too_large",
            FitFlag::Failed => "failed",
        }
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::NotIdentifiable { .. } => FitFlag::NotIdentifiable,
            Error::KTooLarge { .. } => FitFlag::KTooLarge,
            _ => FitFlag::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEstimate {
    pub scenario: Scenario,
    pub method: Method,
    pub k: usize,
    pub replicate: usize,
    pub alpha_hat: Option<f64>,
    pub flag: FitFlag,
}

/// Aggregates for one `(scenario, method, k)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub method: Method,
    pub k: usize,
    pub mean: f64,
    pub sd: f64,
    /// Closed-form bias and variance, averaged over replicates where defined.
    pub theo_bias: f64,
    pub theo_var: f64,
    pub n_ok: usize,
    pub n_fail: usize,
    /// Largest `|alpha_hat(X beta) - E(alpha_hat)|` over replicates.
    pub max_linearity_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub estimates: Vec<ReplicateEstimate>,
    pub cells: Vec<CellSummary>,
}

impl SimulationReport {
    pub fn cell(&self, scenario: Scenario, method: Method, k: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.method == method && c.k == k)
    }
}

struct CellDraw {
    alpha: std::result::Result<f64, FitFlag>,
    moments: Option<(f64, f64)>,
    linearity_gap: Option<f64>,
}

fn run_replicate(
    config: &SimulationConfig,
    scenario: Scenario,
    m: usize,
    fixed: Option<&ReplicateDesign>,
) -> Result<Vec<CellDraw>> {
    let base = scenario_base_seed(config.seed, scenario);
    let drawn;
    let rep = match fixed {
        Some(d) => d,
        None => {
            drawn = ReplicateDesign::draw(config, scenario, replicate_seed(base, m as u64))?;
            &drawn
        }
    };
    let mut noise_rng = stream_rng(replicate_seed(base, m as u64), Stream::Noise);
    let y = simulate_response(&rep.design, &rep.beta, config.sigma, &mut noise_rng);
    let y0 = rep.noiseless_response();
    let noise_var = config.sigma * config.sigma;

    let mut out = Vec::with_capacity(2 * (config.k_max - config.k_min + 1));
    for k in config.k_values() {
        for method in Method::ALL {
            let alpha = rep.fit_alpha(&y, method, k).map_err(|e| FitFlag::from_error(&e));
            let moments = rep.moments(method, k, noise_var).ok();
            let linearity_gap = match (&moments, rep.fit_alpha(&y0, method, k)) {
                (Some(mo), Ok(a0)) => Some((a0 - mo.expectation).abs()),
                _ => None,
            };
            out.push(CellDraw {
                alpha,
                moments: moments.map(|mo| (mo.bias, mo.variance)),
                linearity_gap,
            });
        }
    }
    Ok(out)
}

/// Runs every `(scenario, replicate)` pair, fitting both methods at every k.
///
/// Replicates run in parallel on the current rayon pool; results are reduced
/// in replicate order, so the report does not depend on the thread count.
pub fn monte_carlo_run(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let ks: Vec<usize> = config.k_values().collect();
    let mut estimates = Vec::new();
    let mut cells = Vec::new();

    for &scenario in &config.scenarios {
        let fixed = if config.fixed_design {
            Some(first_replicate(config, scenario)?)
        } else {
            None
        };
        let draws: Vec<Vec<CellDraw>> = (0..config.replicates)
            .into_par_iter()
            .map(|m| run_replicate(config, scenario, m, fixed.as_ref()))
            .collect::<Result<_>>()?;

        for (ki, &k) in ks.iter().enumerate() {
            for (mi, &method) in Method::ALL.iter().enumerate() {
                let slot = 2 * ki + mi;
                let mut values = Vec::with_capacity(config.replicates);
                let (mut bias_sum, mut var_sum, mut n_theo) = (0.0, 0.0, 0usize);
                let mut gap = 0.0f64;
                for (m, rep) in draws.iter().enumerate() {
                    let d = &rep[slot];
                    let (alpha_hat, flag) = match d.alpha {
                        Ok(a) => (Some(a), FitFlag::Ok),
                        Err(f) => (None, f),
                    };
                    if let Some(a) = alpha_hat {
                        values.push(a);
                    }
                    if let Some((b, v)) = d.moments {
                        bias_sum += b;
                        var_sum += v;
                        n_theo += 1;
                    }
                    if let Some(g) = d.linearity_gap {
                        gap = gap.max(g);
                    }
                    estimates.push(ReplicateEstimate {
                        scenario,
                        method,
                        k,
                        replicate: m,
                        alpha_hat,
                        flag,
                    });
                }
                let (mean, sd) = mean_sd(&values);
                let theo = |s: f64| if n_theo > 0 { s / n_theo as f64 } else { f64::NAN };
                cells.push(CellSummary {
                    scenario,
                    method,
                    k,
                    mean,
                    sd,
                    theo_bias: theo(bias_sum),
                    theo_var: theo(var_sum),
                    n_ok: values.len(),
                    n_fail: config.replicates - values.len(),
                    max_linearity_gap: gap,
                });
            }
        }
    }
    Ok(SimulationReport {
        config: config.clone(),
        estimates,
        cells,
    })
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    Known,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub replicates: usize,
    pub rejections: usize,
    /// Replicates skipped because the fit or `D` was degenerate.
    pub skipped: usize,
    pub rate: f64,
}

/// Rejection rate of the CPC test of `H0: beta_1 = 0` at level `level`, with
/// `beta_1` forced to zero and `N` taken from the true `gamma`.
pub fn calibrate_test(
    config: &SimulationConfig,
    scenario: Scenario,
    k: usize,
    level: f64,
    sigma_mode: SigmaMode,
) -> Result<CalibrationOutcome> {
    config.validate()?;
    let base = scenario_base_seed(config.seed, scenario);
    let draw_null = |m: usize| -> Result<ReplicateDesign> {
        let mut design_rng = stream_rng(replicate_seed(base, m as u64), Stream::Design);
        let x = gen_design_with_retry(scenario, config.n, config.p, &config.design_params(), &mut design_rng)?;
        let mut beta_rng = stream_rng(replicate_seed(base, m as u64), Stream::Coefficients);
        let mut beta = gen_beta(config.p, config.sparsity, &mut beta_rng);
        beta[TARGET] = 0.0;
        ReplicateDesign::new(&x, beta)
    };
    let fixed = if config.fixed_design { Some(draw_null(0)?) } else { None };

    let outcomes: Vec<Option<bool>> = (0..config.replicates)
        .into_par_iter()
        .map(|m| -> Result<Option<bool>> {
            let drawn;
            let rep = match &fixed {
                Some(d) => d,
                None => {
                    drawn = draw_null(m)?;
                    &drawn
                }
            };
            let mut noise_rng = stream_rng(replicate_seed(base, m as u64), Stream::Noise);
            let y = simulate_response(&rep.design, &rep.beta, config.sigma, &mut noise_rng);
            let fit = match fit_with_basis(&rep.design, &y, &rep.cpc, Method::Cpc, TARGET, k, DEFAULT_COND_TOL) {
                Ok(f) => f,
                Err(_) => return Ok(None),
            };
            let bound = match compute_nd_with_basis(
                &rep.design,
                &rep.cpc,
                TARGET,
                k,
                gamma_tail_l1(&rep.gamma_cpc, k),
                BoundSource::Truth,
            ) {
                Ok(b) => b,
                Err(_) => return Ok(None),
            };
            let sigma = match sigma_mode {
                SigmaMode::Known => Sigma::Known(config.sigma),
                SigmaMode::Estimated => Sigma::Estimated(estimate_sigma(&fit.residuals, k)?),
            };
            let outcome = test_h0(
                fit.alpha_hat,
                bound.numerator,
                bound.denominator,
                sigma,
                config.n,
                k,
                level,
                config.dof_convention,
            )?;
            Ok(Some(outcome.reject))
        })
        .collect::<Result<_>>()?;

    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
    let used = config.replicates - skipped;
    Ok(CalibrationOutcome {
        replicates: used,
        rejections,
        skipped,
        rate: if used > 0 {
            rejections as f64 / used as f64
        } else {
            f64::NAN
        },
    })
}
