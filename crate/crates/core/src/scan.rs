//! Per-covariate sweep comparing CPC and PSC estimates at a fixed k.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::Result;
use crate::estimators::{fit_with_basis, DecompositionCache, Method};
use crate::linalg::{GenotypeMatrix, DEFAULT_COND_TOL};

/// PSC estimates smaller than this make the relative error undefined.
pub const REL_ERR_FLOOR: f64 = 1e-12;

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanFlags {
    pub psc_not_identifiable: bool,
    pub cpc_not_identifiable: bool,
    pub rel_err_undefined: bool,
}

impl ScanFlags {
    /// `|`-separated flag names, empty when nothing is flagged.
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.psc_not_identifiable {
            parts.push("psc_not_identifiable");
        }
        if self.cpc_not_identifiable {
            parts.push("cpc_not_identifiable");
        }
        if self.rel_err_undefined {
            parts.push("rel_err_undefined");
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    /// Zero-based covariate index.
    pub target: usize,
    pub alpha_cpc: Option<f64>,
    pub alpha_psc: Option<f64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub flags: ScanFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub k: usize,
    pub records: Vec<ScanRecord>,
    /// Decompositions of the full matrix (expected: 1).
    pub psc_decompositions: usize,
    /// Leave-one-out decompositions (expected: p).
    pub cpc_decompositions: usize,
}

fn record(target: usize, cpc: Option<f64>, psc: Option<f64>) -> ScanRecord {
    let mut flags = ScanFlags {
        psc_not_identifiable: psc.is_none(),
        cpc_not_identifiable: cpc.is_none(),
        rel_err_undefined: false,
    };
    let abs_err = match (cpc, psc) {
        (Some(c), Some(p)) => Some((c - p).abs()),
        _ => None,
    };
    let rel_err = match (abs_err, psc) {
        (Some(a), Some(p)) if p.abs() >= REL_ERR_FLOOR => Some(a / p.abs()),
        _ => None,
    };
    flags.rel_err_undefined = rel_err.is_none();
    ScanRecord {
        target,
        alpha_cpc: cpc,
        alpha_psc: psc,
        abs_err,
        rel_err,
        flags,
    }
}

/// Fits CPC and PSC for every covariate. The full-matrix decomposition is
/// computed once and shared; each covariate gets its own leave-one-out
/// decomposition. A covariate whose fit fails is flagged, never fatal.
pub fn scan_all(x: &GenotypeMatrix, y: &DVector<f64>, k: usize) -> Result<ScanOutput> {
    if y.len() != x.nrows() {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "matrix has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    let cache = DecompositionCache::new(x);
    let psc = cache.basis(Method::Psc, 0)?;
    let psc_decompositions = cache.decompositions();

    let records: Vec<ScanRecord> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let alpha_psc = fit_with_basis(x, y, &psc, Method::Psc, j, k, DEFAULT_COND_TOL)
                .ok()
                .map(|f| f.alpha_hat);
            let alpha_cpc = cache.basis(Method::Cpc, j).ok().and_then(|basis| {
                cache.evict(j);
                fit_with_basis(x, y, &basis, Method::Cpc, j, k, DEFAULT_COND_TOL)
                    .ok()
                    .map(|f| f.alpha_hat)
            });
            record(j, alpha_cpc, alpha_psc)
        })
        .collect();

    Ok(ScanOutput {
        k,
        records,
        psc_decompositions,
        cpc_decompositions: cache.decompositions() - psc_decompositions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary {
    /// `(threshold, number of records with rel_err > threshold)`.
    pub exceedances: Vec<(f64, usize)>,
    /// Records excluded from the counts because rel_err is undefined.
    pub undefined: usize,
    pub abs_histogram: Vec<HistogramBin>,
    pub rel_histogram: Vec<HistogramBin>,
}

/// Equal-width bins over `[0, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let hi = if max > 0.0 { max } else { 1.0 };
    let width = hi / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = ((v / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 * width,
            hi: if i + 1 == bins { hi } else { (i + 1) as f64 * width },
            count,
        })
        .collect()
}

pub fn summarize_scan(records: &[ScanRecord], thresholds: &[f64], bins: usize) -> ScanSummary {
    let rel: Vec<f64> = records.iter().filter_map(|r| r.rel_err).collect();
    let abs: Vec<f64> = records.iter().filter_map(|r| r.abs_err).collect();
    let exceedances = thresholds
        .iter()
        .map(|&t| (t, rel.iter().filter(|&&v| v > t).count()))
        .collect();
    ScanSummary {
        exceedances,
        undefined: records.len() - rel.len(),
        abs_histogram: histogram(&abs, bins),
        rel_histogram: histogram(&rel, bins),
    }
}

/// Median of the defined relative errors.
pub fn median_rel_err(records: &[ScanRecord]) -> Option<f64> {
    let mut rel: Vec<f64> = records.iter().filter_map(|r| r.rel_err).collect();
    if rel.is_empty() {
        return None;
    }
    rel.sort_by(f64::total_cmp);
    let mid = rel.len() / 2;
    Some(if rel.len() % 2 == 1 {
        rel[mid]
    } else {
        0.5 * (rel[mid - 1] + rel[mid])
    })
}
