//! Dense linear-algebra kernel: column standardization, a thin SVD with a
//! fixed sign convention, the kinship matrix and a guarded least-squares
//! solver.
//!
//! Everything here is a pure function of its inputs, so results are
//! bit-stable across repeated calls and safe to share between threads.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Default threshold on the smallest-to-largest singular value ratio of a
/// regression design below which the fit is declared not identifiable.
pub const DEFAULT_COND_TOL: f64 = 1e-10;

/// Tolerance used when checking the standardization invariant.
pub const STANDARDIZED_TOL: f64 = 1e-10;

const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// Relative gap below which two singular values are treated as tied.
const TIE_TOL: f64 = 1e-12;

/// An `n x p` design matrix, rows are samples and columns are covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    values: DMatrix<f64>,
    standardized: bool,
}

impl GenotypeMatrix {
    /// Wraps a raw matrix without transforming it.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = values.shape();
        if rows < 2 || cols < 2 {
            return Err(Error::TooSmall { rows, cols });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage; positions are reported 1-based
            return Err(Error::NonFinite {
                row: idx % rows + 1,
                col: idx / rows + 1,
            });
        }
        Ok(Self {
            values,
            standardized: false,
        })
    }

    /// Centers every column to mean zero and scales it to unit Euclidean norm.
    pub fn center_normalize(raw: &DMatrix<f64>) -> Result<Self> {
        let mut out = Self::new(raw.clone())?;
        let n = out.values.nrows() as f64;
        for (j, mut col) in out.values.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            if norm < CONSTANT_COLUMN_TOL {
                return Err(Error::ConstantColumn(j + 1));
            }
            col /= norm;
        }
        out.standardized = true;
        Ok(out)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.values.column(j)
    }

    /// Returns `factor * X`. The result no longer carries the standardized
    /// flag, since its columns have norm `|factor|`.
    pub fn scaled(&self, factor: f64) -> GenotypeMatrix {
        GenotypeMatrix {
            values: &self.values * factor,
            standardized: self.standardized && factor == 1.0,
        }
    }

    /// The matrix with column `j` removed.
    pub fn without_column(&self, j: usize) -> DMatrix<f64> {
        self.values.clone().remove_column(j)
    }

    pub fn check_target(&self, j: usize) -> Result<()> {
        if j >= self.ncols() {
            return Err(Error::TargetOutOfRange {
                target: j,
                cols: self.ncols(),
            });
        }
        Ok(())
    }

    /// Largest deviation from the standardization invariant, as
    /// `(max |column mean|, max |column norm - 1|)`.
    pub fn standardization_error(&self) -> (f64, f64) {
        let n = self.nrows() as f64;
        self.values.column_iter().fold((0.0f64, 0.0f64), |(m, s), col| {
            (m.max((col.sum() / n).abs()), s.max((col.norm() - 1.0).abs()))
        })
    }
}

/// Thin singular value decomposition `M = U diag(sigma) V^T` truncated to the
/// numerical rank.
///
/// Singular values are sorted in decreasing order. Within a group of tied
/// values the vectors are rotated to a canonical basis (see
/// `canonical_rotation`), so orthonormal columns come back as themselves.
/// Each left singular vector is signed so that its entry of largest magnitude
/// is positive (ties go to the lowest index), and the matching right vector is
/// flipped with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    left: DMatrix<f64>,
    singular_values: DVector<f64>,
    right: DMatrix<f64>,
}

impl SpectralBasis {
    /// `n x r` matrix of left singular vectors.
    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// `q x r` matrix of right singular vectors.
    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(self.singular_values.iter()) {
            col *= *s;
        }
        scaled * self.right.transpose()
    }

    /// Inner products `a^T U_(s)` for every retained left vector.
    pub fn alignments(&self, a: &DVectorView<'_, f64>) -> DVector<f64> {
        self.left.tr_mul(a)
    }
}

/// Index of the largest-magnitude entry, lowest index on ties.
fn dominant_index(v: &DVectorView<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    best
}

/// Computes the thin SVD of `m`, keeping the singular values above
/// `rank_tol_factor * max(n, q) * sigma_1 * eps`.
pub fn thin_svd(m: &DMatrix<f64>, rank_tol_factor: f64) -> Result<SpectralBasis> {
    let (n, q) = m.shape();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure);
    }
    if n == 0 || q == 0 {
        return Ok(SpectralBasis {
            left: DMatrix::zeros(n, 0),
            singular_values: DVector::zeros(0),
            right: DMatrix::zeros(q, 0),
        });
    }

    let max_iter = 200 * n.max(q);
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, max_iter).ok_or(Error::NumericalFailure)?;
    let u = svd.u.ok_or(Error::NumericalFailure)?;
    let v_t = svd.v_t.ok_or(Error::NumericalFailure)?;
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let sigma1 = order.first().map_or(0.0, |&i| sv[i]);
    let tol = rank_tol_factor * n.max(q) as f64 * sigma1 * f64::EPSILON;
    order.retain(|&i| sv[i] > tol && sv[i] > 0.0);

    let r = order.len();
    let mut left = DMatrix::zeros(n, r);
    let mut right = DMatrix::zeros(q, r);
    let mut singular_values = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v_t.row(src).transpose());
        singular_values[dst] = sv[src];
    }

    // Within a run of (numerically) tied singular values any rotation of the
    // vectors is valid; pick the one fixed by the coordinate axes.
    let tie_gap = TIE_TOL * sigma1;
    let mut start = 0;
    while start < r {
        let mut end = start + 1;
        while end < r && singular_values[end - 1] - singular_values[end] <= tie_gap {
            end += 1;
        }
        if end - start > 1 {
            let rot = canonical_rotation(&right.columns(start, end - start).into_owned());
            let u_c = left.columns(start, end - start) * &rot;
            let v_c = right.columns(start, end - start) * &rot;
            left.columns_mut(start, end - start).copy_from(&u_c);
            right.columns_mut(start, end - start).copy_from(&v_c);
        }
        start = end;
    }

    for i in 0..r {
        let col = left.column(i);
        if col[dominant_index(&col)] < 0.0 {
            left.column_mut(i).neg_mut();
            right.column_mut(i).neg_mut();
        }
    }

    Ok(SpectralBasis {
        left,
        singular_values,
        right,
    })
}

/// Orthogonal `m x m` rotation `Q` such that the columns of `V Q` are the
/// Gram-Schmidt orthonormalization of the projections of the coordinate axes
/// onto `span(V)`, taking at each step the axis with the largest remaining
/// projection (lowest index on ties).
fn canonical_rotation(v: &DMatrix<f64>) -> DMatrix<f64> {
    let m = v.ncols();
    // column i: coordinates (in the basis V) of the projection of e_i
    let mut resid = v.transpose();
    let mut rot = DMatrix::zeros(m, m);
    for t in 0..m {
        let norms: Vec<f64> = resid.column_iter().map(|c| c.norm()).collect();
        let top = norms.iter().copied().fold(0.0f64, f64::max);
        let pick = norms
            .iter()
            .position(|&x| x >= top * (1.0 - TIE_TOL))
            .expect("a nonzero projection remains");
        let dir = resid.column(pick) / norms[pick];
        let coef = dir.tr_mul(&resid);
        resid -= &dir * coef;
        rot.set_column(t, &dir);
    }
    rot
}

/// The `p x p` kinship matrix `X^T X` of a standardized design.
pub fn kinship(x: &GenotypeMatrix) -> Result<DMatrix<f64>> {
    if !x.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let mut k = x.values().tr_mul(x.values());
    let p = k.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            k[(j, i)] = k[(i, j)];
        }
    }
    Ok(k)
}

/// Result of a guarded least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: DVector<f64>,
    /// Smallest-to-largest singular value ratio of the design.
    pub condition_ratio: f64,
}

/// Minimizes `||y - Z zeta||^2` through an orthogonal factorization of `Z`.
///
/// Fails with `NotIdentifiable` when the condition ratio of `Z` is below
/// `cond_tol`.
pub fn solve_least_squares(z: &DMatrix<f64>, y: &DVector<f64>, cond_tol: f64) -> Result<LeastSquaresFit> {
    let (n, cols) = z.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows but response has length {}",
            y.len()
        )));
    }
    if cols == 0 || n <= cols {
        return Err(Error::InsufficientDof {
            n,
            k: cols.saturating_sub(1),
        });
    }
    let svd = nalgebra::SVD::try_new(z.clone(), true, true, f64::EPSILON, 200 * n).ok_or(Error::NumericalFailure)?;
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition_ratio = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if !(condition_ratio >= cond_tol) {
        return Err(Error::NotIdentifiable {
            measure: condition_ratio,
            tolerance: cond_tol,
        });
    }
    let coefficients = svd.solve(y, 0.0).map_err(|_| Error::NumericalFailure)?;
    Ok(LeastSquaresFit {
        coefficients,
        condition_ratio,
    })
}
