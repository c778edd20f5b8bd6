//! Simplex geometry and the α-transformation family.
//!
//! Compositions are stored row-wise in an `n × p` matrix. The α-transformation
//! maps each row to `ℝ^{p-1}` through the power transformation
//! `u_α(x) = x^α / Σ x^α`, the centred map `w_α = (p·u_α − 1)/α` and the
//! Helmert sub-matrix `H`. At α = 0 the isometric log-ratio transformation is
//! used directly rather than approached numerically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row sums within this distance of one are accepted as-is.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Row sums further than [`ROW_SUM_TOL`] but within this distance are re-closed.
pub const ROW_SUM_RECLOSE_TOL: f64 = 1e-6;

/// An `n × p` matrix whose rows are points of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
}

impl CompositionMatrix {
    /// Validates `values` as compositions.
    ///
    /// Rows whose sum misses one by more than [`ROW_SUM_TOL`] but no more than
    /// [`ROW_SUM_RECLOSE_TOL`] are divided by their sum and a warning is logged.
    pub fn new(mut values: DMatrix<f64>) -> Result<Self> {
        check_shape(&values)?;
        check_entries(&values)?;
        let mut reclosed = 0usize;
        for i in 0..values.nrows() {
            let sum: f64 = values.row(i).iter().sum();
            let gap = (sum - 1.0).abs();
            if gap <= ROW_SUM_TOL {
                continue;
            }
            if gap <= ROW_SUM_RECLOSE_TOL {
                values.row_mut(i).iter_mut().for_each(|v| *v /= sum);
                reclosed += 1;
            } else {
                return Err(Error::RowSumMismatch { row: i, sum });
            }
        }
        if reclosed > 0 {
            log::warn!("{reclosed} row(s) did not sum to 1 within {ROW_SUM_TOL:e}; re-closed");
        }
        Ok(Self { values })
    }

    /// Builds a composition matrix from row-major data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Number of parts `p`.
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn has_zeros(&self) -> bool {
        self.values.iter().any(|&v| v == 0.0)
    }

    fn first_row_with_zero(&self) -> Option<usize> {
        (0..self.nrows()).find(|&i| self.values.row(i).iter().any(|&v| v == 0.0))
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
        }
    }
}

fn check_shape(values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() == 0 {
        return Err(Error::InvalidDimension("no rows".into()));
    }
    if values.ncols() < 2 {
        return Err(Error::InvalidDimension(format!(
            "compositions need at least 2 parts, got {}",
            values.ncols()
        )));
    }
    Ok(())
}

fn check_entries(values: &DMatrix<f64>) -> Result<()> {
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            let v = values[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(Error::InvalidDimension(format!(
            "row {i} has {} entries, expected {p}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Divides each row of a non-negative matrix by its sum.
pub fn closure(raw: &DMatrix<f64>) -> Result<CompositionMatrix> {
    check_shape(raw)?;
    check_entries(raw)?;
    let mut values = raw.clone();
    for i in 0..values.nrows() {
        let sum: f64 = values.row(i).iter().sum();
        if sum <= 0.0 {
            return Err(Error::RowAllZero(i));
        }
        values.row_mut(i).iter_mut().for_each(|v| *v /= sum);
    }
    Ok(CompositionMatrix { values })
}

/// The `(p-1) × p` Helmert sub-matrix: orthonormal rows, each orthogonal to
/// the constant vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmertBasis {
    matrix: DMatrix<f64>,
}

impl HelmertBasis {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of parts `p` the basis acts on.
    pub fn parts(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Helmert matrix of order `p` with its constant first row removed.
///
/// Row `i` (1-based) has `1/√(i(i+1))` in its first `i` entries and
/// `-i/√(i(i+1))` in entry `i+1`.
pub fn helmert_submatrix(p: usize) -> Result<HelmertBasis> {
    if p < 2 {
        return Err(Error::InvalidDimension(format!(
            "Helmert sub-matrix needs p >= 2, got {p}"
        )));
    }
    let mut matrix = DMatrix::zeros(p - 1, p);
    for i in 1..p {
        let scale = ((i * (i + 1)) as f64).sqrt();
        for j in 0..i {
            matrix[(i - 1, j)] = 1.0 / scale;
        }
        matrix[(i - 1, i)] = -(i as f64) / scale;
    }
    Ok(HelmertBasis { matrix })
}

/// Row-wise power transformation `x^α / Σ x^α`.
pub fn power_transform(x: &CompositionMatrix, alpha: f64) -> Result<CompositionMatrix> {
    if alpha <= 0.0 && x.has_zeros() {
        return Err(Error::ZeroWithNonpositiveAlpha(alpha));
    }
    let mut values = x.values.map(|v| v.powf(alpha));
    for i in 0..values.nrows() {
        let sum: f64 = values.row(i).iter().sum();
        values.row_mut(i).iter_mut().for_each(|v| *v /= sum);
    }
    Ok(CompositionMatrix { values })
}

/// Result of [`alpha_transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedMatrix {
    values: DMatrix<f64>,
    alpha: f64,
    /// `None` when the source data contained zeros, where the Jacobian diverges.
    log_jacobian: Option<Vec<f64>>,
}

impl TransformedMatrix {
    /// Wraps coordinates produced elsewhere, e.g. read back from a file.
    pub fn new(values: DMatrix<f64>, alpha: f64, log_jacobian: Option<Vec<f64>>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension("non-finite transformed value".into()));
        }
        if let Some(lj) = &log_jacobian {
            if lj.len() != values.nrows() {
                return Err(Error::LengthMismatch {
                    labels: lj.len(),
                    rows: values.nrows(),
                });
            }
        }
        Ok(Self {
            values,
            alpha,
            log_jacobian,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_jacobian(&self) -> Option<&[f64]> {
        self.log_jacobian.as_deref()
    }

    /// Sum of the per-row log-Jacobians, if available.
    pub fn total_log_jacobian(&self) -> Option<f64> {
        self.log_jacobian.as_ref().map(|lj| lj.iter().sum())
    }
}

/// Switches for [`alpha_transform_with`].
#[derive(Debug, Clone, Copy)]
pub struct TransformOptions {
    /// Reject α outside `[-1, 1]`.
    pub enforce_range: bool,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self { enforce_range: true }
    }
}

/// Centred power map `w_α = (p·u_α(x) − 1)/α`, or the CLR at α = 0.
pub fn centered_power(x: &CompositionMatrix, alpha: f64) -> Result<DMatrix<f64>> {
    if alpha == 0.0 {
        return clr(x);
    }
    let p = x.ncols() as f64;
    let u = power_transform(x, alpha)?;
    Ok(u.values.map(|v| (p * v - 1.0) / alpha))
}

pub fn alpha_transform(x: &CompositionMatrix, alpha: f64) -> Result<TransformedMatrix> {
    alpha_transform_with(x, alpha, TransformOptions::default())
}

/// Maps compositions to `H·w_α(x)`; α = 0 gives the ILR coordinates.
pub fn alpha_transform_with(
    x: &CompositionMatrix,
    alpha: f64,
    options: TransformOptions,
) -> Result<TransformedMatrix> {
    if !alpha.is_finite() || (options.enforce_range && !(-1.0..=1.0).contains(&alpha)) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha <= 0.0 && x.has_zeros() {
        return Err(Error::ZeroWithNonpositiveAlpha(alpha));
    }
    let h = helmert_submatrix(x.ncols())?;
    let w = centered_power(x, alpha)?;
    let values = &w * h.matrix.transpose();
    let log_jacobian = if x.has_zeros() {
        None
    } else {
        Some(log_jacobian(x, alpha)?)
    };
    Ok(TransformedMatrix {
        values,
        alpha,
        log_jacobian,
    })
}

/// Maps transformed coordinates back onto the simplex.
pub fn inverse_alpha_transform(y: &TransformedMatrix) -> Result<CompositionMatrix> {
    let d = y.values.ncols();
    let h = helmert_submatrix(d + 1)?;
    let w = &y.values * &h.matrix;
    let alpha = y.alpha;
    let mut values = DMatrix::zeros(w.nrows(), w.ncols());
    let mut logs = vec![0.0; w.ncols()];
    for i in 0..w.nrows() {
        for (j, l) in logs.iter_mut().enumerate() {
            let wij = w[(i, j)];
            *l = if alpha == 0.0 {
                wij
            } else {
                let base = alpha * wij;
                if base <= -1.0 {
                    return Err(Error::OutOfDomain(i));
                }
                // (1 + αw)^{1/α} in log space
                base.ln_1p() / alpha
            };
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        for (j, l) in logs.iter().enumerate() {
            values[(i, j)] = (l - max).exp() / total;
        }
    }
    Ok(CompositionMatrix { values })
}

/// Centred log-ratio transformation.
pub fn clr(x: &CompositionMatrix) -> Result<DMatrix<f64>> {
    if let Some(i) = x.first_row_with_zero() {
        return Err(Error::ZeroEntry(i));
    }
    let mut out = x.values.map(f64::ln);
    for i in 0..out.nrows() {
        let mean = out.row(i).mean();
        out.row_mut(i).iter_mut().for_each(|v| *v -= mean);
    }
    Ok(out)
}

/// Isometric log-ratio transformation, `H·clr(x)` row-wise.
pub fn ilr(x: &CompositionMatrix) -> Result<DMatrix<f64>> {
    let c = clr(x)?;
    let h = helmert_submatrix(x.ncols())?;
    Ok(c * h.matrix.transpose())
}

/// Per-row natural log of the Jacobian determinant of the α-transformation,
///
/// `log|J_α| = (p − ½)·log p + Σ_i [(α−1)·log x_i − log Σ_j x_j^α]`.
pub fn log_jacobian(x: &CompositionMatrix, alpha: f64) -> Result<Vec<f64>> {
    if let Some(i) = x.first_row_with_zero() {
        return Err(Error::ZeroEntry(i));
    }
    let p = x.ncols() as f64;
    let constant = (p - 0.5) * p.ln();
    Ok((0..x.nrows())
        .map(|i| {
            let row = x.values.row(i);
            let sum_log: f64 = row.iter().map(|v| v.ln()).sum();
            let power_sum: f64 = row.iter().map(|v| v.powf(alpha)).sum();
            constant + (alpha - 1.0) * sum_log - p * power_sum.ln()
        })
        .collect())
}

/// Applies `alpha_transform` to a single composition.
pub fn alpha_transform_row(x: &[f64], alpha: f64) -> Result<DVector<f64>> {
    let m = CompositionMatrix::from_rows(&[x.to_vec()])?;
    let t = alpha_transform(&m, alpha)?;
    Ok(t.values.row(0).transpose())
}
