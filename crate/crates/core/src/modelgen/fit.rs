//! Relative least-squares fitting and leaf error measures.

use super::eval_poly;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Reduction of point-wise relative errors to one leaf error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMeasure {
    Average,
    Maximum,
    P90,
}

/// Coefficients minimizing the summed squared relative error.
pub fn fit_relative_lsq(points: &[Vec<f64>], values: &[f64], basis: &[Vec<u32>]) -> Result<Vec<f64>> {
    fit_weighted_lsq(points, values, values, basis)
}

/// Minimizes `sum_i ((y_i - p(x_i)) / w_i)^2` via SVD of the scaled design
/// matrix; every weight must be positive.
pub fn fit_weighted_lsq(
    points: &[Vec<f64>],
    values: &[f64],
    weights: &[f64],
    basis: &[Vec<u32>],
) -> Result<Vec<f64>> {
    let (rows, cols) = (points.len(), basis.len());
    if values.len() != rows || weights.len() != rows {
        return Err(Error::Fit("points and values differ in length".into()));
    }
    if rows < cols {
        return Err(Error::RankDeficient { rank: rows, cols });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::Fit(format!("non-positive weight {w}")));
    }
    let design = DMatrix::from_fn(rows, cols, |i, j| {
        super::eval_monomial(&basis[j], &points[i]) / weights[i]
    });
    let rhs = DVector::from_fn(rows, |i, _| values[i] / weights[i]);
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < cols || smax == 0.0 {
        return Err(Error::RankDeficient { rank, cols });
    }
    let beta = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// Point-wise relative errors `|y - p(x)| / y`.
pub fn relative_errors(points: &[Vec<f64>], values: &[f64], coef: &[f64], basis: &[Vec<u32>]) -> Vec<f64> {
    points
        .iter()
        .zip(values)
        .map(|(x, &y)| (y - eval_poly(basis, coef, x)).abs() / y)
        .collect()
}

/// Reduces errors by the measure; the 90th percentile is the sorted value
/// at index `ceil(0.9 N) - 1`.
pub fn reduce_errors(errors: &[f64], measure: ErrorMeasure) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    match measure {
        ErrorMeasure::Average => errors.iter().sum::<f64>() / errors.len() as f64,
        ErrorMeasure::Maximum => errors.iter().copied().fold(0.0, f64::max),
        ErrorMeasure::P90 => {
            let mut s = errors.to_vec();
            s.sort_by(f64::total_cmp);
            let idx = (9 * s.len()).div_ceil(10) - 1;
            s[idx]
        }
    }
}

pub fn leaf_error(
    points: &[Vec<f64>],
    values: &[f64],
    coef: &[f64],
    basis: &[Vec<u32>],
    measure: ErrorMeasure,
) -> f64 {
    reduce_errors(&relative_errors(points, values, coef, basis), measure)
}
