//! Small dense linear-algebra helpers shared by the quadrature solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct Lstsq {
    pub solution: DVector<f64>,
    pub residual: f64,
    /// Ratio of the largest to smallest of the `min(rows, cols)` singular
    /// values; infinite when rank-deficient.
    pub condition: f64,
}

/// Minimum-norm least-squares solution of `a·x = b` via SVD.
pub(crate) fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Lstsq> {
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let cutoff = max * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    let solution = svd
        .solve(b, cutoff)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let residual = (a * &solution - b).norm();
    Ok(Lstsq {
        solution,
        residual,
        condition,
    })
}
