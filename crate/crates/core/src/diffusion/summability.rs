use nalgebra::{DMatrix, DVector};

use super::DiffusionModel;
use crate::error::{Error, Result};
use crate::legendre::smooth_cutoff;
use crate::linalg::min_norm_lstsq;

pub const SUMMABILITY_RESIDUAL_TOL: f64 = 1e-8;

/// Quadrature weights over a training subset of the cloud, together with the
/// spectral cutoff they were solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityWeights {
    /// Cloud indices of the training points.
    pub train_ids: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Number of eigenfunctions (`λ_k < λ`) in the constraint system.
    pub k_used: usize,
    pub condition: f64,
    /// `h(λ_k/λ)` for `k < k_used`.
    pub filter: Vec<f64>,
}

fn filter_factor(lambda_k: f64, lambda: f64) -> f64 {
    if lambda_k <= 0.0 || lambda <= 0.0 {
        1.0
    } else {
        smooth_cutoff(lambda_k / lambda)
    }
}

/// Bounds a weight system must meet for `k_used` to be accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub kappa_max: f64,
    /// Upper bound on `Σ_j |W_j|`; infinite disables the check.
    pub max_weight_l1: f64,
}

impl Admissibility {
    pub fn condition_only(kappa_max: f64) -> Self {
        Self {
            kappa_max,
            max_weight_l1: f64::INFINITY,
        }
    }
}

/// Solves `Σ_j W_j φ_k(x_j) = [k = 0]` for `k < k_used` in minimum-norm least
/// squares, growing `k_used` while the system stays solved (residual ≤ 1e-8)
/// with condition number ≤ `kappa_max`.
pub fn solve_summability_weights(
    model: &DiffusionModel,
    train_ids: &[usize],
    kappa_max: f64,
) -> Result<SummabilityWeights> {
    solve_summability_weights_with(model, train_ids, Admissibility::condition_only(kappa_max))
}

/// Like [`solve_summability_weights`], additionally stopping before the
/// weights' ℓ1 norm exceeds `max_weight_l1`.
pub fn solve_summability_weights_with(
    model: &DiffusionModel,
    train_ids: &[usize],
    admissibility: Admissibility,
) -> Result<SummabilityWeights> {
    let Admissibility {
        kappa_max,
        max_weight_l1,
    } = admissibility;
    if train_ids.is_empty() {
        return Err(Error::param("train_ids", "training set is empty"));
    }
    if let Some(&bad) = train_ids.iter().find(|&&i| i >= model.len()) {
        return Err(Error::param(
            "train_ids",
            format!("point {bad} outside a cloud of {}", model.len()),
        ));
    }
    let k_max = model.num_eigenpairs();
    let mut best: Option<(usize, DVector<f64>, f64)> = None;
    for k_used in 1..=k_max {
        let a = DMatrix::from_fn(k_used, train_ids.len(), |k, j| model.phi(k, train_ids[j]));
        let mut b = DVector::zeros(k_used);
        b[0] = 1.0;
        let fit = min_norm_lstsq(&a, &b)?;
        let l1: f64 = fit.solution.iter().map(|w| w.abs()).sum();
        if fit.residual > SUMMABILITY_RESIDUAL_TOL
            || !(fit.condition <= kappa_max)
            || (k_used > 1 && !(l1 <= max_weight_l1))
        {
            break;
        }
        best = Some((k_used, fit.solution, fit.condition));
    }
    let (k_used, solution, condition) = best.ok_or_else(|| {
        Error::Solver(format!(
            "summability system ill-posed even with one eigenfunction ({} training points)",
            train_ids.len()
        ))
    })?;
    let ev = &model.eigenvalues;
    let lambda = if k_used < k_max {
        0.5 * (ev[k_used - 1] + ev[k_used])
    } else {
        2.0 * ev[k_used - 1]
    };
    let filter = ev[..k_used]
        .iter()
        .map(|&lk| filter_factor(lk, lambda))
        .collect();
    Ok(SummabilityWeights {
        train_ids: train_ids.to_vec(),
        weights: solution.iter().copied().collect(),
        lambda,
        k_used,
        condition,
        filter,
    })
}

/// Spectral coefficients `h(λ_k/λ) Σ_j W_j y_j φ_k(x_j)`.
fn coefficients(
    model: &DiffusionModel,
    sw: &SummabilityWeights,
    targets: &[f64],
) -> Result<Vec<f64>> {
    if targets.len() != sw.train_ids.len() {
        return Err(Error::LengthMismatch {
            expected: sw.train_ids.len(),
            got: targets.len(),
        });
    }
    Ok((0..sw.k_used)
        .map(|k| {
            let s: f64 = sw
                .train_ids
                .iter()
                .zip(&sw.weights)
                .zip(targets)
                .map(|((&i, w), y)| w * y * model.phi(k, i))
                .sum();
            sw.filter[k] * s
        })
        .collect())
}

/// `σ_λ(h; f, x)` at cloud point `point`.
pub fn evaluate_sigma(
    model: &DiffusionModel,
    sw: &SummabilityWeights,
    targets: &[f64],
    point: usize,
) -> Result<f64> {
    if point >= model.len() {
        return Err(Error::param(
            "point",
            format!("{point} outside a cloud of {}", model.len()),
        ));
    }
    let coeffs = coefficients(model, sw, targets)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * model.phi(k, point))
        .sum())
}

/// `σ_λ(h; f, ·)` at every cloud point.
pub fn evaluate_sigma_all(
    model: &DiffusionModel,
    sw: &SummabilityWeights,
    targets: &[f64],
) -> Result<Vec<f64>> {
    let coeffs = coefficients(model, sw, targets)?;
    Ok((0..model.len())
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * model.phi(k, i))
                .sum()
        })
        .collect())
}
