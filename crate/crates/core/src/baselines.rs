//! Tikhonov-regularized Gaussian kernel least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub inputs: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub sigma: f64,
    pub gamma: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(−‖a − b‖² / (2σ²))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * sigma * sigma)).exp()
}

/// Solves `(K + γ·M·I) c = y` by Cholesky, or `(K + γ·I) c = y` when
/// `scale_by_m` is off.
pub fn krr_fit(
    inputs: &[Vec<f64>],
    targets: &[f64],
    sigma: f64,
    gamma: f64,
    scale_by_m: bool,
) -> Result<KrrModel> {
    if inputs.is_empty() {
        return Err(Error::param("inputs", "no training pairs"));
    }
    if targets.len() != inputs.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(
            "krr.sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param(
            "krr.gamma",
            format!("must be positive, got {gamma}"),
        ));
    }
    let dim = inputs[0].len();
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::param("inputs", "inconsistent input dimension"));
    }
    let n = inputs.len();
    let ridge = if scale_by_m { gamma * n as f64 } else { gamma };
    let mut k = DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            gaussian_kernel(&inputs[i], &inputs[j], sigma)
        } else {
            0.0
        }
    });
    k.fill_lower_triangle_with_upper_triangle();
    for i in 0..n {
        k[(i, i)] += ridge;
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::Solver("kernel system is not positive definite".into()))?;
    let c = chol.solve(&DVector::from_column_slice(targets));
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite kernel coefficients".into()));
    }
    Ok(KrrModel {
        inputs: inputs.to_vec(),
        coefficients: c.iter().copied().collect(),
        sigma,
        gamma,
    })
}

/// `Σ_i c_i exp(−‖x − x_i‖²/(2σ²))`.
pub fn krr_predict(model: &KrrModel, x: &[f64]) -> f64 {
    model
        .inputs
        .iter()
        .zip(&model.coefficients)
        .map(|(xi, c)| c * gaussian_kernel(x, xi, model.sigma))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pair_closed_form() {
        let m = krr_fit(&[vec![100.0, 110.0]], &[150.0], 100.0, 1e-4, true).unwrap();
        assert!((krr_predict(&m, &[100.0, 110.0]) - 150.0 / (1.0 + 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn strong_regularization_shrinks_to_zero() {
        let xs = vec![vec![100.0], vec![120.0], vec![140.0]];
        let m = krr_fit(&xs, &[100.0, 120.0, 140.0], 100.0, 1e8, true).unwrap();
        for x in &xs {
            assert!(krr_predict(&m, x).abs() < 1e-4);
        }
    }

    #[test]
    fn duplicates_are_solvable() {
        let xs = vec![vec![100.0, 100.0]; 4];
        let m = krr_fit(&xs, &[90.0, 100.0, 110.0, 100.0], 100.0, 1e-4, true).unwrap();
        assert!((krr_predict(&m, &xs[0]) - 100.0).abs() < 0.1);
    }

    #[test]
    fn far_points_predict_zero() {
        let m = krr_fit(
            &[vec![100.0], vec![150.0]],
            &[100.0, 150.0],
            100.0,
            1e-4,
            true,
        )
        .unwrap();
        assert!(krr_predict(&m, &[5000.0]).abs() < 1e-100);
    }

    #[test]
    fn constant_targets_on_dense_cover() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![60.0 + 5.0 * i as f64]).collect();
        let m = krr_fit(&xs, &vec![130.0; 40], 100.0, 1e-4, true).unwrap();
        for x in &xs {
            assert!((krr_predict(&m, x) - 130.0).abs() <= 1.3);
        }
    }

    #[test]
    fn interpolation_limit() {
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![150.0 * i as f64, 40.0 * i as f64])
            .collect();
        let ys = [70.0, 95.0, 130.0, 180.0, 220.0, 160.0];
        let m = krr_fit(&xs, &ys, 100.0, 1e-8, true).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((krr_predict(&m, x) - y).abs() < 1e-4);
        }
    }

    #[test]
    fn ridge_bounds_spectrum() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * i) as f64]).collect();
        let gamma = 1e-3;
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| gaussian_kernel(&xs[i], &xs[j], 100.0));
        assert_eq!(k, k.transpose());
        for i in 0..n {
            assert_eq!(k[(i, i)], 1.0);
        }
        let reg = &k + DMatrix::identity(n, n) * (gamma * n as f64);
        let min = reg.symmetric_eigenvalues().min();
        assert!(min >= gamma * n as f64 - 1e-12);
    }

    #[test]
    fn errors() {
        assert!(krr_fit(&[], &[], 100.0, 1e-4, true).is_err());
        assert!(krr_fit(&[vec![1.0]], &[1.0, 2.0], 100.0, 1e-4, true).is_err());
        assert!(krr_fit(&[vec![1.0]], &[1.0], 0.0, 1e-4, true).is_err());
        assert!(krr_fit(&[vec![1.0]], &[1.0], 1.0, -1.0, true).is_err());
        assert!(krr_fit(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 1.0], 1.0, 1.0, true).is_err());
    }

    proptest! {
        #[test]
        fn prediction_is_lipschitz(dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![60.0 + 30.0 * i as f64, 80.0 + 20.0 * i as f64]).collect();
            let ys: Vec<f64> = (0..8).map(|i| 100.0 + 15.0 * i as f64).collect();
            let m = krr_fit(&xs, &ys, 100.0, 1e-4, true).unwrap();
            // |∇k| ≤ 1/(σ√e), so the model is Lipschitz with Σ|c_i|/(σ√e).
            let lip: f64 = m.coefficients.iter().map(|c| c.abs()).sum::<f64>() / (100.0 * 1f64.exp().sqrt());
            let base = [150.0, 140.0];
            let moved = [150.0 + dx, 140.0 + dy];
            let delta = (dx * dx + dy * dy).sqrt();
            prop_assert!((krr_predict(&m, &base) - krr_predict(&m, &moved)).abs() <= lip * delta + 1e-12);
        }
    }
}
