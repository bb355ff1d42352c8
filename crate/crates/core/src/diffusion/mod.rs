//! Diffusion geometry on a point cloud: Gaussian affinities, graph
//! Laplacian, its low eigenpairs, and summability-kernel regression
//! `σ_λ(f, x) = Σ_j W_j f(x_j) Σ_{λ_k<λ} h(λ_k/λ) φ_k(x) φ_k(x_j)`.

mod eigen;
mod summability;

pub use eigen::{eigendecompose, DiffusionModel, EigenSolver};
pub use summability::{
    evaluate_sigma, evaluate_sigma_all, solve_summability_weights, solve_summability_weights_with,
    Admissibility, SummabilityWeights, SUMMABILITY_RESIDUAL_TOL,
};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgm::SampleWindow;
use crate::error::{Error, Result};

/// Cap on the number of points used by [`choose_epsilon`].
pub const EPSILON_SUBSAMPLE: usize = 2000;

/// Where a cloud point came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointId {
    pub patient: String,
    pub j: usize,
}

/// `N` points of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<PointId>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, ids: Vec<PointId>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateCloud(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points.len() != ids.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: ids.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::DegenerateCloud("zero-dimensional points".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DegenerateCloud(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateCloud(format!("point {i} is not finite")));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords, ids })
    }

    /// Cloud with ids numbered by position, for tests and ad-hoc data.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..points.len())
            .map(|j| PointId {
                patient: String::new(),
                j,
            })
            .collect();
        Self::new(points, ids)
    }

    pub fn from_windows(windows: &[SampleWindow]) -> Result<Self> {
        let points = windows.iter().map(|w| w.x.clone()).collect();
        let ids = windows
            .iter()
            .map(|w| PointId {
                patient: w.patient_id.clone(),
                j: w.j,
            })
            .collect();
        Self::new(points, ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Median squared pairwise distance over a uniform subsample of at most
/// [`EPSILON_SUBSAMPLE`] points (deterministic per seed). Falls back to the
/// median over distinct pairs when more than half of the pairs coincide.
pub fn choose_epsilon(cloud: &PointCloud, seed: u64) -> Result<f64> {
    let n = cloud.len();
    let sample: Vec<usize> = if n > EPSILON_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, EPSILON_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
    for (a, &i) in sample.iter().enumerate() {
        for &j in &sample[a + 1..] {
            dists.push(cloud.squared_distance(i, j));
        }
    }
    let median = median_of(&mut dists);
    if median > 0.0 {
        return Ok(median);
    }
    let mut positive: Vec<f64> = dists.into_iter().filter(|d| *d > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateCloud("all points are identical".into()));
    }
    Ok(median_of(&mut positive))
}

fn median_of(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Gaussian affinities `exp(−‖y_i − y_j‖²/ε)`; exactly symmetric with unit
/// diagonal.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub matrix: DMatrix<f64>,
    pub epsilon: f64,
}

pub fn build_weight_matrix(cloud: &PointCloud, epsilon: f64) -> Result<WeightMatrix> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param(
            "diffusion.epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let n = cloud.len();
    let mut matrix = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..j {
            let w = (-cloud.squared_distance(i, j) / epsilon).exp();
            matrix[(i, j)] = w;
            matrix[(j, i)] = w;
        }
    }
    Ok(WeightMatrix { matrix, epsilon })
}

impl WeightMatrix {
    pub fn degrees(&self) -> Vec<f64> {
        self.matrix.row_sum().iter().copied().collect()
    }

    /// The row-stochastic diffusion matrix `D⁻¹W`.
    pub fn transition(&self) -> DMatrix<f64> {
        let degrees = self.degrees();
        let mut p = self.matrix.clone();
        for (i, d) in degrees.iter().enumerate() {
            p.row_mut(i).scale_mut(1.0 / d);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianMode {
    /// `L = I − D⁻¹W`, eigensolved through `I − D^{−1/2} W D^{−1/2}`.
    #[default]
    RandomWalk,
    /// `L = D − W`.
    Unnormalized,
}

/// A positive semidefinite graph Laplacian, held in symmetric form.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub mode: LaplacianMode,
    pub epsilon: f64,
    degrees: Vec<f64>,
    /// `I − D^{−1/2} W D^{−1/2}` in random-walk mode, `D − W` otherwise.
    symmetric: DMatrix<f64>,
}

pub fn build_laplacian(weights: WeightMatrix, mode: LaplacianMode) -> Result<Laplacian> {
    let degrees = weights.degrees();
    if let Some(i) = degrees.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::DegenerateCloud(format!(
            "row {i} has zero weight sum"
        )));
    }
    let n = degrees.len();
    let mut m = weights.matrix;
    match mode {
        LaplacianMode::RandomWalk => {
            let inv_sqrt: Vec<f64> = degrees.iter().map(|d| d.sqrt().recip()).collect();
            for j in 0..n {
                for i in 0..n {
                    let s = inv_sqrt[i] * m[(i, j)] * inv_sqrt[j];
                    m[(i, j)] = if i == j { 1.0 - s } else { -s };
                }
            }
        }
        LaplacianMode::Unnormalized => {
            m.neg_mut();
            for (i, d) in degrees.iter().enumerate() {
                m[(i, i)] += d;
            }
        }
    }
    Ok(Laplacian {
        mode,
        epsilon: weights.epsilon,
        degrees,
        symmetric: m,
    })
}

impl Laplacian {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn symmetric_form(&self) -> &DMatrix<f64> {
        &self.symmetric
    }

    /// Applies the Laplacian itself (`I − D⁻¹W` or `D − W`) to `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self.mode {
            LaplacianMode::Unnormalized => (&self.symmetric * DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
            LaplacianMode::RandomWalk => {
                // I − D⁻¹W = D^{−1/2} L_sym D^{1/2}
                let scaled: Vec<f64> = v
                    .iter()
                    .zip(&self.degrees)
                    .map(|(x, d)| x * d.sqrt())
                    .collect();
                let out = &self.symmetric * DVector::from_vec(scaled);
                out.iter()
                    .zip(&self.degrees)
                    .map(|(x, d)| x / d.sqrt())
                    .collect()
            }
        }
    }
}
