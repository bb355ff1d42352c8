use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Laplacian, LaplacianMode};
use crate::error::{Error, Result};

/// Which eigensolver backs [`eigendecompose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSolver {
    /// Dense for small problems, Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// Problems up to this size are always solved densely under `Auto`.
const DENSE_LIMIT: usize = 400;

/// Relative residual bound for accepting Lanczos Ritz pairs.
const LANCZOS_TOL: f64 = 1e-11;

/// Low eigenpairs of a graph Laplacian over the whole cloud.
///
/// `eigenvectors` holds `φ_k` as columns, normalized so that
/// `Σ_i μ_i φ_j(i) φ_k(i) = δ_jk` under `measure`: the normalized degrees in
/// random-walk mode and `1/N` in unnormalized mode. In both modes `φ_0 ≡ 1`.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub mode: LaplacianMode,
    pub epsilon: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub measure: Vec<f64>,
}

impl DiffusionModel {
    pub fn len(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvectors.nrows() == 0
    }

    pub fn num_eigenpairs(&self) -> usize {
        self.eigenvalues.len()
    }

    #[inline]
    pub fn phi(&self, k: usize, i: usize) -> f64 {
        self.eigenvectors[(i, k)]
    }

    /// `max_{j,k} |⟨φ_j, φ_k⟩_μ − δ_jk|`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.num_eigenpairs();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in a..k {
                let ip: f64 = (0..self.len())
                    .map(|i| self.measure[i] * self.phi(a, i) * self.phi(b, i))
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }
}

/// The `k_max` smallest eigenpairs of `laplacian`, ascending, with the
/// normalization described on [`DiffusionModel`] and the sign of each `φ_k`
/// fixed so that its first non-negligible entry is positive.
pub fn eigendecompose(
    laplacian: &Laplacian,
    k_max: usize,
    solver: EigenSolver,
) -> Result<DiffusionModel> {
    let n = laplacian.len();
    if k_max == 0 || k_max > n {
        return Err(Error::param(
            "diffusion.k_max",
            format!("must lie in [1, {n}], got {k_max}"),
        ));
    }
    let use_dense = match solver {
        EigenSolver::Dense => true,
        EigenSolver::Lanczos => false,
        EigenSolver::Auto => n <= DENSE_LIMIT || 3 * k_max > n,
    };
    let (eigenvalues, vectors) = if use_dense {
        dense_smallest(laplacian.symmetric_form(), k_max)
    } else {
        // Smallest of L are the largest of c·I − L, with c bounding the spectrum.
        let shift = match laplacian.mode {
            LaplacianMode::RandomWalk => 1.0,
            LaplacianMode::Unnormalized => {
                2.0 * laplacian.degrees().iter().copied().fold(0.0, f64::max)
            }
        };
        let (theta, vectors) = lanczos_largest(laplacian.symmetric_form(), shift, k_max)?;
        (theta.iter().map(|t| shift - t).collect(), vectors)
    };

    let vectors = pin_ground_state(vectors, laplacian);
    let (measure, mut phi) = match laplacian.mode {
        LaplacianMode::RandomWalk => {
            let total: f64 = laplacian.degrees().iter().sum();
            let mut phi = vectors;
            for (i, d) in laplacian.degrees().iter().enumerate() {
                phi.row_mut(i).scale_mut((total / d).sqrt());
            }
            let measure = laplacian.degrees().iter().map(|d| d / total).collect();
            (measure, phi)
        }
        LaplacianMode::Unnormalized => (vec![1.0 / n as f64; n], vectors * (n as f64).sqrt()),
    };
    for mut col in phi.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(DiffusionModel {
        mode: laplacian.mode,
        epsilon: laplacian.epsilon,
        eigenvalues,
        eigenvectors: phi,
        measure,
    })
}

/// Replaces the first column by the exact null vector (`D^{1/2}·1` or `1`,
/// normalized) and re-orthogonalizes the rest against it in order. This only
/// moves vectors by rounding error unless `λ = 0` is degenerate (disconnected
/// graph), where it picks the constant function out of the null space.
fn pin_ground_state(mut vectors: DMatrix<f64>, laplacian: &Laplacian) -> DMatrix<f64> {
    let ground = match laplacian.mode {
        LaplacianMode::RandomWalk => DVector::from_iterator(
            laplacian.len(),
            laplacian.degrees().iter().map(|d| d.sqrt()),
        ),
        LaplacianMode::Unnormalized => DVector::from_element(laplacian.len(), 1.0),
    };
    vectors.set_column(0, &ground.normalize());
    for c in 1..vectors.ncols() {
        for prev in 0..c {
            let overlap = vectors.column(prev).dot(&vectors.column(c));
            let prev_col = vectors.column(prev).clone_owned();
            vectors.column_mut(c).axpy(-overlap, &prev_col, 1.0);
        }
        let norm = vectors.column(c).norm();
        vectors.column_mut(c).unscale_mut(norm);
    }
    vectors
}

fn sorted_eigenpairs(
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    ascending: bool,
) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    if ascending {
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    } else {
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    }
    order
}

fn dense_smallest(matrix: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(matrix.clone());
    let vectors = eig.eigenvectors.clone();
    let order = sorted_eigenpairs(eig, true);
    let values = order[..k].iter().map(|(v, _)| *v).collect();
    let cols: Vec<_> = order[..k].iter().map(|(_, i)| vectors.column(*i)).collect();
    (values, DMatrix::from_columns(&cols))
}

/// Largest `k` eigenpairs of `shift·I − a` by Lanczos with full
/// reorthogonalization, growing the Krylov space until every wanted Ritz
/// pair has residual below `LANCZOS_TOL·shift`.
fn lanczos_largest(a: &DMatrix<f64>, shift: f64, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_2a05);
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        for _ in 0..2 {
            for q in basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        (norm > 1e-8).then(|| v / norm)
    };

    let mut basis: Vec<DVector<f64>> = vec![random_unit(&[]).expect("nonempty space")];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut target = n.min((2 * k + 20).max(60));
    let mut w = DVector::zeros(n);
    let mut iterations = 0;
    let tol = LANCZOS_TOL * shift.max(1.0);

    loop {
        while alpha.len() < target {
            let j = alpha.len();
            let q = &basis[j];
            // w = (shift·I − A)·q
            w.gemv(-1.0, a, q, 0.0);
            w.axpy(shift, q, 1.0);
            iterations += 1;
            let aj = q.dot(&w);
            for _ in 0..2 {
                for qi in &basis {
                    let c = qi.dot(&w);
                    w.axpy(-c, qi, 1.0);
                }
            }
            let bj = w.norm();
            alpha.push(aj);
            if alpha.len() == n {
                beta.push(0.0);
                break;
            }
            if bj > 1e-10 * shift.max(1.0) {
                beta.push(bj);
                basis.push(&w / bj);
            } else {
                // Invariant subspace found; continue in a fresh direction.
                beta.push(0.0);
                match random_unit(&basis) {
                    Some(v) => basis.push(v),
                    None => break,
                }
            }
        }
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let s = eig.eigenvectors.clone();
        let order = sorted_eigenpairs(eig, false);
        let wanted = &order[..k.min(m)];
        let coupling = beta[m - 1];
        let converged = m >= k
            && wanted
                .iter()
                .all(|(_, idx)| (coupling * s[(m - 1, *idx)]).abs() <= tol);
        if converged {
            let mut vectors = DMatrix::zeros(n, k);
            for (c, (_, idx)) in wanted.iter().enumerate() {
                let mut col = vectors.column_mut(c);
                for (r, q) in basis.iter().take(m).enumerate() {
                    col.axpy(s[(r, *idx)], q, 1.0);
                }
                let norm = col.norm();
                col /= norm;
            }
            log::debug!("lanczos: {k} eigenpairs from a {m}-dimensional Krylov space");
            return Ok((wanted.iter().map(|(v, _)| *v).collect(), vectors));
        }
        if m >= n || target >= n {
            return Err(Error::EigenNonConvergence { iterations });
        }
        target = n.min(target * 2);
    }
}
