//! Derivative estimation at the right end of an interval from a filtered
//! Legendre expansion, and the short-term linear predictor built on it.
//!
//! Sample times are mapped affinely onto `[−1, 1]` with the newest reading at
//! `1`. A quadrature rule `{w_j}` on those nodes integrates `P_k` exactly for
//! `k < 2n`, and the derivative at `1` is estimated as
//! `Σ_j w_j·y_j·K_n(t_j)` with the differentiation kernel
//! `K_n(x) = ½ Σ_{k<n} h(k/n)·k(k+½)(k+1)·P_k(x)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::cgm::{SampleWindow, NOMINAL_STEP_MINUTES};
use crate::error::{Error, Result};
use crate::linalg::min_norm_lstsq;

/// Default bound on the condition number of the quadrature system.
pub const DEFAULT_KAPPA_MAX: f64 = 1e6;

/// Residual above which a quadrature system is considered unsolved.
pub const QUADRATURE_RESIDUAL_TOL: f64 = 1e-8;

/// Legendre polynomial `P_k(x)` by the three-term recurrence
/// `k·P_k = (2k−1)·x·P_{k−1} − (k−1)·P_{k−2}`.
pub fn legendre_eval(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p_prev, mut p) = (1.0, x);
            for i in 2..=k {
                let fi = i as f64;
                let next = ((2.0 * fi - 1.0) * x * p - (fi - 1.0) * p_prev) / fi;
                p_prev = p;
                p = next;
            }
            p
        }
    }
}

/// All of `P_0(x), …, P_{count−1}(x)`.
pub fn legendre_all(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let (mut p_prev, mut p) = (0.0, 1.0);
    for i in 0..count {
        out.push(p);
        let fi = (i + 1) as f64;
        let next = ((2.0 * fi - 1.0) * x * p - (fi - 1.0) * p_prev) / fi;
        p_prev = p;
        p = next;
    }
    out
}

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// The smooth cutoff `h`: even, `C^∞`, equal to 1 on `[0, ½]` and 0 from 1 on.
///
/// On `(½, 1)` it is the partition-of-unity ratio `g(1−v) / (g(1−v) + g(v))`
/// with `v = 2|t| − 1` and `g(x) = exp(−1/x)`.
pub fn smooth_cutoff(t: f64) -> f64 {
    let u = t.abs();
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let v = 2.0 * u - 1.0;
        let a = bump(1.0 - v);
        a / (a + bump(v))
    }
}

fn kernel_coefficients(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            0.5 * smooth_cutoff(k / n as f64) * k * (k + 0.5) * (k + 1.0)
        })
        .collect()
}

/// Differentiation kernel `K_n(h; x)`.
pub fn diff_kernel(n: usize, x: f64) -> f64 {
    kernel_coefficients(n)
        .iter()
        .zip(legendre_all(n, x))
        .map(|(c, p)| c * p)
        .sum()
}

/// Maps strictly increasing sample times onto `[−1, 1]` (first → −1,
/// last → 1). Returns the nodes and the chain-rule factor
/// `scale = 2 / (t_last − t_first)` so that `f'(t_last) = scale · f'(1)`.
pub fn map_window_times(times: &[f64]) -> Result<(Vec<f64>, f64)> {
    if times.len() < 2 {
        return Err(Error::param("times", "need at least two sample times"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    let (first, last) = (times[0], times[times.len() - 1]);
    let span = last - first;
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::param("times", "zero-length span"));
    }
    let mid = 0.5 * (first + last);
    let nodes = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == times.len() - 1 {
                1.0
            } else if i == 0 {
                -1.0
            } else {
                2.0 * (t - mid) / span
            }
        })
        .collect();
    Ok((nodes, 2.0 / span))
}

/// Weights on fixed nodes integrating `P_k` exactly for `k < 2·degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
    pub condition: f64,
    /// `K_n(h; t_j)` at each node, precomputed for the estimator.
    kernel_at_nodes: Vec<f64>,
}

struct QuadratureFit {
    rule: QuadratureRule,
    residual: f64,
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::DegenerateNodes(format!(
            "need at least 2 nodes, got {}",
            nodes.len()
        )));
    }
    if nodes
        .iter()
        .any(|t| !t.is_finite() || t.abs() > 1.0 + 1e-12)
    {
        return Err(Error::DegenerateNodes("nodes must lie in [-1, 1]".into()));
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[1] - w[0] <= 1e-12) {
        return Err(Error::DegenerateNodes("duplicated node".into()));
    }
    Ok(())
}

fn fit_quadrature(nodes: &[f64], degree: usize) -> Result<QuadratureFit> {
    let rows = 2 * degree;
    let basis: Vec<Vec<f64>> = nodes.iter().map(|&t| legendre_all(rows, t)).collect();
    let a = DMatrix::from_fn(rows, nodes.len(), |k, j| basis[j][k]);
    let mut b = DVector::zeros(rows);
    b[0] = 2.0;
    let fit = min_norm_lstsq(&a, &b)?;
    let kernel_at_nodes = nodes.iter().map(|&t| diff_kernel(degree, t)).collect();
    Ok(QuadratureFit {
        rule: QuadratureRule {
            nodes: nodes.to_vec(),
            weights: fit.solution.iter().copied().collect(),
            degree,
            condition: fit.condition,
            kernel_at_nodes,
        },
        residual: fit.residual,
    })
}

impl QuadratureRule {
    /// The rule for a fixed degree `n`, failing if the `2n` moment
    /// conditions cannot be met on these nodes.
    pub fn with_degree(nodes: &[f64], degree: usize) -> Result<Self> {
        check_nodes(nodes)?;
        if degree == 0 {
            return Err(Error::param("degree", "must be at least 1"));
        }
        let fit = fit_quadrature(nodes, degree)?;
        if fit.residual > QUADRATURE_RESIDUAL_TOL {
            return Err(Error::DegenerateNodes(format!(
                "degree {degree} moment system has residual {:.3e}",
                fit.residual
            )));
        }
        Ok(fit.rule)
    }

    /// `max_k |Σ_j w_j P_k(t_j) − ∫P_k|` over `k < 2n`.
    pub fn exactness_error(&self) -> f64 {
        let rows = 2 * self.degree;
        let mut moments = vec![0.0; rows];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            for (m, p) in moments.iter_mut().zip(legendre_all(rows, t)) {
                *m += w * p;
            }
        }
        moments
            .iter()
            .enumerate()
            .map(|(k, m)| (m - if k == 0 { 2.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    pub fn kernel_at_nodes(&self) -> &[f64] {
        &self.kernel_at_nodes
    }
}

/// Chooses the largest degree `n` whose moment system is solvable (residual
/// ≤ 1e-8) with condition number ≤ `kappa_max`, scanning `n = 1, 2, …` and
/// stopping at the first inadmissible degree.
pub fn solve_quadrature(nodes: &[f64], kappa_max: f64) -> Result<QuadratureRule> {
    check_nodes(nodes)?;
    let mut best: Option<QuadratureRule> = None;
    // 2n moments on d nodes: beyond n = d the system is always overdetermined
    // past what symmetric node sets can satisfy.
    for degree in 1..=nodes.len() + 1 {
        let fit = fit_quadrature(nodes, degree)?;
        if fit.residual > QUADRATURE_RESIDUAL_TOL || !(fit.rule.condition <= kappa_max) {
            break;
        }
        best = Some(fit.rule);
    }
    best.ok_or_else(|| {
        Error::DegenerateNodes(format!(
            "no degree admissible with condition <= {kappa_max:e}"
        ))
    })
}

/// Derivative estimate in the caller's units (per minute after rescaling).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub degree_used: usize,
}

/// `scale · Σ_j w_j·values_j·K_n(t_j)`.
pub fn estimate_derivative(
    values: &[f64],
    rule: &QuadratureRule,
    scale: f64,
) -> Result<DerivativeEstimate> {
    if values.len() != rule.nodes.len() {
        return Err(Error::LengthMismatch {
            expected: rule.nodes.len(),
            got: values.len(),
        });
    }
    let sum: f64 = values
        .iter()
        .zip(&rule.weights)
        .zip(&rule.kernel_at_nodes)
        .map(|((y, w), k)| w * y * k)
        .sum();
    Ok(DerivativeEstimate {
        value: scale * sum,
        degree_used: rule.degree,
    })
}

/// Quadrature rules keyed by node geometry, shareable across threads.
#[derive(Debug, Default)]
pub struct QuadratureCache {
    rules: RwLock<HashMap<Vec<u64>, Arc<QuadratureRule>>>,
}

impl QuadratureCache {
    pub fn get_or_solve(&self, nodes: &[f64], kappa_max: f64) -> Result<Arc<QuadratureRule>> {
        let key: Vec<u64> = nodes
            .iter()
            .map(|t| t.to_bits())
            .chain(std::iter::once(kappa_max.to_bits()))
            .collect();
        if let Some(rule) = self.rules.read().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(solve_quadrature(nodes, kappa_max)?);
        self.rules
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&rule));
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.rules.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `s(t_j) + horizon · s'(t_j)` with the derivative from the filtered
/// Legendre estimator. Windows are taken to lie on the nominal sampling grid.
#[derive(Debug)]
pub struct LinearPredictor {
    pub step_minutes: f64,
    pub kappa_max: f64,
    cache: QuadratureCache,
}

impl Default for LinearPredictor {
    fn default() -> Self {
        Self::new(NOMINAL_STEP_MINUTES, DEFAULT_KAPPA_MAX)
    }
}

impl LinearPredictor {
    pub fn new(step_minutes: f64, kappa_max: f64) -> Self {
        Self {
            step_minutes,
            kappa_max,
            cache: QuadratureCache::default(),
        }
    }

    pub fn derivative(&self, readings: &[f64]) -> Result<DerivativeEstimate> {
        let d = readings.len();
        let times: Vec<f64> = (0..d).map(|i| i as f64 * self.step_minutes).collect();
        let (nodes, scale) = map_window_times(&times)?;
        let rule = self.cache.get_or_solve(&nodes, self.kappa_max)?;
        estimate_derivative(readings, &rule, scale)
    }

    pub fn predict(&self, window: &SampleWindow, horizon: f64) -> Result<f64> {
        let last = *window
            .x
            .last()
            .ok_or_else(|| Error::param("window", "empty input window"))?;
        Ok(last + horizon * self.derivative(&window.x)?.value)
    }

    pub fn cache(&self) -> &QuadratureCache {
        &self.cache
    }
}

/// One-off linear prediction with the default grid and condition bound.
pub fn linear_predict(window: &SampleWindow, horizon: f64) -> Result<f64> {
    LinearPredictor::default().predict(window, horizon)
}
