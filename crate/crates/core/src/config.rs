//! Experiment configuration. Every key has a default; files only need the
//! keys they change.

use serde::{Deserialize, Serialize};

use crate::diffusion::{Admissibility, EigenSolver, LaplacianMode};
use crate::error::{Error, Result};
use crate::legendre::DEFAULT_KAPPA_MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Readings per input window.
    pub d: usize,
    /// Prediction horizon in sampling steps.
    pub m: usize,
    /// Percentage of patients used for training.
    pub train_percent: f64,
    /// Seed of the first trial; trial `i` uses `seed + i`.
    pub seed: u64,
    pub trials: usize,
    pub smoothing: SmoothingConfig,
    pub gap: GapConfig,
    pub legendre: LegendreConfig,
    pub diffusion: DiffusionConfig,
    pub rate: RateConfig,
    pub eval: EvalConfig,
    pub krr: KrrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 7,
            m: 6,
            train_percent: 30.0,
            seed: 0,
            trials: 100,
            smoothing: SmoothingConfig::default(),
            gap: GapConfig::default(),
            legendre: LegendreConfig::default(),
            diffusion: DiffusionConfig::default(),
            rate: RateConfig::default(),
            eval: EvalConfig::default(),
            krr: KrrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub enabled: bool,
    /// Normalized to Nyquist.
    pub cutoff: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            cutoff: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub slack: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self { slack: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegendreConfig {
    pub kappa_max: f64,
}

impl Default for LegendreConfig {
    fn default() -> Self {
        Self {
            kappa_max: DEFAULT_KAPPA_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Gaussian bandwidth; `None` picks the median squared distance.
    pub epsilon: Option<f64>,
    pub mode: LaplacianMode,
    pub kappa_max: f64,
    /// Bound on the ℓ1 norm of the quadrature weights; a huge value disables it.
    pub max_weight_l1: f64,
    pub k_max: usize,
    pub solver: EigenSolver,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            mode: LaplacianMode::default(),
            kappa_max: DEFAULT_KAPPA_MAX,
            max_weight_l1: 1.2,
            k_max: 50,
            solver: EigenSolver::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    /// Overrides the zone tables' rate denominator factor when set.
    pub denominator_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Score only patients outside the training split.
    pub test_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrrConfig {
    pub sigma: f64,
    pub gamma: f64,
    pub scale_by_m: bool,
}

impl Default for KrrConfig {
    fn default() -> Self {
        Self {
            sigma: 100.0,
            gamma: 1e-4,
            scale_by_m: true,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn admissibility(&self) -> Admissibility {
        Admissibility {
            kappa_max: self.diffusion.kappa_max,
            max_weight_l1: self.diffusion.max_weight_l1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::param(
                "d",
                format!("must be at least 2, got {}", self.d),
            ));
        }
        if self.m < 1 {
            return Err(Error::param("m", "must be at least 1"));
        }
        if !(self.train_percent > 0.0 && self.train_percent < 100.0) {
            return Err(Error::param(
                "train_percent",
                format!("must lie in (0, 100), got {}", self.train_percent),
            ));
        }
        if self.trials < 1 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.seed.checked_add(self.trials as u64 - 1).is_none() {
            return Err(Error::param("seed", "seed + trials overflows"));
        }
        if self.smoothing.enabled && !(self.smoothing.cutoff > 0.0 && self.smoothing.cutoff < 1.0) {
            return Err(Error::param(
                "smoothing.cutoff",
                format!("must lie in (0, 1), got {}", self.smoothing.cutoff),
            ));
        }
        if !(self.gap.slack >= 0.0 && self.gap.slack < 1.0) {
            return Err(Error::param(
                "gap.slack",
                format!("must lie in [0, 1), got {}", self.gap.slack),
            ));
        }
        positive("legendre.kappa_max", self.legendre.kappa_max)?;
        positive("diffusion.kappa_max", self.diffusion.kappa_max)?;
        if !(self.diffusion.max_weight_l1 >= 1.0) {
            return Err(Error::param(
                "diffusion.max_weight_l1",
                format!("must be at least 1, got {}", self.diffusion.max_weight_l1),
            ));
        }
        if let Some(eps) = self.diffusion.epsilon {
            positive("diffusion.epsilon", eps)?;
        }
        if self.diffusion.k_max < 1 {
            return Err(Error::param("diffusion.k_max", "must be at least 1"));
        }
        if let Some(f) = self.rate.denominator_factor {
            positive("rate.denominator_factor", f)?;
        }
        positive("krr.sigma", self.krr.sigma)?;
        positive("krr.gamma", self.krr.gamma)?;
        Ok(())
    }
}
