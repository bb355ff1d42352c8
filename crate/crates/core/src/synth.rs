//! Synthetic CGM traces: a 120 mg/dL baseline with smooth meal excursions
//! into the hyperglycemic range and dips into the hypoglycemic range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cgm::{write_cgm_csv, CgmSeries, NOMINAL_STEP_MINUTES};
use crate::error::{Error, Result};

pub const BASELINE_MGDL: f64 = 120.0;
pub const CLIP_RANGE: (f64, f64) = (40.0, 450.0);
pub const NOISY_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthProfile {
    #[default]
    Noiseless,
    /// Gaussian sensor noise with standard deviation [`NOISY_SIGMA`].
    Noisy,
}

impl SynthProfile {
    pub fn noise_sigma(self) -> f64 {
        match self {
            SynthProfile::Noiseless => 0.0,
            SynthProfile::Noisy => NOISY_SIGMA,
        }
    }
}

impl std::str::FromStr for SynthProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(SynthProfile::Noiseless),
            "noisy" => Ok(SynthProfile::Noisy),
            other => Err(Error::param(
                "profile",
                format!("expected `noiseless` or `noisy`, got `{other}`"),
            )),
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smooth bump: logistic rise at `onset`, logistic decay after `plateau`.
#[derive(Debug, Clone, Copy)]
struct Excursion {
    onset: f64,
    plateau: f64,
    rise: f64,
    decay: f64,
    amplitude: f64,
}

impl Excursion {
    fn shape(&self, t: f64) -> f64 {
        logistic((t - self.onset) / self.rise)
            * (1.0 - logistic((t - self.onset - self.plateau) / self.decay))
    }

    /// Scales the amplitude so the bump's extreme equals `delta`.
    fn with_peak(mut self, delta: f64) -> Self {
        let lo = self.onset - 10.0 * self.rise;
        let hi = self.onset + self.plateau + 10.0 * self.decay;
        let peak = (0..=2000)
            .map(|i| self.shape(lo + (hi - lo) * i as f64 / 2000.0))
            .fold(0.0, f64::max);
        self.amplitude = delta / peak;
        self
    }

    fn eval(&self, t: f64) -> f64 {
        self.amplitude * self.shape(t)
    }

    fn end(&self) -> f64 {
        self.onset + self.plateau + 6.0 * self.decay
    }
}

fn patient_trace(rng: &mut ChaCha8Rng, n_points: usize) -> Vec<f64> {
    let horizon = n_points as f64 * NOMINAL_STEP_MINUTES;
    let mut events = Vec::new();
    let mut meal = rng.random_bool(0.5);
    let mut t = rng.random_range(-60.0..90.0);
    while t < horizon {
        let e = if meal {
            let peak = rng.random_range(180.0..300.0);
            Excursion {
                onset: t,
                plateau: rng.random_range(30.0..90.0),
                rise: rng.random_range(8.0..15.0),
                decay: rng.random_range(20.0..35.0),
                amplitude: 0.0,
            }
            .with_peak(peak - BASELINE_MGDL)
        } else {
            let trough = rng.random_range(50.0..70.0);
            Excursion {
                onset: t,
                plateau: rng.random_range(40.0..100.0),
                rise: rng.random_range(10.0..20.0),
                decay: rng.random_range(15.0..30.0),
                amplitude: 0.0,
            }
            .with_peak(trough - BASELINE_MGDL)
        };
        t = e.end() + rng.random_range(20.0..60.0);
        events.push(e);
        meal = !meal;
    }
    (0..n_points)
        .map(|i| {
            let t = i as f64 * NOMINAL_STEP_MINUTES;
            BASELINE_MGDL + events.iter().map(|e| e.eval(t)).sum::<f64>()
        })
        .collect()
}

/// `n_patients` series of `n_points` readings on the 5-minute grid, ids
/// `p01`, `p02`, …; deterministic per seed.
pub fn synth_series(
    n_patients: usize,
    n_points: usize,
    seed: u64,
    profile: SynthProfile,
) -> Result<Vec<CgmSeries>> {
    if n_patients == 0 {
        return Err(Error::param("patients", "must be at least 1"));
    }
    if n_points < 2 {
        return Err(Error::param("points", "must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, profile.noise_sigma().max(f64::MIN_POSITIVE))
        .map_err(|e| Error::param("profile", e.to_string()))?;
    let width = n_patients.to_string().len().max(2);
    (0..n_patients)
        .map(|p| {
            let mut values = patient_trace(&mut rng, n_points);
            if profile.noise_sigma() > 0.0 {
                for v in &mut values {
                    *v += noise.sample(&mut rng);
                }
            }
            for v in &mut values {
                *v = v.clamp(CLIP_RANGE.0, CLIP_RANGE.1);
            }
            let times = (0..n_points)
                .map(|i| i as f64 * NOMINAL_STEP_MINUTES)
                .collect();
            CgmSeries::new(format!("p{:0width$}", p + 1), times, values)
        })
        .collect()
}

/// CSV form of [`synth_series`].
pub fn synth_generate(
    n_patients: usize,
    n_points: usize,
    seed: u64,
    profile: SynthProfile,
) -> Result<Vec<u8>> {
    Ok(write_cgm_csv(&synth_series(n_patients, n_points, seed, profile)?).into_bytes())
}
