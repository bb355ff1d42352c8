use std::f64::consts::PI;

use super::CgmSeries;
use crate::error::{Error, Result};

/// First-order Butterworth low-pass section from the bilinear transform of
/// `1 / (s/ω_c + 1)`, with `ω_c = tan(π·cutoff/2)` and cutoff relative to
/// Nyquist.
///
/// Transfer function `H(z) = (b0 + b1·z⁻¹) / (1 + a1·z⁻¹)`, i.e.
/// `y[n] = b0·x[n] + b1·x[n−1] − a1·y[n−1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderLowPass {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
}

impl FirstOrderLowPass {
    pub fn design(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(Error::param(
                "smoothing.cutoff",
                format!("must lie in (0, 1) relative to Nyquist, got {cutoff}"),
            ));
        }
        let wc = (PI * cutoff / 2.0).tan();
        let b0 = wc / (1.0 + wc);
        Ok(Self {
            b0,
            b1: b0,
            a1: (wc - 1.0) / (1.0 + wc),
        })
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / (1.0 + self.a1)
    }

    /// Causal filtering with the state pre-charged to `input[0]`, so a
    /// constant input passes through unchanged.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let Some(&first) = input.first() else {
            return Vec::new();
        };
        let (mut x_prev, mut y_prev) = (first, first);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + self.b1 * x_prev - self.a1 * y_prev;
                x_prev = x;
                y_prev = y;
                y
            })
            .collect()
    }
}

/// Smooths a series with [`FirstOrderLowPass`]; times are unchanged.
pub fn butterworth_smooth(series: &CgmSeries, cutoff: f64) -> Result<CgmSeries> {
    let filter = FirstOrderLowPass::design(cutoff)?;
    Ok(series.with_values(filter.apply(series.values())))
}
