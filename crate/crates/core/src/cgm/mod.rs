//! CGM time series ingestion and preparation.
//!
//! A [`CgmSeries`] holds one patient's readings on a (nominally) 5-minute
//! grid. Series are split at sampling gaps into contiguous segments, turned
//! into `(x_j, y_j)` [`SampleWindow`]s, optionally low-pass filtered, and
//! patients are split into training and evaluation populations.

mod csv_io;
mod filter;
mod split;
mod window;

pub use csv_io::{parse_cgm_csv, parse_cgm_csv_detailed, write_cgm_csv, CsvImport, RejectedRow};
pub use filter::{butterworth_smooth, FirstOrderLowPass};
pub use split::{split_patients, train_count, PatientSplit};
pub use window::{make_windows, make_windows_with_targets, segment_contiguous, SampleWindow};

use crate::error::{Error, Result};

/// Nominal CGM sampling step in minutes.
pub const NOMINAL_STEP_MINUTES: f64 = 5.0;

/// Readings above this are treated as ingestion errors.
pub const MAX_GLUCOSE_MGDL: f64 = 1000.0;

/// One patient's timestamped blood glucose readings.
#[derive(Debug, Clone, PartialEq)]
pub struct CgmSeries {
    patient_id: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CgmSeries {
    /// Builds a series, checking that times strictly increase and that every
    /// value is a finite reading in `[0, 1000]` mg/dL.
    pub fn new(patient_id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let patient_id = patient_id.into();
        let invalid = |reason: String| Error::Series {
            patient: patient_id.clone(),
            reason,
        };
        if times.len() != values.len() {
            return Err(invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(invalid(format!("non-finite time at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "times not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > MAX_GLUCOSE_MGDL)
        {
            return Err(invalid(format!(
                "reading {} at index {i} outside [0, {MAX_GLUCOSE_MGDL}]",
                values[i]
            )));
        }
        Ok(Self {
            patient_id,
            times,
            values,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same patient and time grid, new readings. Values are not re-validated
    /// against the sanity bound since filtered output of valid input stays
    /// within the input's range.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.times.len());
        Self {
            patient_id: self.patient_id.clone(),
            times: self.times.clone(),
            values,
        }
    }

    pub(crate) fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            patient_id: self.patient_id.clone(),
            times: self.times[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }
}
