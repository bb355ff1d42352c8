use super::CgmSeries;
use crate::error::{Error, Result};

/// One training/evaluation pair: `d` consecutive readings (oldest first) and
/// the reading `m` steps after the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub patient_id: String,
    /// Index of the last input reading within the source segment.
    pub j: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// Time of the last input reading, minutes.
    pub t_last: f64,
}

/// Splits a series into maximal runs whose consecutive time deltas all lie in
/// `[step·(1−slack), step·(1+slack)]`.
pub fn segment_contiguous(series: &CgmSeries, nominal_step: f64, slack: f64) -> Vec<CgmSeries> {
    if series.is_empty() {
        return Vec::new();
    }
    let lo = nominal_step * (1.0 - slack);
    let hi = nominal_step * (1.0 + slack);
    let mut out = Vec::new();
    let mut start = 0;
    for (i, w) in series.times().windows(2).enumerate() {
        let delta = w[1] - w[0];
        if !(lo..=hi).contains(&delta) {
            out.push(series.slice(start..i + 1));
            start = i + 1;
        }
    }
    out.push(series.slice(start..series.len()));
    out
}

/// Windows a contiguous segment into `(x_j, y_j)` pairs with `y_j = s(t_{j+m})`.
///
/// Yields `max(0, N − d − m + 1)` windows for a segment of length `N`.
pub fn make_windows(segment: &CgmSeries, d: usize, m: usize) -> Result<Vec<SampleWindow>> {
    make_windows_with_targets(segment, segment, d, m)
}

/// Like [`make_windows`], but takes the inputs `x` from `inputs` and the
/// targets `y` from `targets`. Both must share the same time grid; this is how
/// smoothed inputs are paired with raw reference targets.
pub fn make_windows_with_targets(
    inputs: &CgmSeries,
    targets: &CgmSeries,
    d: usize,
    m: usize,
) -> Result<Vec<SampleWindow>> {
    if d < 2 {
        return Err(Error::param("d", format!("must be at least 2, got {d}")));
    }
    if m < 1 {
        return Err(Error::param("m", "must be at least 1"));
    }
    if inputs.times() != targets.times() {
        return Err(Error::Series {
            patient: inputs.patient_id().to_string(),
            reason: "input and target series are on different time grids".into(),
        });
    }
    let n = inputs.len();
    if n < d + m {
        return Ok(Vec::new());
    }
    let windows = (d - 1..n - m)
        .map(|j| SampleWindow {
            patient_id: inputs.patient_id().to_string(),
            j,
            x: inputs.values()[j + 1 - d..=j].to_vec(),
            y: targets.values()[j + m],
            t_last: inputs.times()[j],
        })
        .collect();
    Ok(windows)
}
