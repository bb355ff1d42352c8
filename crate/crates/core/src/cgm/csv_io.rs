use std::collections::HashMap;
use std::fmt::Write as _;

use super::{CgmSeries, MAX_GLUCOSE_MGDL};
use crate::error::{Error, Result};

const HEADER: [&str; 3] = ["patient_id", "minutes", "glucose_mgdl"];

/// A row dropped during import, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct CsvImport {
    pub series: Vec<CgmSeries>,
    pub rejected: Vec<RejectedRow>,
}

/// Parses `patient_id,minutes,glucose_mgdl` CSV into one series per patient.
///
/// Rejected rows (duplicate patient/time pairs) are logged and dropped; use
/// [`parse_cgm_csv_detailed`] to inspect them.
pub fn parse_cgm_csv(bytes: &[u8]) -> Result<Vec<CgmSeries>> {
    let import = parse_cgm_csv_detailed(bytes)?;
    for row in &import.rejected {
        log::warn!("rejected CSV row, line {}: {}", row.line, row.reason);
    }
    Ok(import.series)
}

pub fn parse_cgm_csv_detailed(bytes: &[u8]) -> Result<CsvImport> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(CsvImport::default());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if headers.iter().ne(HEADER) {
        return Err(Error::Csv(format!(
            "expected header `{}`, found `{}`",
            HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    // Patients keep their order of first appearance.
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64, u64)>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::CsvRow {
                line,
                message: format!("malformed row ({e})"),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: &str| Error::CsvRow {
            line,
            message: message.to_string(),
        };
        if record.len() != 3 {
            return Err(row_err("expected 3 fields"));
        }
        let patient = record[0].to_string();
        if patient.is_empty() {
            return Err(row_err("empty patient_id"));
        }
        let minutes: f64 = record[1]
            .parse()
            .map_err(|_| row_err("non-numeric minutes"))?;
        if !minutes.is_finite() {
            return Err(row_err("non-finite minutes"));
        }
        let glucose: f64 = record[2]
            .parse()
            .map_err(|_| row_err("non-numeric glucose"))?;
        if !glucose.is_finite() {
            return Err(row_err("non-finite glucose"));
        }
        if glucose < 0.0 {
            return Err(row_err("negative glucose"));
        }
        if glucose > MAX_GLUCOSE_MGDL {
            return Err(row_err("glucose above sanity bound"));
        }
        if !rows.contains_key(&patient) {
            order.push(patient.clone());
        }
        rows.entry(patient)
            .or_default()
            .push((minutes, glucose, line));
    }

    let mut import = CsvImport::default();
    for patient in order {
        let mut points = rows.remove(&patient).unwrap_or_default();
        // Stable sort keeps the first occurrence of a duplicated time first.
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut times = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len());
        let mut last: Option<f64> = None;
        for (t, v, line) in points {
            if last == Some(t) {
                import.rejected.push(RejectedRow {
                    line,
                    reason: format!("duplicate time {t} for patient `{patient}`"),
                });
                continue;
            }
            last = Some(t);
            times.push(t);
            values.push(v);
        }
        let origin = times[0];
        times.iter_mut().for_each(|t| *t -= origin);
        import.series.push(CgmSeries::new(patient, times, values)?);
    }
    import.rejected.sort_by_key(|r| r.line);
    Ok(import)
}

/// Serializes series back into the ingestion format.
pub fn write_cgm_csv(series: &[CgmSeries]) -> String {
    let mut out = String::from("patient_id,minutes,glucose_mgdl\n");
    for s in series {
        for (t, v) in s.times().iter().zip(s.values()) {
            let _ = writeln!(out, "{},{},{}", s.patient_id(), t, v);
        }
    }
    out
}
