//! Report, per-trial CSV and comparison-table builders.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use bgdeep_core::pipeline::{DeepDiagnostics, ExperimentResult, Method, TrialResult};
use bgdeep_core::pred_ega::{GlycemicRange, PredEgaReport, Verdict, VerdictCounts};
use bgdeep_core::ExperimentConfig;
use serde::{Deserialize, Serialize};

pub const REPORT_FORMAT: &str = "bgdeep-report-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentages {
    pub accurate: f64,
    pub benign: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub counts: VerdictCounts,
    pub total: u64,
    pub percent: Percentages,
}

impl From<&VerdictCounts> for RangeSummary {
    fn from(c: &VerdictCounts) -> Self {
        let [accurate, benign, error] = c.percentages();
        Self {
            counts: *c,
            total: c.total(),
            percent: Percentages {
                accurate,
                benign,
                error,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub hypo: RangeSummary,
    pub eu: RangeSummary,
    pub hyper: RangeSummary,
}

impl From<&PredEgaReport> for ReportSummary {
    fn from(r: &PredEgaReport) -> Self {
        Self {
            hypo: (&r.hypo).into(),
            eu: (&r.eu).into(),
            hyper: (&r.hyper).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub counts: PredEgaReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deep: Option<DeepDiagnostics>,
}

impl From<&TrialResult> for TrialRecord {
    fn from(t: &TrialResult) -> Self {
        Self {
            seed: t.seed,
            train_ids: t.split.train_ids.iter().cloned().collect(),
            counts: t.report,
            deep: t.deep.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Percentages from counts pooled over all trials.
    pub pooled: ReportSummary,
    pub trials: Vec<TrialRecord>,
}

impl From<&ExperimentResult> for MethodReport {
    fn from(e: &ExperimentResult) -> Self {
        Self {
            method: e.method,
            pooled: (&e.pooled).into(),
            trials: e.trials.iter().map(TrialRecord::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub sha256: String,
    pub patients: usize,
    pub windows: usize,
    pub rejected_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonesInfo {
    /// `default` or the file name passed with `--zones`.
    pub source: String,
    pub version: Option<String>,
    pub sha256: String,
    pub rate_denominator_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub command: String,
    pub data: DataInfo,
    pub zones: ZonesInfo,
    pub config: ExperimentConfig,
    /// `all` or `test_only`.
    pub population: String,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodReport>,
}

impl RunReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One row per method × trial × range × verdict.
pub fn trials_csv(results: &[&ExperimentResult]) -> String {
    let mut out = String::from("method,seed,range,verdict,count,range_total,percent\n");
    for e in results {
        for t in &e.trials {
            for range in GlycemicRange::ALL {
                let c = t.report.range(range);
                for verdict in Verdict::ALL {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        e.method.as_str(),
                        t.seed,
                        range.as_str(),
                        verdict.as_str(),
                        c.get(verdict),
                        c.total(),
                        c.percent(verdict)
                    );
                }
            }
        }
    }
    out
}

/// Pooled counts per method rebuilt from [`trials_csv`] output.
pub fn pool_trials_csv(text: &str) -> Result<BTreeMap<String, PredEgaReport>, String> {
    let mut out: BTreeMap<String, PredEgaReport> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |k: usize| {
            rec.get(k)
                .ok_or_else(|| format!("row {}: missing field {k}", i + 2))
        };
        let range = match field(2)? {
            "hypo" => GlycemicRange::Hypo,
            "eu" => GlycemicRange::Eu,
            "hyper" => GlycemicRange::Hyper,
            other => return Err(format!("row {}: unknown range {other}", i + 2)),
        };
        let count: u64 = field(4)?
            .parse()
            .map_err(|e| format!("row {}: {e}", i + 2))?;
        let report = out.entry(field(0)?.to_string()).or_default();
        let counts = report.range_mut(range);
        match field(3)? {
            "accurate" => counts.accurate += count,
            "benign" => counts.benign += count,
            "error" => counts.error += count,
            other => return Err(format!("row {}: unknown verdict {other}", i + 2)),
        }
    }
    Ok(out)
}

pub const TABLE_COLUMNS: [&str; 9] = [
    "hypo_acc",
    "hypo_benign",
    "hypo_error",
    "eu_acc",
    "eu_benign",
    "eu_error",
    "hyper_acc",
    "hyper_benign",
    "hyper_error",
];

/// Rows of pooled percentages in range-major, verdict-minor order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub rows: Vec<(String, [f64; 9])>,
}

impl CompareTable {
    pub fn new(results: &[&ExperimentResult]) -> Self {
        let rows = results
            .iter()
            .map(|e| {
                let mut cells = [0.0; 9];
                for (r, range) in GlycemicRange::ALL.iter().enumerate() {
                    let p = e.pooled.range(*range).percentages();
                    cells[3 * r..3 * r + 3].copy_from_slice(&p);
                }
                (e.method.as_str().to_string(), cells)
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{}\n", TABLE_COLUMNS.join(","));
        for (label, cells) in &self.rows {
            let cells: Vec<String> = cells.iter().map(|c| format!("{c:.2}")).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<10} {:>24} {:>24} {:>24}\n{:<10}",
            "", "hypoglycemia", "euglycemia", "hyperglycemia", "method"
        );
        for _ in 0..3 {
            out.push_str(&format!(" {:>7} {:>7} {:>8}", "Acc.", "Benign", "Error"));
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(&format!("{label:<10}"));
            for chunk in cells.chunks(3) {
                out.push_str(&format!(
                    " {:>7.2} {:>7.2} {:>8.2}",
                    chunk[0], chunk[1], chunk[2]
                ));
            }
            out.push('\n');
        }
        out
    }
}
