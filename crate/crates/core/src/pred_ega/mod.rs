//! Prediction error-grid analysis.
//!
//! Each prediction is placed in a point zone (value vs reference) and a rate
//! zone (rate of change vs reference rate), and the pair is mapped to a
//! [`Verdict`] by a per-range combination matrix. All boundaries live in
//! [`ZoneTables`], loaded from JSON; the defaults ship in
//! `default_zones.json`.

mod tables;

pub use tables::{PointZoneParams, RateZoneParams, ZoneTables, DEFAULT_ZONES_JSON};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlycemicRange {
    Hypo,
    Eu,
    Hyper,
}

impl GlycemicRange {
    pub const ALL: [GlycemicRange; 3] =
        [GlycemicRange::Hypo, GlycemicRange::Eu, GlycemicRange::Hyper];

    pub fn as_str(self) -> &'static str {
        match self {
            GlycemicRange::Hypo => "hypo",
            GlycemicRange::Eu => "eu",
            GlycemicRange::Hyper => "hyper",
        }
    }
}

/// Range of a reference reading with the standard 70/180 mg/dL bounds:
/// hypo `≤ 70`, eu `(70, 180]`, hyper `> 180`.
pub fn glycemic_range(reference: f64) -> GlycemicRange {
    classify_range(reference, 70.0, 180.0)
}

pub(crate) fn classify_range(value: f64, hypo_max: f64, hyper_min: f64) -> GlycemicRange {
    if value <= hypo_max {
        GlycemicRange::Hypo
    } else if value <= hyper_min {
        GlycemicRange::Eu
    } else {
        GlycemicRange::Hyper
    }
}

/// Error-grid zone, A (best) through E (worst).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
    D,
    E,
}

impl Zone {
    pub const ALL: [Zone; 5] = [Zone::A, Zone::B, Zone::C, Zone::D, Zone::E];

    fn index(self) -> usize {
        self as usize
    }
}

/// Ordered `Error < Benign < Accurate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Error,
    Benign,
    Accurate,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Accurate, Verdict::Benign, Verdict::Error];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accurate => "accurate",
            Verdict::Benign => "benign",
            Verdict::Error => "error",
        }
    }
}

/// Predicted and reference rates at one index; undefined at sequence ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub predicted_rate: f64,
    pub reference_rate: f64,
    pub defined: bool,
}

/// `(v_{j+1} − v_{j−1}) / (factor·(t_{j+1} − t_{j−1}))`, or `None` at the
/// first and last index.
pub fn central_rate(
    values: &[f64],
    times: &[f64],
    j: usize,
    denominator_factor: f64,
) -> Option<f64> {
    if j == 0 || j + 1 >= values.len() || j + 1 >= times.len() {
        return None;
    }
    Some((values[j + 1] - values[j - 1]) / (denominator_factor * (times[j + 1] - times[j - 1])))
}

pub fn rate_pair(
    predicted: &[f64],
    reference: &[f64],
    times: &[f64],
    j: usize,
    denominator_factor: f64,
) -> RatePair {
    match (
        central_rate(predicted, times, j, denominator_factor),
        central_rate(reference, times, j, denominator_factor),
    ) {
        (Some(p), Some(r)) => RatePair {
            predicted_rate: p,
            reference_rate: r,
            defined: true,
        },
        _ => RatePair {
            predicted_rate: f64::NAN,
            reference_rate: f64::NAN,
            defined: false,
        },
    }
}

pub fn classify_point(predicted: f64, reference: f64, tables: &ZoneTables) -> Zone {
    let p = &tables.point_zones;
    let hypo = |v: f64| v <= p.hypo_max;
    let hyper = |v: f64| v > p.hyper_min;

    if (predicted - reference).abs() <= p.accurate_relative * reference
        || (hypo(reference) && hypo(predicted))
    {
        Zone::A
    } else if (hypo(reference) && hyper(predicted)) || (hyper(reference) && hypo(predicted)) {
        Zone::E
    } else if (hypo(reference) && predicted > p.hypo_max + p.overshoot_band)
        || (hyper(reference) && predicted < p.hyper_min - p.overshoot_band)
    {
        Zone::C
    } else if !hypo(reference)
        && !hyper(reference)
        && (predicted < p.hypo_max || predicted > p.hyper_min)
    {
        Zone::D
    } else {
        Zone::B
    }
}

pub fn classify_rate(predicted_rate: f64, reference_rate: f64, tables: &ZoneTables) -> Zone {
    let r = &tables.rate_zones;
    let diff = (predicted_rate - reference_rate).abs();
    let significant = |v: f64| v.abs() > r.significant;
    if diff <= r.accurate_abs {
        Zone::A
    } else if diff <= r.benign_abs {
        Zone::B
    } else if predicted_rate.signum() == -reference_rate.signum()
        && significant(predicted_rate)
        && significant(reference_rate)
    {
        Zone::E
    } else if significant(reference_rate)
        && predicted_rate.abs() <= r.significant * (1.0 - r.missed_band)
    {
        Zone::D
    } else {
        Zone::C
    }
}

pub fn combine(point: Zone, rate: Zone, range: GlycemicRange, tables: &ZoneTables) -> Verdict {
    tables.matrix(range)[point.index()][rate.index()]
}

/// Verdict from the point zone alone, used where no rate is defined.
pub fn endpoint_verdict(point: Zone) -> Verdict {
    match point {
        Zone::A | Zone::B => Verdict::Accurate,
        Zone::C => Verdict::Benign,
        Zone::D | Zone::E => Verdict::Error,
    }
}

/// Range (by reference value) and verdict of one prediction.
pub fn assess(
    predicted: f64,
    reference: f64,
    rates: Option<(f64, f64)>,
    tables: &ZoneTables,
) -> (GlycemicRange, Verdict) {
    let range = tables.range_of(reference);
    let point = classify_point(predicted, reference, tables);
    let verdict = match rates {
        Some((p, r)) => combine(point, classify_rate(p, r, tables), range, tables),
        None => endpoint_verdict(point),
    };
    (range, verdict)
}

/// Verdict counts for one glycemic range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub accurate: u64,
    pub benign: u64,
    pub error: u64,
}

impl VerdictCounts {
    pub fn total(&self) -> u64 {
        self.accurate + self.benign + self.error
    }

    pub fn get(&self, verdict: Verdict) -> u64 {
        match verdict {
            Verdict::Accurate => self.accurate,
            Verdict::Benign => self.benign,
            Verdict::Error => self.error,
        }
    }

    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Accurate => self.accurate += 1,
            Verdict::Benign => self.benign += 1,
            Verdict::Error => self.error += 1,
        }
    }

    /// `(accurate, benign, error)` in percent; all zero for an empty range.
    pub fn percentages(&self) -> [f64; 3] {
        let total = self.total();
        if total == 0 {
            return [0.0; 3];
        }
        let pct = |c: u64| 100.0 * c as f64 / total as f64;
        [pct(self.accurate), pct(self.benign), pct(self.error)]
    }

    pub fn percent(&self, verdict: Verdict) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.get(verdict) as f64 / total as f64
        }
    }

    fn merge(&mut self, other: &VerdictCounts) {
        self.accurate += other.accurate;
        self.benign += other.benign;
        self.error += other.error;
    }
}

/// Stratified PRED-EGA counts; percentages are derived from the counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredEgaReport {
    pub hypo: VerdictCounts,
    pub eu: VerdictCounts,
    pub hyper: VerdictCounts,
}

impl PredEgaReport {
    pub fn range(&self, range: GlycemicRange) -> &VerdictCounts {
        match range {
            GlycemicRange::Hypo => &self.hypo,
            GlycemicRange::Eu => &self.eu,
            GlycemicRange::Hyper => &self.hyper,
        }
    }

    pub fn range_mut(&mut self, range: GlycemicRange) -> &mut VerdictCounts {
        match range {
            GlycemicRange::Hypo => &mut self.hypo,
            GlycemicRange::Eu => &mut self.eu,
            GlycemicRange::Hyper => &mut self.hyper,
        }
    }

    pub fn record(&mut self, range: GlycemicRange, verdict: Verdict) {
        self.range_mut(range).record(verdict);
    }

    pub fn merge(&mut self, other: &PredEgaReport) {
        for range in GlycemicRange::ALL {
            self.range_mut(range).merge(other.range(range));
        }
    }

    pub fn total(&self) -> u64 {
        GlycemicRange::ALL
            .iter()
            .map(|r| self.range(*r).total())
            .sum()
    }

    /// Counts pooled over several reports.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a PredEgaReport>) -> PredEgaReport {
        let mut out = PredEgaReport::default();
        for r in reports {
            out.merge(r);
        }
        out
    }
}

/// Scores one contiguous sequence of predictions against references.
///
/// Interior indices combine point and rate zones; the first and last index
/// have no central rate and are scored on the point zone alone.
pub fn score_sequence(
    predicted: &[f64],
    reference: &[f64],
    times: &[f64],
    tables: &ZoneTables,
) -> Result<PredEgaReport> {
    let n = reference.len();
    if predicted.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: predicted.len(),
        });
    }
    if times.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: times.len(),
        });
    }
    let mut report = PredEgaReport::default();
    for j in 0..n {
        let rates = rate_pair(
            predicted,
            reference,
            times,
            j,
            tables.rate_denominator_factor,
        );
        let rates = rates
            .defined
            .then_some((rates.predicted_rate, rates.reference_rate));
        let (range, verdict) = assess(predicted[j], reference[j], rates, tables);
        report.record(range, verdict);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t() -> ZoneTables {
        ZoneTables::default()
    }

    #[test]
    fn central_rate_as_printed() {
        let v = [100.0, 110.0, 120.0];
        let times = [0.0, 5.0, 10.0];
        assert_eq!(central_rate(&v, &times, 1, 2.0), Some(1.0));
        assert_eq!(central_rate(&v, &times, 1, 1.0), Some(2.0));
        assert_eq!(central_rate(&[5.0; 3], &times, 1, 2.0), Some(0.0));
        assert_eq!(central_rate(&v, &times, 0, 2.0), None);
        assert_eq!(central_rate(&v, &times, 2, 2.0), None);
        assert!(!rate_pair(&v, &v, &times, 0, 2.0).defined);
    }

    #[test]
    fn range_boundaries() {
        assert_eq!(glycemic_range(70.0), GlycemicRange::Hypo);
        assert_eq!(glycemic_range(100.0), GlycemicRange::Eu);
        assert_eq!(glycemic_range(180.0), GlycemicRange::Eu);
        assert_eq!(glycemic_range(181.0), GlycemicRange::Hyper);
        assert_eq!(glycemic_range(0.0), GlycemicRange::Hypo);
    }

    #[test]
    fn point_zones() {
        let t = t();
        assert_eq!(classify_point(100.0, 100.0, &t), Zone::A);
        assert_eq!(classify_point(60.0, 60.0, &t), Zone::A);
        assert_eq!(classify_point(40.0, 65.0, &t), Zone::A);
        assert_eq!(classify_point(119.0, 100.0, &t), Zone::A);
        assert_eq!(classify_point(200.0, 60.0, &t), Zone::E);
        assert_eq!(classify_point(60.0, 250.0, &t), Zone::E);
        assert_eq!(classify_point(120.0, 60.0, &t), Zone::C);
        assert_eq!(classify_point(150.0, 250.0, &t), Zone::C);
        assert_eq!(classify_point(60.0, 100.0, &t), Zone::D);
        assert_eq!(classify_point(220.0, 150.0, &t), Zone::D);
        assert_eq!(classify_point(75.0, 60.0, &t), Zone::B);
        assert_eq!(classify_point(175.0, 250.0, &t), Zone::B);
        assert_eq!(classify_point(140.0, 110.0, &t), Zone::B);
    }

    #[test]
    fn rate_zones() {
        let t = t();
        assert_eq!(classify_rate(1.3, 1.3, &t), Zone::A);
        assert_eq!(classify_rate(0.0, 0.5, &t), Zone::A);
        assert_eq!(classify_rate(1.0, -0.5, &t), Zone::B);
        assert_eq!(classify_rate(-2.0, 2.0, &t), Zone::E);
        assert_eq!(classify_rate(0.2, 3.0, &t), Zone::D);
        assert_eq!(classify_rate(3.0, 0.2, &t), Zone::C);
    }

    #[test]
    fn combination_defaults() {
        let t = t();
        assert_eq!(
            combine(Zone::A, Zone::A, GlycemicRange::Eu, &t),
            Verdict::Accurate
        );
        assert_eq!(
            combine(Zone::A, Zone::E, GlycemicRange::Hypo, &t),
            Verdict::Error
        );
        assert_eq!(
            combine(Zone::B, Zone::C, GlycemicRange::Eu, &t),
            Verdict::Benign
        );
        assert_eq!(
            combine(Zone::C, Zone::A, GlycemicRange::Hypo, &t),
            Verdict::Error
        );
        assert_eq!(
            combine(Zone::C, Zone::A, GlycemicRange::Eu, &t),
            Verdict::Benign
        );
        assert_eq!(
            combine(Zone::D, Zone::A, GlycemicRange::Hyper, &t),
            Verdict::Error
        );
    }

    #[test]
    fn default_matrix_follows_its_rule() {
        let t = t();
        for range in GlycemicRange::ALL {
            for point in Zone::ALL {
                for rate in Zone::ALL {
                    let expected = if matches!(rate, Zone::D | Zone::E)
                        || matches!(point, Zone::D | Zone::E)
                        || (range == GlycemicRange::Hypo && point == Zone::C)
                    {
                        Verdict::Error
                    } else if matches!(point, Zone::A | Zone::B)
                        && matches!(rate, Zone::A | Zone::B)
                    {
                        Verdict::Accurate
                    } else {
                        Verdict::Benign
                    };
                    assert_eq!(
                        combine(point, rate, range, &t),
                        expected,
                        "{range:?} {point:?} {rate:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn verdict_order() {
        assert!(Verdict::Accurate > Verdict::Benign && Verdict::Benign > Verdict::Error);
    }

    #[test]
    fn perfect_prediction_is_all_accurate() {
        let r: Vec<f64> = (0..50)
            .map(|i| 120.0 + 90.0 * (i as f64 / 6.0).sin())
            .collect();
        let times: Vec<f64> = (0..50).map(|i| 5.0 * i as f64).collect();
        let report = score_sequence(&r, &r, &times, &t()).unwrap();
        for range in GlycemicRange::ALL {
            let c = report.range(range);
            assert_eq!(c.benign + c.error, 0);
        }
        assert_eq!(report.total(), 50);
    }

    #[test]
    fn percentages_from_counts() {
        let mut report = PredEgaReport::default();
        report.record(GlycemicRange::Hypo, Verdict::Accurate);
        report.record(GlycemicRange::Hypo, Verdict::Accurate);
        report.record(GlycemicRange::Hypo, Verdict::Error);
        let [a, b, e] = report.hypo.percentages();
        assert!((a - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(b, 0.0);
        assert!((e - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(report.eu.percentages(), [0.0; 3]);
        assert_eq!(report.eu.total(), 0);
    }

    #[test]
    fn length_mismatch() {
        assert!(score_sequence(&[1.0], &[1.0, 2.0], &[0.0, 5.0], &t()).is_err());
        assert!(score_sequence(&[1.0, 2.0], &[1.0, 2.0], &[0.0], &t()).is_err());
    }

    proptest! {
        #[test]
        fn segment_counts_add(
            a in prop::collection::vec((30.0f64..400.0, 30.0f64..400.0), 1..30),
            b in prop::collection::vec((30.0f64..400.0, 30.0f64..400.0), 1..30),
        ) {
            let t = t();
            let score = |seg: &[(f64, f64)]| {
                let p: Vec<f64> = seg.iter().map(|x| x.0).collect();
                let r: Vec<f64> = seg.iter().map(|x| x.1).collect();
                let times: Vec<f64> = (0..seg.len()).map(|i| 5.0 * i as f64).collect();
                score_sequence(&p, &r, &times, &t).unwrap()
            };
            let mut combined = score(&a);
            combined.merge(&score(&b));
            prop_assert_eq!(combined.total() as usize, a.len() + b.len());
            let pooled = PredEgaReport::pooled([&score(&a), &score(&b)]);
            prop_assert_eq!(combined, pooled);
        }

        #[test]
        fn scaling_values_and_thresholds_preserves_verdicts(
            p in prop::collection::vec(30.0f64..400.0, 3..20),
            r in prop::collection::vec(30.0f64..400.0, 20),
            c in 0.1f64..10.0,
        ) {
            let r = &r[..p.len()];
            let times: Vec<f64> = (0..p.len()).map(|i| 5.0 * i as f64).collect();
            let t = t();
            let scaled = t.scaled(c);
            let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let sr: Vec<f64> = r.iter().map(|v| v * c).collect();
            for j in 0..p.len() {
                let rates = |pp: &[f64], rr: &[f64], tt: &ZoneTables| {
                    let rp = rate_pair(pp, rr, &times, j, tt.rate_denominator_factor);
                    rp.defined.then_some((rp.predicted_rate, rp.reference_rate))
                };
                let base = assess(p[j], r[j], rates(&p, r, &t), &t);
                let other = assess(sp[j], sr[j], rates(&sp, &sr, &scaled), &scaled);
                // Products like 0.2·ref and boundary comparisons can flip by
                // one ulp; only compare away from the boundaries.
                let near = |x: f64, b: f64| (x - b).abs() < 1e-9 * (1.0 + b.abs());
                let pz = &t.point_zones;
                let touchy = [pz.hypo_max, pz.hyper_min, pz.hypo_max + pz.overshoot_band, pz.hyper_min - pz.overshoot_band]
                    .iter()
                    .any(|&b| near(p[j], b) || near(r[j], b))
                    || near((p[j] - r[j]).abs(), pz.accurate_relative * r[j]);
                if !touchy {
                    prop_assert_eq!(base.0, other.0);
                    let rp = rates(&p, r, &t);
                    let rate_touchy = rp.is_some_and(|(a, b)| {
                        let rz = &t.rate_zones;
                        [rz.accurate_abs, rz.benign_abs].iter().any(|&th| near((a - b).abs(), th))
                            || near(a.abs(), rz.significant) || near(b.abs(), rz.significant)
                    });
                    if !rate_touchy {
                        prop_assert_eq!(base.1, other.1);
                    }
                }
            }
        }
    }
}
