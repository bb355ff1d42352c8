use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{classify_range, GlycemicRange, Verdict};
use crate::error::{Error, Result};

/// Shipped default zone tables.
pub const DEFAULT_ZONES_JSON: &str = include_str!("default_zones.json");

/// Value boundaries in mg/dL, except `accurate_relative` (a fraction of the
/// reference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointZoneParams {
    pub hypo_max: f64,
    pub hyper_min: f64,
    pub accurate_relative: f64,
    pub overshoot_band: f64,
}

/// Rate boundaries in mg/dL/min, except `missed_band` (a fraction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateZoneParams {
    pub accurate_abs: f64,
    pub benign_abs: f64,
    pub significant: f64,
    pub missed_band: f64,
}

fn default_rate_factor() -> f64 {
    2.0
}

#[derive(Deserialize)]
struct RawTables {
    #[serde(default)]
    version: Option<String>,
    point_zones: PointZoneParams,
    rate_zones: RateZoneParams,
    #[serde(default = "default_rate_factor")]
    rate_denominator_factor: f64,
    combination: BTreeMap<String, Vec<Vec<Verdict>>>,
}

type Matrix = [[Verdict; 5]; 5];

/// Zone boundaries and per-range combination matrices (rows: point zone A..E,
/// columns: rate zone A..E).
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTables {
    pub version: Option<String>,
    pub point_zones: PointZoneParams,
    pub rate_zones: RateZoneParams,
    pub rate_denominator_factor: f64,
    combination: [Matrix; 3],
}

impl Default for ZoneTables {
    fn default() -> Self {
        ZoneTables::from_json(DEFAULT_ZONES_JSON).expect("shipped zone tables are valid")
    }
}

impl ZoneTables {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTables =
            serde_json::from_str(text).map_err(|e| Error::ZoneTables(e.to_string()))?;
        let p = raw.point_zones;
        let r = raw.rate_zones;
        let positive = [
            ("point_zones.hypo_max", p.hypo_max),
            ("point_zones.hyper_min", p.hyper_min),
            ("rate_zones.accurate_abs", r.accurate_abs),
            ("rate_zones.benign_abs", r.benign_abs),
            ("rate_zones.significant", r.significant),
            ("rate_denominator_factor", raw.rate_denominator_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ZoneTables(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let nonneg = [
            ("point_zones.accurate_relative", p.accurate_relative),
            ("point_zones.overshoot_band", p.overshoot_band),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::ZoneTables(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if p.hypo_max >= p.hyper_min {
            return Err(Error::ZoneTables("hypo_max must be below hyper_min".into()));
        }
        if r.benign_abs < r.accurate_abs {
            return Err(Error::ZoneTables(
                "benign_abs must be at least accurate_abs".into(),
            ));
        }
        if !(0.0..1.0).contains(&r.missed_band) {
            return Err(Error::ZoneTables("missed_band must lie in [0, 1)".into()));
        }
        if let Some(extra) = raw
            .combination
            .keys()
            .find(|k| !GlycemicRange::ALL.iter().any(|g| g.as_str() == k.as_str()))
        {
            return Err(Error::ZoneTables(format!(
                "unknown range {extra:?} in combination"
            )));
        }
        let mut combination = [[[Verdict::Error; 5]; 5]; 3];
        for (slot, range) in combination.iter_mut().zip(GlycemicRange::ALL) {
            let rows = raw.combination.get(range.as_str()).ok_or_else(|| {
                Error::ZoneTables(format!("combination matrix for {} missing", range.as_str()))
            })?;
            if rows.len() != 5 || rows.iter().any(|row| row.len() != 5) {
                return Err(Error::ZoneTables(format!(
                    "combination matrix for {} must be 5x5",
                    range.as_str()
                )));
            }
            for (i, row) in rows.iter().enumerate() {
                slot[i].copy_from_slice(row);
            }
        }
        Ok(ZoneTables {
            version: raw.version,
            point_zones: p,
            rate_zones: r,
            rate_denominator_factor: raw.rate_denominator_factor,
            combination,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ZoneTables(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn matrix(&self, range: GlycemicRange) -> &Matrix {
        &self.combination[range as usize]
    }

    pub fn range_of(&self, reference: f64) -> GlycemicRange {
        classify_range(
            reference,
            self.point_zones.hypo_max,
            self.point_zones.hyper_min,
        )
    }

    pub fn with_rate_denominator_factor(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::param(
                "rate.denominator_factor",
                format!("must be positive, got {factor}"),
            ));
        }
        self.rate_denominator_factor = factor;
        Ok(self)
    }

    /// Tables for values measured in units `c` times smaller: absolute
    /// boundaries scale by `c`, relative ones are unchanged.
    pub fn scaled(&self, c: f64) -> ZoneTables {
        let mut out = self.clone();
        let p = &mut out.point_zones;
        p.hypo_max *= c;
        p.hyper_min *= c;
        p.overshoot_band *= c;
        let r = &mut out.rate_zones;
        r.accurate_abs *= c;
        r.benign_abs *= c;
        r.significant *= c;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load() {
        let t = ZoneTables::default();
        assert_eq!(t.version.as_deref(), Some("bgdeep-pred-ega-1"));
        assert_eq!(t.point_zones.hypo_max, 70.0);
        assert_eq!(t.rate_denominator_factor, 2.0);
    }

    #[test]
    fn rejects_incomplete_matrix() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_ZONES_JSON).unwrap();
        v["combination"]["eu"][2].as_array_mut().unwrap().pop();
        let err = ZoneTables::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("5x5"));

        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_ZONES_JSON).unwrap();
        v["combination"].as_object_mut().unwrap().remove("hyper");
        assert!(ZoneTables::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_ZONES_JSON).unwrap();
        v["combination"]["hypo"][0][0] = "fine".into();
        assert!(ZoneTables::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_bad_boundaries() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_ZONES_JSON).unwrap();
        v["point_zones"]["hypo_max"] = 200.0.into();
        assert!(ZoneTables::from_json(&v.to_string()).is_err());
        assert!(ZoneTables::from_json("{").is_err());
    }

    #[test]
    fn factor_defaults_when_absent() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_ZONES_JSON).unwrap();
        v.as_object_mut().unwrap().remove("rate_denominator_factor");
        let t = ZoneTables::from_json(&v.to_string()).unwrap();
        assert_eq!(t.rate_denominator_factor, 2.0);
    }
}
