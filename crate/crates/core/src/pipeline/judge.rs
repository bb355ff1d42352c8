use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Cluster, ClusterPredictors};
use crate::pred_ega::{assess, central_rate, Verdict, ZoneTables};

/// Per-point output of the second layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub values: Vec<f64>,
    pub chosen: Vec<Cluster>,
}

fn is_interior(seg: &Range<usize>, i: usize) -> bool {
    i > seg.start && i + 1 < seg.end
}

/// Verdict of `f_ℓ` at point `i` of `seg`, with `f_J` as the reference.
pub fn verdict_against_judge(
    predictors: &ClusterPredictors,
    cluster: Cluster,
    seg: &Range<usize>,
    times: &[f64],
    i: usize,
    tables: &ZoneTables,
) -> Verdict {
    let f = predictors.values(cluster);
    let judge = &predictors.f_j;
    let rates = if is_interior(seg, i) {
        let local = i - seg.start;
        let t = &times[seg.clone()];
        let factor = tables.rate_denominator_factor;
        central_rate(&f[seg.clone()], t, local, factor).zip(central_rate(
            &judge[seg.clone()],
            t,
            local,
            factor,
        ))
    } else {
        None
    };
    assess(f[i], judge[i], rates, tables).1
}

/// Picks, at every point, the cluster predictor with the best verdict against
/// `f_J`, then the smallest `|f_ℓ − f_J|`, then the order o, e, r. Segment
/// endpoints have no central rate and go by distance alone.
pub fn judge_select(
    predictors: &ClusterPredictors,
    segments: &[Range<usize>],
    times: &[f64],
    tables: &ZoneTables,
) -> Selection {
    let n = predictors.f_j.len();
    let mut values = vec![f64::NAN; n];
    let mut chosen = vec![Cluster::Eu; n];
    for seg in segments {
        for i in seg.clone() {
            let interior = is_interior(seg, i);
            let mut best: Option<(Cluster, Verdict, f64)> = None;
            for c in Cluster::ALL {
                let verdict = if interior {
                    verdict_against_judge(predictors, c, seg, times, i, tables)
                } else {
                    Verdict::Accurate
                };
                let dist = (predictors.values(c)[i] - predictors.f_j[i]).abs();
                let better = match best {
                    None => true,
                    Some((_, bv, bd)) => verdict > bv || (verdict == bv && dist < bd),
                };
                if better {
                    best = Some((c, verdict, dist));
                }
            }
            let (c, _, _) = best.expect("three candidates");
            chosen[i] = c;
            values[i] = predictors.values(c)[i];
        }
    }
    Selection { values, chosen }
}

/// Interior points where the selected predictor's verdict against `f_J` is
/// below that of some other cluster predictor.
pub fn judge_dominance_violations(
    predictors: &ClusterPredictors,
    selection: &Selection,
    segments: &[Range<usize>],
    times: &[f64],
    tables: &ZoneTables,
) -> Vec<usize> {
    let mut out = Vec::new();
    for seg in segments {
        for i in seg.clone().filter(|&i| is_interior(seg, i)) {
            let own = verdict_against_judge(predictors, selection.chosen[i], seg, times, i, tables);
            let beaten = Cluster::ALL
                .iter()
                .any(|&c| verdict_against_judge(predictors, c, seg, times, i, tables) > own);
            if beaten {
                out.push(i);
            }
        }
    }
    out
}
