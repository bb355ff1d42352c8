//! The two-layer predictor and the trial/experiment drivers.
//!
//! Layer 1 routes training windows into hypo/eu/hyper clusters by their
//! 5-minute linear prediction and fits one diffusion-geometry regressor per
//! cluster plus a judge `f_J` on all training data. Layer 2 picks, per point,
//! the cluster output with the best PRED-EGA placement against `f_J`.

mod judge;

pub use judge::{judge_dominance_violations, judge_select, verdict_against_judge, Selection};

use std::ops::Range;
use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{krr_fit, krr_predict};
use crate::cgm::{
    butterworth_smooth, make_windows_with_targets, segment_contiguous, split_patients, CgmSeries,
    PatientSplit, SampleWindow, NOMINAL_STEP_MINUTES,
};
use crate::config::ExperimentConfig;
use crate::diffusion::{
    build_laplacian, build_weight_matrix, choose_epsilon, eigendecompose, evaluate_sigma_all,
    solve_summability_weights_with, Admissibility, DiffusionModel, PointCloud, SummabilityWeights,
};
use crate::error::{Error, Result};
use crate::legendre::LinearPredictor;
use crate::pred_ega::{score_sequence, PredEgaReport, ZoneTables};

/// Upper end of the physiological range used to clamp routing predictions.
pub const ROUTING_MAX_MGDL: f64 = 450.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cluster {
    #[serde(rename = "o")]
    Hypo,
    #[serde(rename = "e")]
    Eu,
    #[serde(rename = "r")]
    Hyper,
}

impl Cluster {
    /// Tie-break order.
    pub const ALL: [Cluster; 3] = [Cluster::Hypo, Cluster::Eu, Cluster::Hyper];

    /// Cluster of a routing prediction, after clamping into `[0, 450]`.
    pub fn of_prediction(l: f64) -> Cluster {
        let l = l.clamp(0.0, ROUTING_MAX_MGDL);
        if l <= 70.0 {
            Cluster::Hypo
        } else if l <= 180.0 {
            Cluster::Eu
        } else {
            Cluster::Hyper
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cluster::Hypo => "o",
            Cluster::Eu => "e",
            Cluster::Hyper => "r",
        }
    }
}

/// Windows of every patient, their segment structure, and the diffusion
/// model over the whole cloud. None of this depends on the patient split, so
/// it is built once and shared by all trials.
#[derive(Debug)]
pub struct PreparedData {
    pub patients: Vec<String>,
    pub windows: Vec<SampleWindow>,
    /// Runs of consecutive windows from one contiguous segment.
    pub segments: Vec<Range<usize>>,
    pub cloud: PointCloud,
    pub model: DiffusionModel,
    pub predictor: LinearPredictor,
}

impl PreparedData {
    pub fn prepare(series: &[CgmSeries], cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut patients: Vec<String> = Vec::with_capacity(series.len());
        for s in series {
            if patients.iter().any(|p| p == s.patient_id()) {
                return Err(Error::Series {
                    patient: s.patient_id().to_string(),
                    reason: "appears more than once".into(),
                });
            }
            patients.push(s.patient_id().to_string());
        }
        let mut windows = Vec::new();
        let mut segments = Vec::new();
        for s in series {
            for seg in segment_contiguous(s, NOMINAL_STEP_MINUTES, cfg.gap.slack) {
                let inputs = if cfg.smoothing.enabled {
                    butterworth_smooth(&seg, cfg.smoothing.cutoff)?
                } else {
                    seg.clone()
                };
                let w = make_windows_with_targets(&inputs, &seg, cfg.d, cfg.m)?;
                if !w.is_empty() {
                    segments.push(windows.len()..windows.len() + w.len());
                    windows.extend(w);
                }
            }
        }
        if windows.len() < 2 {
            return Err(Error::DegenerateCloud(format!(
                "{} windows of length {} + horizon {}; need at least 2",
                windows.len(),
                cfg.d,
                cfg.m
            )));
        }
        let cloud = PointCloud::from_windows(&windows)?;
        let start = Instant::now();
        let epsilon = match cfg.diffusion.epsilon {
            Some(e) => e,
            None => choose_epsilon(&cloud, cfg.seed)?,
        };
        let laplacian = build_laplacian(build_weight_matrix(&cloud, epsilon)?, cfg.diffusion.mode)?;
        let k = cfg.diffusion.k_max.min(cloud.len());
        let model = eigendecompose(&laplacian, k, cfg.diffusion.solver)?;
        info!(
            "diffusion model: {} points, epsilon {:.4e}, {} eigenpairs in {:.2?}",
            cloud.len(),
            epsilon,
            k,
            start.elapsed()
        );
        Ok(Self {
            patients,
            windows,
            segments,
            cloud,
            model,
            predictor: LinearPredictor::new(NOMINAL_STEP_MINUTES, cfg.legendre.kappa_max),
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.y).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.t_last).collect()
    }

    pub fn train_indices(&self, split: &PatientSplit) -> Vec<usize> {
        (0..self.windows.len())
            .filter(|&i| split.is_train(&self.windows[i].patient_id))
            .collect()
    }

    /// Segments scored under the evaluation policy.
    pub fn eval_segments(&self, split: &PatientSplit, test_only: bool) -> Vec<Range<usize>> {
        self.segments
            .iter()
            .filter(|s| !test_only || !split.is_train(&self.windows[s.start].patient_id))
            .cloned()
            .collect()
    }
}

/// Routing of the training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cloud indices of the training windows.
    pub train: Vec<usize>,
    pub clusters: Vec<Cluster>,
    /// Unclamped 5-minute linear predictions.
    pub routes: Vec<f64>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: Cluster) -> Vec<usize> {
        self.train
            .iter()
            .zip(&self.clusters)
            .filter(|(_, c)| **c == cluster)
            .map(|(i, _)| *i)
            .collect()
    }
}

pub fn cluster_training(
    windows: &[SampleWindow],
    train: &[usize],
    predictor: &LinearPredictor,
) -> Result<ClusterAssignment> {
    if train.is_empty() {
        return Err(Error::param("train", "training set is empty"));
    }
    let routes = train
        .iter()
        .map(|&i| predictor.predict(&windows[i], predictor.step_minutes))
        .collect::<Result<Vec<f64>>>()?;
    let clusters = routes.iter().map(|&l| Cluster::of_prediction(l)).collect();
    Ok(ClusterAssignment {
        train: train.to_vec(),
        clusters,
        routes,
    })
}

/// Provenance of one layer-1 fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub train_size: usize,
    /// `None` when the cluster was empty and `f_J` stood in.
    pub k_used: Option<usize>,
    pub lambda: Option<f64>,
    pub condition: Option<f64>,
}

impl FitSummary {
    fn from_weights(sw: &SummabilityWeights) -> Self {
        Self {
            train_size: sw.train_ids.len(),
            k_used: Some(sw.k_used),
            lambda: Some(sw.lambda),
            condition: Some(sw.condition),
        }
    }

    fn fallback() -> Self {
        Self {
            train_size: 0,
            k_used: None,
            lambda: None,
            condition: None,
        }
    }
}

/// Layer-1 outputs at every cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPredictors {
    pub f_o: Vec<f64>,
    pub f_e: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_j: Vec<f64>,
    /// Fits for o, e, r, then the judge.
    pub fits: [FitSummary; 4],
}

impl ClusterPredictors {
    pub fn values(&self, cluster: Cluster) -> &[f64] {
        match cluster {
            Cluster::Hypo => &self.f_o,
            Cluster::Eu => &self.f_e,
            Cluster::Hyper => &self.f_r,
        }
    }
}

fn fit_one(
    model: &DiffusionModel,
    ids: &[usize],
    targets: &[f64],
    admissibility: Admissibility,
) -> Result<(Vec<f64>, FitSummary)> {
    let sw = solve_summability_weights_with(model, ids, admissibility)?;
    let y: Vec<f64> = ids.iter().map(|&i| targets[i]).collect();
    Ok((
        evaluate_sigma_all(model, &sw, &y)?,
        FitSummary::from_weights(&sw),
    ))
}

/// Fits `f_o`, `f_e`, `f_r` on their clusters and `f_J` on all training
/// windows. `targets` is indexed by cloud point; an empty cluster's predictor
/// is a copy of `f_J`.
pub fn fit_layer1(
    model: &DiffusionModel,
    assignment: &ClusterAssignment,
    targets: &[f64],
    admissibility: Admissibility,
) -> Result<ClusterPredictors> {
    if targets.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            got: targets.len(),
        });
    }
    let (f_j, judge_fit) = fit_one(model, &assignment.train, targets, admissibility)?;
    let mut outs = Vec::with_capacity(3);
    for c in Cluster::ALL {
        let ids = assignment.members(c);
        if ids.is_empty() {
            debug!("cluster {} empty; using the judge", c.as_str());
            outs.push((f_j.clone(), FitSummary::fallback()));
        } else {
            outs.push(fit_one(model, &ids, targets, admissibility)?);
        }
    }
    let mut it = outs.into_iter();
    let (f_o, fit_o) = it.next().expect("three clusters");
    let (f_e, fit_e) = it.next().expect("three clusters");
    let (f_r, fit_r) = it.next().expect("three clusters");
    Ok(ClusterPredictors {
        f_o,
        f_e,
        f_r,
        f_j,
        fits: [fit_o, fit_e, fit_r, judge_fit],
    })
}

/// Scores predictions over the evaluation segments against the true targets.
pub fn score_predictions(
    data: &PreparedData,
    split: &PatientSplit,
    predictions: &[f64],
    tables: &ZoneTables,
    test_only: bool,
) -> Result<PredEgaReport> {
    if predictions.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            got: predictions.len(),
        });
    }
    let targets = data.targets();
    let times = data.times();
    let mut report = PredEgaReport::default();
    for seg in data.eval_segments(split, test_only) {
        let r = score_sequence(
            &predictions[seg.clone()],
            &targets[seg.clone()],
            &times[seg],
            tables,
        )?;
        report.merge(&r);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Deep,
    Tikhonov,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Deep => "deep",
            Method::Tikhonov => "tikhonov",
        }
    }
}

/// Diagnostics specific to the two-layer predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepDiagnostics {
    /// Training windows per cluster o, e, r.
    pub cluster_sizes: [usize; 3],
    /// Fits for o, e, r, then the judge.
    pub fits: [FitSummary; 4],
    pub dominance_violations: usize,
    pub chosen: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub method: Method,
    pub split: PatientSplit,
    pub report: PredEgaReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deep: Option<DeepDiagnostics>,
    /// Final prediction at every cloud point.
    #[serde(skip)]
    pub predictions: Vec<f64>,
}

fn split_for(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(PatientSplit, Vec<usize>)> {
    let split = split_patients(data.patients.iter(), cfg.train_percent, seed)?;
    let train = data.train_indices(&split);
    if train.is_empty() {
        return Err(Error::param(
            "train",
            "training patients have no complete windows",
        ));
    }
    Ok((split, train))
}

fn deep_trial(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    tables: &ZoneTables,
    seed: u64,
) -> Result<TrialResult> {
    let (split, train) = split_for(data, cfg, seed)?;
    let assignment = cluster_training(&data.windows, &train, &data.predictor)?;
    let predictors = fit_layer1(
        &data.model,
        &assignment,
        &data.targets(),
        cfg.admissibility(),
    )?;
    let times = data.times();
    let selection = judge_select(&predictors, &data.segments, &times, tables);
    let violations =
        judge_dominance_violations(&predictors, &selection, &data.segments, &times, tables).len();
    if violations > 0 {
        warn!("seed {seed}: {violations} judge dominance violations");
    }
    let report = score_predictions(data, &split, &selection.values, tables, cfg.eval.test_only)?;
    let count = |c: Cluster| assignment.clusters.iter().filter(|x| **x == c).count();
    let chosen = |c: Cluster| selection.chosen.iter().filter(|x| **x == c).count();
    Ok(TrialResult {
        seed,
        method: Method::Deep,
        split,
        report,
        deep: Some(DeepDiagnostics {
            cluster_sizes: Cluster::ALL.map(count),
            fits: predictors.fits.clone(),
            dominance_violations: violations,
            chosen: Cluster::ALL.map(chosen),
        }),
        predictions: selection.values,
    })
}

fn tikhonov_trial(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    tables: &ZoneTables,
    seed: u64,
) -> Result<TrialResult> {
    let (split, train) = split_for(data, cfg, seed)?;
    let inputs: Vec<Vec<f64>> = train.iter().map(|&i| data.windows[i].x.clone()).collect();
    let targets: Vec<f64> = train.iter().map(|&i| data.windows[i].y).collect();
    let model = krr_fit(
        &inputs,
        &targets,
        cfg.krr.sigma,
        cfg.krr.gamma,
        cfg.krr.scale_by_m,
    )?;
    let predictions: Vec<f64> = data
        .windows
        .iter()
        .map(|w| krr_predict(&model, &w.x))
        .collect();
    let report = score_predictions(data, &split, &predictions, tables, cfg.eval.test_only)?;
    Ok(TrialResult {
        seed,
        method: Method::Tikhonov,
        split,
        report,
        deep: None,
        predictions,
    })
}

/// One patient split and fit, scored with PRED-EGA against the true targets.
pub fn run_trial(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    tables: &ZoneTables,
    method: Method,
    seed: u64,
) -> Result<TrialResult> {
    let start = Instant::now();
    let out = match method {
        Method::Deep => deep_trial(data, cfg, tables, seed),
        Method::Tikhonov => tikhonov_trial(data, cfg, tables, seed),
    }
    .map_err(|e| Error::Trial {
        seed,
        source: Box::new(e),
    })?;
    debug!(
        "{} trial {seed} in {:.2?}",
        method.as_str(),
        start.elapsed()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    /// Counts pooled over all trials.
    pub pooled: PredEgaReport,
    pub trials: Vec<TrialResult>,
}

/// Trials with seeds `cfg.seed .. cfg.seed + cfg.trials`, run in parallel and
/// returned in seed order.
pub fn run_experiment(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    tables: &ZoneTables,
    method: Method,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| cfg.seed + i).collect();
    run_seeds(data, cfg, tables, method, &seeds)
}

pub fn run_seeds(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    tables: &ZoneTables,
    method: Method,
    seeds: &[u64],
) -> Result<ExperimentResult> {
    if seeds.is_empty() {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let trials = seeds
        .par_iter()
        .map(|&s| run_trial(data, cfg, tables, method, s))
        .collect::<Result<Vec<_>>>()?;
    let pooled = PredEgaReport::pooled(trials.iter().map(|t| &t.report));
    Ok(ExperimentResult {
        method,
        pooled,
        trials,
    })
}
