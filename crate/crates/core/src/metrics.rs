//! Displacement-error metrics and the batch evaluation summary.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::normalize::{is_complete, normalize_length};
use crate::refine::{refine_with_len, RefinementReport};
use crate::structured::{parse_response, ParseError, SpecialTokens};
use crate::types::{EvalRecord, RefinementConfig, Trajectory, COMPLETE_LEN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("trajectories have different lengths ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("trajectories have different time steps ({pred} vs {gt})")]
    StepMismatch { pred: f64, gt: f64 },
    #[error("horizon {horizon} s needs {needed} points, trajectory has {available}")]
    HorizonOutOfRange {
        horizon: f64,
        needed: usize,
        available: usize,
    },
}

/// Mean Euclidean distance over the waypoints inside `horizon` seconds,
/// i.e. the first `round(horizon / dt)` points.
pub fn ade(pred: &Trajectory, gt: &Trajectory, horizon: f64) -> Result<f64, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.dt != gt.dt {
        return Err(MetricError::StepMismatch {
            pred: pred.dt,
            gt: gt.dt,
        });
    }
    let steps = (horizon / gt.dt).round();
    if !(steps >= 1.0 && steps <= gt.len() as f64) {
        return Err(MetricError::HorizonOutOfRange {
            horizon,
            needed: steps.max(0.0) as usize,
            available: gt.len(),
        });
    }
    let steps = steps as usize;
    let total: f64 = pred.points[..steps]
        .iter()
        .zip(&gt.points[..steps])
        .map(|(p, g)| p.distance(*g))
        .sum();
    Ok(total / steps as f64)
}

/// Mean squared second difference, `(1/(n-2)) Σ |p[i+1] - 2 p[i] + p[i-1]|²`.
/// Zero for fewer than three points.
pub fn smoothness(traj: &Trajectory) -> f64 {
    if traj.len() < 3 {
        return 0.0;
    }
    let total: f64 = traj
        .points
        .windows(3)
        .map(|w| {
            let dx = w[2].x - 2.0 * w[1].x + w[0].x;
            let dy = w[2].y - 2.0 * w[1].y + w[0].y;
            dx * dx + dy * dy
        })
        .sum();
    total / (traj.len() - 2) as f64
}

/// Evaluation settings shared by [`summarize`] and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// `None` scores the normalized predictions without refinement.
    pub refinement: Option<RefinementConfig>,
    pub target_len: usize,
    pub workers: usize,
    pub tokens: SpecialTokens,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            refinement: Some(RefinementConfig::default()),
            target_len: COMPLETE_LEN,
            workers: 1,
            tokens: SpecialTokens::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord {
    /// Number of waypoints before normalization.
    pub input_len: usize,
    pub normalized: Trajectory,
    pub refined: Trajectory,
    pub report: Option<RefinementReport>,
    pub ade_3s: f64,
    pub ade_5s: f64,
    pub smoothness_pre: f64,
    pub smoothness_post: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordOutcome {
    Scored(Box<ScoredRecord>),
    ParseFailure(ParseError),
    LengthFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordEvaluation {
    pub id: String,
    pub outcome: RecordOutcome,
}

/// Runs parse, normalize, refine and scoring for a single record.
///
/// Raw model text takes precedence over pre-parsed waypoints when a record
/// carries both.
pub fn evaluate_record(record: &EvalRecord, opts: &EvalOptions) -> RecordEvaluation {
    let outcome = score(record, opts);
    RecordEvaluation {
        id: record.id.clone(),
        outcome,
    }
}

fn score(record: &EvalRecord, opts: &EvalOptions) -> RecordOutcome {
    let length_failure = |msg: String| RecordOutcome::LengthFailure(msg);
    let pred = match (&record.raw_text, &record.pred) {
        (Some(text), _) => match parse_response(text, &opts.tokens) {
            Ok(resp) => resp.trajectory,
            Err(e) => return RecordOutcome::ParseFailure(e),
        },
        (None, Some(pred)) => pred.clone(),
        (None, None) => return length_failure("empty prediction".into()),
    };
    if !is_complete(&record.gt, opts.target_len) {
        return length_failure(format!(
            "ground truth has {} points, expected {} finite points",
            record.gt.len(),
            opts.target_len
        ));
    }
    let input_len = pred.len();
    let pred = Trajectory {
        points: pred.points,
        dt: record.gt.dt,
    };
    let normalized = match normalize_length(&pred, opts.target_len) {
        Ok(t) => t,
        Err(e) => return length_failure(e.to_string()),
    };
    let (refined, report) = match &opts.refinement {
        Some(cfg) => match refine_with_len(&normalized, cfg, opts.target_len) {
            Ok((t, r)) => (t, Some(r)),
            Err(e) => return length_failure(e.to_string()),
        },
        None => (normalized.clone(), None),
    };
    let scores =
        ade(&refined, &record.gt, 3.0).and_then(|a3| Ok((a3, ade(&refined, &record.gt, 5.0)?)));
    let (ade_3s, ade_5s) = match scores {
        Ok(s) => s,
        Err(e) => return length_failure(e.to_string()),
    };
    RecordOutcome::Scored(Box::new(ScoredRecord {
        input_len,
        smoothness_pre: smoothness(&normalized),
        smoothness_post: smoothness(&refined),
        normalized,
        refined,
        report,
        ade_3s,
        ade_5s,
    }))
}

/// Evaluates every record on `opts.workers` threads; results keep input order.
pub fn evaluate_all(records: &[EvalRecord], opts: &EvalOptions) -> Vec<RecordEvaluation> {
    let workers = opts.workers.max(1);
    if workers == 1 {
        return records.iter().map(|r| evaluate_record(r, opts)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| {
            records
                .par_iter()
                .map(|r| evaluate_record(r, opts))
                .collect()
        }),
        Err(_) => records.iter().map(|r| evaluate_record(r, opts)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    /// `None` when no record could be scored.
    pub ade_3s: Option<f64>,
    pub ade_5s: Option<f64>,
    pub n_records: usize,
    pub n_parse_failures: usize,
    pub n_length_failures: usize,
    pub mean_smoothness_pre: Option<f64>,
    pub mean_smoothness_post: Option<f64>,
}

impl EvalSummary {
    pub fn n_scored(&self) -> usize {
        self.n_records - self.n_parse_failures - self.n_length_failures
    }

    /// `key = value` lines; undefined means print as `undefined`.
    pub fn to_report_text(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        format!(
            "ade_3s = {}\nade_5s = {}\nn_records = {}\nn_parse_failures = {}\nn_length_failures = {}\nmean_smoothness_pre = {}\nmean_smoothness_post = {}\n",
            num(self.ade_3s),
            num(self.ade_5s),
            self.n_records,
            self.n_parse_failures,
            self.n_length_failures,
            num(self.mean_smoothness_pre),
            num(self.mean_smoothness_post),
        )
    }
}

/// Mean that does not depend on the order of `values`.
fn order_free_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn aggregate(evaluations: &[RecordEvaluation]) -> EvalSummary {
    let mut n_parse_failures = 0;
    let mut n_length_failures = 0;
    let mut cols: [Vec<f64>; 4] = Default::default();
    for e in evaluations {
        match &e.outcome {
            RecordOutcome::Scored(s) => {
                cols[0].push(s.ade_3s);
                cols[1].push(s.ade_5s);
                cols[2].push(s.smoothness_pre);
                cols[3].push(s.smoothness_post);
            }
            RecordOutcome::ParseFailure(_) => n_parse_failures += 1,
            RecordOutcome::LengthFailure(_) => n_length_failures += 1,
        }
    }
    let [a3, a5, pre, post] = cols;
    EvalSummary {
        ade_3s: order_free_mean(a3),
        ade_5s: order_free_mean(a5),
        n_records: evaluations.len(),
        n_parse_failures,
        n_length_failures,
        mean_smoothness_pre: order_free_mean(pre),
        mean_smoothness_post: order_free_mean(post),
    }
}

/// parse → normalize → refine → ADE over all records, single-threaded.
pub fn summarize(records: &[EvalRecord], cfg: &RefinementConfig) -> EvalSummary {
    let opts = EvalOptions {
        refinement: Some(*cfg),
        ..EvalOptions::default()
    };
    aggregate(&evaluate_all(records, &opts))
}
