//! Trajectory refinement: outlier repair, adaptive Savitzky–Golay smoothing,
//! key-point blending and endpoint pinning.
//!
//! Stages run in a fixed order:
//!
//! 1. [`zscore_filter`] replaces points whose incoming step length is a
//!    z-score outlier with a linear interpolation of their clean neighbours.
//! 2. [`detect_keypoints`] marks vertices that turn by more than the
//!    configured angle, measured on the repaired trajectory.
//! 3. Each interior point is smoothed with its own window from
//!    [`adaptive_window`].
//! 4. Key-points are pulled back toward their repaired position by
//!    `keypoint_weight`.
//! 5. The first and last points are reset to the repaired endpoints.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metrics::smoothness;
use crate::savgol::{savgol_weights, SavgolError};
use crate::types::{
    heading_change, RefinementConfig, Trajectory, ValidationError, Waypoint, COMPLETE_LEN,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error(transparent)]
    Config(#[from] ValidationError),
    #[error("trajectory has {len} points, expected {expected}; normalize it first")]
    Incomplete { len: usize, expected: usize },
    #[error("trajectory contains non-finite coordinates")]
    NonFinite,
    #[error(transparent)]
    Savgol(#[from] SavgolError),
}

/// Per-trajectory diagnostics of a [`refine`] call.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefinementReport {
    pub outlier_indices: Vec<usize>,
    pub keypoint_indices: Vec<usize>,
    /// Window length used at each index; 1 means the point was not smoothed.
    pub window_used: Vec<usize>,
    pub pre_smoothness: f64,
    pub post_smoothness: f64,
}

/// Leave-one-out z-score of `steps[i]` against the remaining steps.
///
/// A spike in position produces two long steps (in and out); including
/// both in the reference statistics caps the ordinary z-score near 2.9
/// for 19 steps, so the tested step is excluded from them.
fn loo_zscore(steps: &[f64], i: usize, tol: f64) -> f64 {
    let m = (steps.len() - 1) as f64;
    let mean = steps
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, d)| d)
        .sum::<f64>()
        / m;
    let dev = steps[i] - mean;
    if dev.abs() <= tol {
        return 0.0;
    }
    let var = if m > 1.0 {
        steps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, d)| (d - mean).powi(2))
            .sum::<f64>()
            / (m - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    if sd <= tol {
        dev.signum() * f64::INFINITY
    } else {
        dev / sd
    }
}

fn repair(points: &mut [Waypoint], original: &[Waypoint], flagged: &[bool]) {
    let n = points.len();
    for k in 0..n {
        if !flagged[k] {
            points[k] = original[k];
            continue;
        }
        // endpoints are never flagged, so both neighbours exist
        let lo = (0..k).rev().find(|&j| !flagged[j]).unwrap_or(0);
        let hi = (k + 1..n).find(|&j| !flagged[j]).unwrap_or(n - 1);
        let t = (k - lo) as f64 / (hi - lo) as f64;
        points[k] = original[lo].lerp(original[hi], t);
    }
}

/// Replaces outlying points and returns the repaired trajectory together
/// with the replaced indices in ascending order.
///
/// Step lengths `d_i = |p_{i+1} - p_i|` are z-scored; the point at the end
/// of the most extreme step is flagged and repaired, then the scores are
/// recomputed, until no interior point's incoming step exceeds `threshold`.
/// Endpoints are never flagged.
pub fn zscore_filter(traj: &Trajectory, threshold: f64) -> (Trajectory, Vec<usize>) {
    let n = traj.len();
    if n < 3 || threshold.is_nan() {
        return (traj.clone(), Vec::new());
    }
    let original = &traj.points;
    let mut points = original.clone();
    let mut flagged = vec![false; n];

    loop {
        let steps: Vec<f64> = points.windows(2).map(|w| w[1].distance(w[0])).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        let tol = 1e-9 * (1.0 + mean);
        if steps.iter().all(|d| (d - mean).abs() <= tol) {
            break;
        }

        let mut worst: Option<(usize, f64)> = None;
        for (i, _) in steps.iter().enumerate().take(n - 2) {
            let point = i + 1;
            if flagged[point] {
                continue;
            }
            let z = loo_zscore(&steps, i, tol).abs();
            if z > threshold && worst.is_none_or(|(_, best)| z > best) {
                worst = Some((point, z));
            }
        }
        let Some((point, _)) = worst else { break };
        flagged[point] = true;
        repair(&mut points, original, &flagged);
    }

    let indices = (0..n).filter(|&i| flagged[i]).collect();
    (
        Trajectory {
            points,
            dt: traj.dt,
        },
        indices,
    )
}

/// Interior indices whose heading change exceeds `angle_threshold` degrees.
pub fn detect_keypoints(traj: &Trajectory, angle_threshold: f64) -> Vec<usize> {
    traj.points
        .windows(3)
        .enumerate()
        .filter_map(|(i, w)| {
            heading_change(w[0], w[1], w[2])
                .filter(|&angle| angle > angle_threshold)
                .map(|_| i + 1)
        })
        .collect()
}

fn curvature_window(angle: f64, cfg: &RefinementConfig) -> usize {
    let full = cfg.keypoint_angle_deg;
    let half = full / 2.0;
    if angle < half {
        return cfg.max_window;
    }
    if angle >= full {
        return cfg.min_window;
    }
    let frac = (angle - half) / (full - half);
    let span = (cfg.max_window - cfg.min_window) as f64;
    let raw = (cfg.max_window as f64 - frac * span).floor() as usize;
    let odd = if raw.is_multiple_of(2) { raw - 1 } else { raw };
    odd.clamp(cfg.min_window, cfg.max_window)
}

/// Odd smoothing window for every index.
///
/// Straight stretches (heading change below half the key-point angle) get
/// `max_window`; the window shrinks linearly to `min_window` as the heading
/// change reaches the key-point angle. Each window is then clipped to fit
/// symmetrically inside the trajectory, so endpoints get 1.
pub fn adaptive_window(traj: &Trajectory, cfg: &RefinementConfig) -> Vec<usize> {
    let n = traj.len();
    let p = &traj.points;
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return 1;
            }
            let angle = heading_change(p[i - 1], p[i], p[i + 1]).unwrap_or(0.0);
            let fit = 2 * i.min(n - 1 - i) + 1;
            curvature_window(angle, cfg).min(fit)
        })
        .collect()
}

fn smooth_point(
    points: &[Waypoint],
    i: usize,
    window: usize,
    order: usize,
    cache: &mut BTreeMap<(usize, usize), Vec<f64>>,
) -> Result<Waypoint, SavgolError> {
    // a window no wider than the fit degree interpolates its samples
    if window <= order + 1 {
        return Ok(points[i]);
    }
    let weights = match cache.get(&(window, order)) {
        Some(w) => w,
        None => {
            let w = savgol_weights(window, order)?;
            cache.entry((window, order)).or_insert(w)
        }
    };
    let start = i - window / 2;
    let (x, y) = points[start..start + window]
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(x, y), (p, w)| (x + w * p.x, y + w * p.y));
    Ok(Waypoint::new(x, y))
}

/// Refines a complete (20-point) trajectory.
pub fn refine(
    traj: &Trajectory,
    cfg: &RefinementConfig,
) -> Result<(Trajectory, RefinementReport), RefineError> {
    refine_with_len(traj, cfg, COMPLETE_LEN)
}

/// [`refine`] for a pipeline whose complete length is `expected_len`.
pub fn refine_with_len(
    traj: &Trajectory,
    cfg: &RefinementConfig,
    expected_len: usize,
) -> Result<(Trajectory, RefinementReport), RefineError> {
    cfg.validate()?;
    if traj.len() != expected_len || traj.len() < 3 {
        return Err(RefineError::Incomplete {
            len: traj.len(),
            expected: expected_len.max(3),
        });
    }
    if !traj.is_finite() {
        return Err(RefineError::NonFinite);
    }

    let (filtered, outlier_indices) = zscore_filter(traj, cfg.z_threshold);
    let keypoint_indices = detect_keypoints(&filtered, cfg.keypoint_angle_deg);
    let window_used = adaptive_window(&filtered, cfg);

    let mut cache = BTreeMap::new();
    let mut out = filtered
        .points
        .iter()
        .enumerate()
        .map(|(i, _)| {
            smooth_point(
                &filtered.points,
                i,
                window_used[i],
                cfg.poly_order,
                &mut cache,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    for &k in &keypoint_indices {
        out[k] = filtered.points[k].lerp(out[k], 1.0 - cfg.keypoint_weight);
    }

    let last = out.len() - 1;
    out[0] = filtered.points[0];
    out[last] = filtered.points[last];

    let refined = Trajectory {
        points: out,
        dt: traj.dt,
    };
    let report = RefinementReport {
        outlier_indices,
        keypoint_indices,
        window_used,
        pre_smoothness: smoothness(traj),
        post_smoothness: smoothness(&refined),
    };
    Ok((refined, report))
}
