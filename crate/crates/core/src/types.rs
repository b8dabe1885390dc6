//! Domain types shared across the crate.
//!
//! All positions are expressed in a bird's-eye-view frame centred on the ego
//! vehicle at `t = 0`: `x` points forward, `y` points to the left, both in
//! meters. Future waypoints are sampled at a uniform step of [`DEFAULT_DT`].

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Seconds between consecutive future waypoints.
pub const DEFAULT_DT: f64 = 0.25;

/// Number of waypoints in a complete trajectory (5 s at 0.25 s).
pub const COMPLETE_LEN: usize = 20;

/// Default length of the ego-kinematics window embedded in prompts.
pub const DEFAULT_HISTORY_SPAN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("invalid refinement config: {0}")]
    Config(String),
    #[error("invalid ego history: {0}")]
    History(String),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Waypoint) -> f64 {
        (self - other).norm()
    }

    /// `(1 - t) * self + t * other`
    pub fn lerp(self, other: Waypoint, t: f64) -> Waypoint {
        Waypoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl Add for Waypoint {
    type Output = Waypoint;

    fn add(self, rhs: Waypoint) -> Waypoint {
        Waypoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Waypoint {
    type Output = Waypoint;

    fn sub(self, rhs: Waypoint) -> Waypoint {
        Waypoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Waypoint {
    type Output = Waypoint;

    fn mul(self, k: f64) -> Waypoint {
        Waypoint::new(self.x * k, self.y * k)
    }
}

impl From<[f64; 2]> for Waypoint {
    fn from([x, y]: [f64; 2]) -> Self {
        Waypoint::new(x, y)
    }
}

impl From<Waypoint> for [f64; 2] {
    fn from(p: Waypoint) -> Self {
        [p.x, p.y]
    }
}

/// Unsigned angle in degrees, in `[0, 180]`, between the chord `a -> b` and
/// the chord `b -> c`.
///
/// Returns `None` when either chord has zero length, in which case the
/// heading at `b` is undefined.
pub fn heading_change(a: Waypoint, b: Waypoint, c: Waypoint) -> Option<f64> {
    let u = b - a;
    let v = c - b;
    if (u.x == 0.0 && u.y == 0.0) || (v.x == 0.0 && v.y == 0.0) {
        return None;
    }
    let cross = u.x * v.y - u.y * v.x;
    let dot = u.x * v.x + u.y * v.y;
    Some(cross.atan2(dot).abs().to_degrees())
}

/// Uniformly sampled sequence of future waypoints. The ego pose at `t = 0`
/// is implicit and not part of `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Waypoint>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Waypoint>) -> Self {
        Self {
            points,
            dt: DEFAULT_DT,
        }
    }

    pub fn with_dt(points: Vec<Waypoint>, dt: f64) -> Result<Self, ValidationError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ValidationError::Trajectory(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        Ok(Self { points, dt })
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(x, y)| Waypoint::new(x, y))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(Waypoint::is_finite)
    }

    /// Total time covered by the waypoints.
    pub fn horizon(&self) -> f64 {
        self.points.len() as f64 * self.dt
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|&p| p.into()).collect()
    }

    pub fn map_points(&self, f: impl Fn(Waypoint) -> Waypoint) -> Trajectory {
        Trajectory {
            points: self.points.iter().copied().map(f).collect(),
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    /// Seconds relative to the present; never positive.
    pub t: f64,
    /// m/s
    pub velocity: f64,
    /// m/s²
    pub acceleration: f64,
}

impl KinematicSample {
    pub const fn new(t: f64, velocity: f64, acceleration: f64) -> Self {
        Self {
            t,
            velocity,
            acceleration,
        }
    }
}

/// Past ego velocity/acceleration samples, oldest first, ending at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoHistory {
    samples: Vec<KinematicSample>,
    span: f64,
}

impl EgoHistory {
    /// Builds a history with the default 4 s window.
    pub fn new(samples: Vec<KinematicSample>) -> Result<Self, ValidationError> {
        Self::with_span(samples, DEFAULT_HISTORY_SPAN)
    }

    pub fn with_span(samples: Vec<KinematicSample>, span: f64) -> Result<Self, ValidationError> {
        let bad = |msg: String| Err(ValidationError::History(msg));
        if !(span.is_finite() && span >= 0.0) {
            return bad(format!("span must be finite and non-negative, got {span}"));
        }
        for s in &samples {
            if !(s.t.is_finite() && s.velocity.is_finite() && s.acceleration.is_finite()) {
                return bad("samples must be finite".into());
            }
        }
        for pair in samples.windows(2) {
            if pair[1].t <= pair[0].t {
                return bad(format!(
                    "timestamps must be strictly increasing ({} then {})",
                    pair[0].t, pair[1].t
                ));
            }
        }
        if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
            if last.t != 0.0 {
                return bad(format!("last sample must be at t=0, got t={}", last.t));
            }
            // timestamps like -3.75 accumulate rounding when produced by repeated addition
            if last.t - first.t > span + 1e-9 {
                return bad(format!(
                    "samples cover {} s, more than the declared {} s",
                    last.t - first.t,
                    span
                ));
            }
        }
        Ok(Self { samples, span })
    }

    pub fn empty() -> Self {
        Self {
            samples: Vec::new(),
            span: DEFAULT_HISTORY_SPAN,
        }
    }

    pub fn samples(&self) -> &[KinematicSample] {
        &self.samples
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Time actually covered by the samples.
    pub fn covered(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// Three-stage model answer: scene description, driving decision, trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredResponse {
    pub description: String,
    pub decision: String,
    pub trajectory: Trajectory,
}

/// Tunables of the refinement stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    /// |z| above which a step marks its end point as an outlier.
    pub z_threshold: f64,
    pub min_window: usize,
    pub max_window: usize,
    pub poly_order: usize,
    /// Heading change in degrees above which a vertex is a key-point.
    pub keypoint_angle_deg: f64,
    /// Weight on the unsmoothed point when blending key-points.
    pub keypoint_weight: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            z_threshold: 3.0,
            min_window: 5,
            max_window: 9,
            poly_order: 2,
            keypoint_angle_deg: 25.0,
            keypoint_weight: 0.7,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let bad = |msg: String| Err(ValidationError::Config(msg));
        if self.z_threshold.is_nan() || self.z_threshold <= 0.0 {
            return bad(format!("z_threshold must be > 0, got {}", self.z_threshold));
        }
        if self.min_window < 3 || self.min_window.is_multiple_of(2) {
            return bad(format!(
                "min_window must be odd and >= 3, got {}",
                self.min_window
            ));
        }
        if self.max_window.is_multiple_of(2) || self.max_window < self.min_window {
            return bad(format!(
                "max_window must be odd and >= min_window, got {}",
                self.max_window
            ));
        }
        if self.poly_order < 1 || self.poly_order >= self.min_window {
            return bad(format!(
                "poly_order must be in [1, min_window), got {}",
                self.poly_order
            ));
        }
        if !(self.keypoint_angle_deg > 0.0 && self.keypoint_angle_deg < 180.0) {
            return bad(format!(
                "keypoint_angle_deg must be in (0, 180), got {}",
                self.keypoint_angle_deg
            ));
        }
        if !(0.0..=1.0).contains(&self.keypoint_weight) {
            return bad(format!(
                "keypoint_weight must be in [0, 1], got {}",
                self.keypoint_weight
            ));
        }
        Ok(())
    }
}

/// One evaluation row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub raw_text: Option<String>,
    pub pred: Option<Trajectory>,
    pub gt: Trajectory,
    pub ego_history: Option<EgoHistory>,
    pub nav_instruction: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Waypoint {
        Waypoint::new(x, y)
    }

    #[test]
    fn heading_change_basic_cases() {
        assert_eq!(heading_change(p(0., 0.), p(1., 0.), p(2., 0.)), Some(0.0));
        let right = heading_change(p(0., 0.), p(1., 0.), p(1., 1.)).unwrap();
        assert!((right - 90.0).abs() < 1e-12);
        // (1,0) then (1,1): atan2(1, 1) = 45°
        let oracle = (1.0f64).atan2(1.0).to_degrees();
        let got = heading_change(p(0., 0.), p(1., 0.), p(2., 1.)).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 45.0).abs() < 1e-12);
    }

    #[test]
    fn heading_change_reversal_is_180() {
        let got = heading_change(p(0., 0.), p(1., 0.), p(0., 0.)).unwrap();
        assert!((got - 180.0).abs() < 1e-12);
    }

    #[test]
    fn heading_change_degenerate_segment() {
        assert_eq!(heading_change(p(1., 1.), p(1., 1.), p(2., 0.)), None);
        assert_eq!(heading_change(p(0., 0.), p(1., 1.), p(1., 1.)), None);
    }

    #[test]
    fn default_config_is_valid() {
        RefinementConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_values() {
        let base = RefinementConfig::default();
        for cfg in [
            RefinementConfig {
                min_window: 4,
                ..base
            },
            RefinementConfig {
                min_window: 1,
                poly_order: 0,
                ..base
            },
            RefinementConfig {
                max_window: 3,
                ..base
            },
            RefinementConfig {
                max_window: 10,
                ..base
            },
            RefinementConfig {
                poly_order: 5,
                ..base
            },
            RefinementConfig {
                poly_order: 0,
                ..base
            },
            RefinementConfig {
                keypoint_angle_deg: 180.0,
                ..base
            },
            RefinementConfig {
                keypoint_angle_deg: 0.0,
                ..base
            },
            RefinementConfig {
                keypoint_weight: 1.5,
                ..base
            },
            RefinementConfig {
                z_threshold: 0.0,
                ..base
            },
            RefinementConfig {
                z_threshold: f64::NAN,
                ..base
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let inf = RefinementConfig {
            z_threshold: f64::INFINITY,
            ..base
        };
        inf.validate().unwrap();
    }

    #[test]
    fn ego_history_validation() {
        let ok: Vec<_> = (0..=16)
            .map(|k| KinematicSample::new(-4.0 + 0.25 * k as f64, 10.0, 0.0))
            .collect();
        let h = EgoHistory::new(ok).unwrap();
        assert_eq!(h.samples().len(), 17);
        assert!((h.covered() - 4.0).abs() < 1e-12);

        let not_ending_at_zero = vec![KinematicSample::new(-1.0, 1.0, 0.0)];
        assert!(EgoHistory::new(not_ending_at_zero).is_err());

        let unordered = vec![
            KinematicSample::new(-1.0, 1.0, 0.0),
            KinematicSample::new(-2.0, 1.0, 0.0),
            KinematicSample::new(0.0, 1.0, 0.0),
        ];
        assert!(EgoHistory::new(unordered).is_err());

        let too_long = vec![
            KinematicSample::new(-5.0, 1.0, 0.0),
            KinematicSample::new(0.0, 1.0, 0.0),
        ];
        assert!(EgoHistory::new(too_long).is_err());
        assert!(EgoHistory::new(Vec::new()).is_ok());
    }

    #[test]
    fn trajectory_rejects_bad_dt() {
        assert!(Trajectory::with_dt(vec![], 0.0).is_err());
        assert!(Trajectory::with_dt(vec![], f64::NAN).is_err());
        assert_eq!(Trajectory::with_dt(vec![], 0.1).unwrap().dt, 0.1);
    }
}
