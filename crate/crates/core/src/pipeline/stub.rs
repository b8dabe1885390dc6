//! Seeded synthetic corpus standing in for model output.
//!
//! Ground truth is drawn from three manoeuvre families (straight driving,
//! constant-curvature arcs and lane changes). The simulated model answer is
//! the ground truth with per-point noise, a jitter burst on the last points,
//! occasional length errors and occasional broken token structure.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::structured::{serialize_response, SpecialTokens};
use crate::types::{
    EgoHistory, EvalRecord, KinematicSample, StructuredResponse, Trajectory, Waypoint,
    COMPLETE_LEN, DEFAULT_DT,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubOptions {
    /// Std-dev of Gaussian noise on every predicted coordinate (m).
    pub noise_sigma: f64,
    /// Std-dev of the extra noise on the last `jitter_points` points (m).
    pub jitter_sigma: f64,
    pub jitter_points: usize,
    /// Probability that the prediction is truncated (14–19 points) or
    /// over-long (21–24 points), split evenly.
    pub length_error_rate: f64,
    /// Probability that the token structure of the answer is broken.
    pub malformed_rate: f64,
}

impl Default for StubOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.05,
            jitter_sigma: 0.5,
            jitter_points: 5,
            length_error_rate: 0.3,
            malformed_rate: 0.05,
        }
    }
}

impl StubOptions {
    /// Predictions equal to ground truth, always well formed.
    pub fn clean() -> Self {
        Self {
            noise_sigma: 0.0,
            jitter_sigma: 0.0,
            jitter_points: 0,
            length_error_rate: 0.0,
            malformed_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manoeuvre {
    Straight,
    Curve { left: bool },
    LaneChange { left: bool },
}

impl Manoeuvre {
    fn description(self) -> &'static str {
        match self {
            Manoeuvre::Straight => "Multi-lane road with light traffic; lane markings are clear and the lane ahead is free.",
            Manoeuvre::Curve { .. } => "The road bends ahead; a vehicle is parked on the shoulder and visibility is good.",
            Manoeuvre::LaneChange { .. } => "A slower truck occupies the current lane; the adjacent lane is clear.",
        }
    }

    fn decision(self) -> &'static str {
        match self {
            Manoeuvre::Straight => "Keep lane and maintain speed.",
            Manoeuvre::Curve { left: true } => "Follow the road to the left and ease off slightly.",
            Manoeuvre::Curve { left: false } => {
                "Follow the road to the right and ease off slightly."
            }
            Manoeuvre::LaneChange { left: true } => {
                "Merge into the left lane after checking the mirror."
            }
            Manoeuvre::LaneChange { left: false } => {
                "Merge into the right lane after checking the mirror."
            }
        }
    }

    fn navigation(self) -> &'static str {
        match self {
            Manoeuvre::Straight => "continue straight",
            Manoeuvre::Curve { left: true } => "follow the road left",
            Manoeuvre::Curve { left: false } => "follow the road right",
            Manoeuvre::LaneChange { left: true } => "change to the left lane",
            Manoeuvre::LaneChange { left: false } => "change to the right lane",
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// A ground-truth trajectory with its initial speed and acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub trajectory: Trajectory,
    pub manoeuvre: Manoeuvre,
    pub speed: f64,
    pub accel: f64,
}

/// Draws one 20-point ground truth. Coordinates are rounded to 0.1 mm so
/// they survive the 4-decimal text format unchanged.
pub fn ground_truth<R: Rng>(rng: &mut R) -> GroundTruth {
    let speed: f64 = rng.random_range(4.0..15.0);
    let accel: f64 = rng.random_range(-0.6..0.6);
    let arc_len = |t: f64| speed * t + 0.5 * accel * t * t;
    let total = arc_len(COMPLETE_LEN as f64 * DEFAULT_DT);

    let manoeuvre = match rng.random_range(0..3) {
        0 => Manoeuvre::Straight,
        1 => Manoeuvre::Curve {
            left: rng.random_bool(0.5),
        },
        _ => Manoeuvre::LaneChange {
            left: rng.random_bool(0.5),
        },
    };
    let sign = |left: bool| if left { 1.0 } else { -1.0 };

    let path: Box<dyn Fn(f64) -> (f64, f64)> = match manoeuvre {
        Manoeuvre::Straight => {
            let heading: f64 = rng.random_range(-0.05..0.05);
            Box::new(move |s| (s * heading.cos(), s * heading.sin()))
        }
        Manoeuvre::Curve { left } => {
            // at most a quarter turn over the horizon
            let max_k = (std::f64::consts::FRAC_PI_2 / total).min(0.05);
            let k = sign(left) * rng.random_range(0.2 * max_k..max_k);
            Box::new(move |s| ((k * s).sin() / k, (1.0 - (k * s).cos()) / k))
        }
        Manoeuvre::LaneChange { left } => {
            let width = sign(left) * 3.5;
            let start = rng.random_range(0.1..0.4) * total;
            let len = rng.random_range(0.4..0.6) * total;
            Box::new(move |s| {
                let u = ((s - start) / len).clamp(0.0, 1.0);
                (s, width * u * u * (3.0 - 2.0 * u))
            })
        }
    };

    let trajectory = Trajectory::from_pairs((1..=COMPLETE_LEN).map(|k| {
        let (x, y) = path(arc_len(k as f64 * DEFAULT_DT));
        (round4(x), round4(y))
    }));
    GroundTruth {
        trajectory,
        manoeuvre,
        speed,
        accel,
    }
}

/// Adds N(0, sigma²) noise to both coordinates of the last `count` points.
pub fn jitter_tail<R: Rng>(traj: &Trajectory, sigma: f64, count: usize, rng: &mut R) -> Trajectory {
    let mut out = traj.clone();
    if sigma <= 0.0 || count == 0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let start = out.len().saturating_sub(count);
    for p in &mut out.points[start..] {
        p.x += normal.sample(rng);
        p.y += normal.sample(rng);
    }
    out
}

fn ego_history(speed: f64, accel: f64) -> EgoHistory {
    let samples = (0..=16)
        .map(|k| {
            let t = -4.0 + 0.25 * k as f64;
            KinematicSample::new(t, round4((speed + accel * t).max(0.0)), round4(accel))
        })
        .collect();
    EgoHistory::new(samples).expect("uniform 4 s history is valid")
}

fn corrupt_structure<R: Rng>(text: &str, tokens: &SpecialTokens, rng: &mut R) -> String {
    match rng.random_range(0..3) {
        0 => text.replacen(&tokens.traj_end, "", 1),
        1 => text.replacen(&tokens.deci_start, "", 1),
        _ => {
            // decision block before description block
            let split = text.find(&tokens.deci_start).unwrap_or(0);
            let traj = text.find(&tokens.traj_start).unwrap_or(text.len());
            format!("{}{}{}", &text[split..traj], &text[..split], &text[traj..])
        }
    }
}

fn predicted<R: Rng>(gt: &Trajectory, opts: &StubOptions, rng: &mut R) -> Trajectory {
    let mut pred = gt.clone();
    if opts.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, opts.noise_sigma).expect("sigma is positive");
        for p in &mut pred.points {
            p.x += normal.sample(rng);
            p.y += normal.sample(rng);
        }
    }
    pred = jitter_tail(&pred, opts.jitter_sigma, opts.jitter_points, rng);

    if rng.random_bool(opts.length_error_rate.clamp(0.0, 1.0)) {
        if rng.random_bool(0.5) {
            let len = rng.random_range(14..=19);
            pred.points.truncate(len);
        } else {
            let len = rng.random_range(21..=24);
            let n = gt.len();
            let step = gt.points[n - 1] - gt.points[n - 2];
            let last = pred.points[n - 1];
            let normal = Normal::new(0.0, opts.jitter_sigma.max(opts.noise_sigma).max(1e-3))
                .expect("sigma is positive");
            for k in 1..=(len - n) {
                let drift = Waypoint::new(normal.sample(rng), normal.sample(rng));
                pred.points.push(last + step * k as f64 + drift);
            }
        }
    }
    pred
}

pub fn stub_generate(n: usize, seed: u64) -> Vec<EvalRecord> {
    stub_generate_with(n, seed, &StubOptions::default())
}

pub fn stub_generate_with(n: usize, seed: u64, opts: &StubOptions) -> Vec<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = SpecialTokens::default();
    (0..n)
        .map(|i| {
            let gt = ground_truth(&mut rng);
            let pred = predicted(&gt.trajectory, opts, &mut rng);
            let response = StructuredResponse {
                description: gt.manoeuvre.description().into(),
                decision: gt.manoeuvre.decision().into(),
                trajectory: pred,
            };
            let mut raw = serialize_response(&response, &tokens).expect("stub text has no tokens");
            if rng.random_bool(opts.malformed_rate.clamp(0.0, 1.0)) {
                raw = corrupt_structure(&raw, &tokens, &mut rng);
            }
            EvalRecord {
                id: format!("stub-{seed}-{i:05}"),
                raw_text: Some(raw),
                pred: None,
                gt: gt.trajectory,
                ego_history: Some(ego_history(gt.speed, gt.accel)),
                nav_instruction: Some(gt.manoeuvre.navigation().into()),
            }
        })
        .collect()
}
