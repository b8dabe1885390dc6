//! Length normalization of parsed trajectories.

use thiserror::Error;

use crate::types::{Trajectory, Waypoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("empty prediction")]
    EmptyPrediction,
    #[error("target length must be at least 1")]
    ZeroTarget,
}

/// Trims `traj` to its first `target_len` points, or extends it by repeating
/// the final step vector. A single point is repeated in place.
pub fn normalize_length(
    traj: &Trajectory,
    target_len: usize,
) -> Result<Trajectory, NormalizeError> {
    if target_len == 0 {
        return Err(NormalizeError::ZeroTarget);
    }
    let n = traj.len();
    if n == 0 {
        return Err(NormalizeError::EmptyPrediction);
    }
    if n >= target_len {
        return Ok(Trajectory {
            points: traj.points[..target_len].to_vec(),
            dt: traj.dt,
        });
    }

    let last = traj.points[n - 1];
    let step = if n >= 2 {
        last - traj.points[n - 2]
    } else {
        Waypoint::new(0.0, 0.0)
    };
    let mut points = Vec::with_capacity(target_len);
    points.extend_from_slice(&traj.points);
    // multiply rather than accumulate so every appended step is the same vector
    points.extend((1..=target_len - n).map(|k| last + step * k as f64));
    Ok(Trajectory {
        points,
        dt: traj.dt,
    })
}

pub fn is_complete(traj: &Trajectory, target_len: usize) -> bool {
    traj.len() == target_len && traj.is_finite()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::COMPLETE_LEN;

    fn line(n: usize) -> Trajectory {
        Trajectory::from_pairs((0..n).map(|i| (i as f64, 0.0)))
    }

    #[test]
    fn trims_long_predictions() {
        let t = line(22);
        let out = normalize_length(&t, COMPLETE_LEN).unwrap();
        assert_eq!(out.points, t.points[..20]);
    }

    #[test]
    fn extends_with_last_step() {
        let out = normalize_length(&line(2), 4).unwrap();
        assert_eq!(out.points, line(4).points);

        let diag = Trajectory::from_pairs([(0.0, 0.0), (1.0, 1.0)]);
        let out = normalize_length(&diag, 3).unwrap();
        // oracle: last point plus one step of (1,1)
        let expected = Waypoint::new(1.0 + 1.0, 1.0 + 1.0);
        assert_eq!(out.points[2], expected);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn single_point_is_repeated() {
        let t = Trajectory::from_pairs([(3.0, -1.0)]);
        let out = normalize_length(&t, 5).unwrap();
        assert!(out.points.iter().all(|p| *p == Waypoint::new(3.0, -1.0)));
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn empty_and_zero_target_are_errors() {
        assert_eq!(
            normalize_length(&Trajectory::new(vec![]), 20),
            Err(NormalizeError::EmptyPrediction)
        );
        assert_eq!(
            normalize_length(&line(3), 0),
            Err(NormalizeError::ZeroTarget)
        );
    }

    #[test]
    fn keeps_dt() {
        let t = Trajectory::with_dt(line(3).points, 0.5).unwrap();
        assert_eq!(normalize_length(&t, 6).unwrap().dt, 0.5);
    }

    #[test]
    fn completeness() {
        assert!(is_complete(&line(20), 20));
        assert!(!is_complete(&line(19), 20));
        let mut t = line(20);
        t.points[7].y = f64::NAN;
        assert!(!is_complete(&t, 20));
    }
}
