//! Top-down grasp planning, the static force check and the pick state
//! machine, plus the perception-to-outcome loop over a simulated bin.

mod machine;
mod run;

pub use machine::{PickEvent, PickMachine, PickState};
pub(crate) use run::run_pick_inner;
pub use run::{
    perceive, run_bin, run_pick, BinReport, Perception, PickConfig, PickFailure, PickRngs,
    TrialOutcome,
};

use crate::geometry::{Point3, Polyline3D, Pose};
use crate::segmentation::SegError;
use crate::GRAVITY;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PickError {
    #[error("DLO is vertical at the grasp point")]
    VerticalSegment,
    #[error("skeleton is too short to grasp")]
    ShortSkeleton,
    #[error("event {event} is not valid in state {state:?}")]
    ProtocolError { state: PickState, event: String },
    #[error("invalid pick parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Segmentation(#[from] SegError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PickParams {
    /// Grasp position as a fraction of the selected skeleton's length.
    pub r: f64,
    pub eta_fz: f64,
    pub max_grasp_attempts: u32,
    pub max_disentangle: u32,
    /// Radians.
    pub pendulum_amplitude: f64,
    pub pendulum_cycles: u32,
    /// Jaws count as fully closed below this fraction of the DLO diameter.
    pub w_min_ratio: f64,
    /// Where the static force check happens.
    pub static_position: [f64; 3],
}

impl Default for PickParams {
    fn default() -> Self {
        Self {
            r: 0.5,
            eta_fz: 1.175,
            max_grasp_attempts: 2,
            max_disentangle: 2,
            pendulum_amplitude: 0.3,
            pendulum_cycles: 2,
            w_min_ratio: 0.5,
            static_position: [0.3, 0.2, 0.5],
        }
    }
}

impl PickParams {
    pub fn validate(&self) -> Result<(), PickError> {
        let ok = (0.0..=1.0).contains(&self.r)
            && self.eta_fz >= 1.0
            && self.max_grasp_attempts >= 1
            && self.pendulum_amplitude >= 0.0
            && self.w_min_ratio >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(PickError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Top-down grasp: tilt about X and Y is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub position: Point3,
    /// Rotation about world Z, in (−π, π].
    pub yaw: f64,
}

impl GraspPose {
    pub fn new(position: Point3, yaw: f64) -> Self {
        let mut yaw = yaw % std::f64::consts::TAU;
        if yaw <= -std::f64::consts::PI {
            yaw += std::f64::consts::TAU;
        } else if yaw > std::f64::consts::PI {
            yaw -= std::f64::consts::TAU;
        }
        Self { position, yaw }
    }

    /// Local X along the DLO, local Y the closing axis, local Z up.
    pub fn frame(&self) -> Pose {
        Pose::from_yaw(self.position, self.yaw)
    }
}

/// Static force above which the held load counts as entangled.
pub fn fz_threshold(mass: f64, eta: f64) -> f64 {
    mass * GRAVITY * eta
}

/// Half length of the chord window used for the grasp tangent and height.
const TANGENT_WINDOW: f64 = 0.01;
/// Smallest horizontal share of the tangent for a top-down grasp.
const MIN_HORIZONTAL: f64 = 0.2;

/// Grasp at arc fraction `r` along `s`; the jaws close across the tangent.
///
/// The tangent is the chord over ±1 cm of arc and the grasp height is the
/// median height of the points in that window, which keeps pixel-level
/// noise of a back-projected skeleton out of the pose.
pub fn grasp_from_skeleton(s: &Polyline3D, r: f64) -> Result<GraspPose, PickError> {
    let len = s.arc_length();
    if len <= 1e-6 {
        return Err(PickError::ShortSkeleton);
    }
    let at = r.clamp(0.0, 1.0) * len;
    let (a, b) = (
        (at - TANGENT_WINDOW).max(0.0),
        (at + TANGENT_WINDOW).min(len),
    );
    let chord = s.point_at_arc(b) - s.point_at_arc(a);
    let n = chord.norm();
    if n < 1e-9 || chord.xy().norm() / n < MIN_HORIZONTAL {
        return Err(PickError::VerticalSegment);
    }
    let arc = s.cumulative_arc();
    let mut zs: Vec<f64> = s
        .points()
        .iter()
        .zip(&arc)
        .filter(|(_, &t)| t >= a && t <= b)
        .map(|(p, _)| p.z)
        .collect();
    let p = s.point_at_arc(at);
    let z = if zs.is_empty() {
        p.z
    } else {
        zs.sort_by(f64::total_cmp);
        zs[zs.len() / 2]
    };
    Ok(GraspPose::new(
        Point3::new(p.x, p.y, z),
        chord.y.atan2(chord.x),
    ))
}

/// Like [`grasp_from_skeleton`], re-planning at `r ± 0.1` when the DLO is
/// vertical at `r`.
pub fn grasp_with_replan(s: &Polyline3D, r: f64) -> Result<GraspPose, PickError> {
    let mut last = PickError::VerticalSegment;
    for rr in [r, r + 0.1, r - 0.1] {
        if !(0.0..=1.0).contains(&rr) {
            continue;
        }
        match grasp_from_skeleton(s, rr) {
            Ok(g) => return Ok(g),
            Err(e @ PickError::VerticalSegment) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// TCP waypoints of the pendular disentangling motion: the gripper swings
/// about its own X axis at the static pose, eight waypoints per cycle.
pub fn pendular_primitive(static_pose: &Pose, amplitude: f64, cycles: u32) -> Vec<Pose> {
    if amplitude == 0.0 || cycles == 0 {
        return vec![*static_pose];
    }
    let n = 8 * cycles as usize;
    (0..=n)
        .map(|k| {
            let theta = amplitude * (std::f64::consts::TAU * k as f64 / 8.0).sin();
            let swing =
                nalgebra::Rotation3::from_axis_angle(&crate::geometry::Vec3::x_axis(), theta);
            Pose::new(static_pose.position, static_pose.orientation * swing)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: Point3, b: Point3) -> Polyline3D {
        Polyline3D::new(vec![a, b]).unwrap().resample_pitch(0.005)
    }

    #[test]
    fn threshold_examples() {
        assert!((fz_threshold(0.13, 1.175) - 1.4985).abs() < 1e-4);
        assert!((fz_threshold(0.10, 1.175) - 1.1527).abs() < 1e-4);
        assert!((fz_threshold(0.13, 1.0) - 1.2753).abs() < 1e-12);
    }

    #[test]
    fn grasp_on_straight_dlo() {
        let s = line(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0));
        let g = grasp_from_skeleton(&s, 0.5).unwrap();
        assert!((g.position - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
        assert!(g.yaw.abs() < 1e-12);
        let g = grasp_from_skeleton(&s, 0.9).unwrap();
        assert!((g.position.x - 0.9).abs() < 1e-9);
        let s = line(Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        let g = grasp_from_skeleton(&s, 0.5).unwrap();
        assert!((g.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn vertical_segment_is_rejected() {
        let s = line(Point3::new(0.0, 0.0, 0.0), Point3::new(0.001, 0.0, 0.5));
        assert_eq!(
            grasp_from_skeleton(&s, 0.5),
            Err(PickError::VerticalSegment)
        );
        assert_eq!(grasp_with_replan(&s, 0.5), Err(PickError::VerticalSegment));
    }

    #[test]
    fn replan_moves_off_a_vertical_stretch() {
        let s = Polyline3D::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.45, 0.0, 0.0),
            Point3::new(0.45, 0.0, 0.1),
            Point3::new(0.9, 0.0, 0.1),
        ])
        .unwrap()
        .resample_pitch(0.005);
        // arc 0.5 sits on the riser
        let r = 0.5 / s.arc_length();
        assert_eq!(grasp_from_skeleton(&s, r), Err(PickError::VerticalSegment));
        assert!(grasp_with_replan(&s, r).is_ok());
    }

    #[test]
    fn pendulum_waypoints() {
        let p = Pose::identity_at(Point3::new(0.3, 0.2, 0.5));
        assert_eq!(pendular_primitive(&p, 0.0, 2), vec![p]);
        let w = pendular_primitive(&p, 0.3, 2);
        assert_eq!(w.len(), 17);
        let angles: Vec<f64> = w
            .iter()
            .map(|q| q.orientation.matrix()[(2, 1)].asin())
            .collect();
        let max = angles.iter().copied().fold(f64::MIN, f64::max);
        let min = angles.iter().copied().fold(f64::MAX, f64::min);
        assert!((max - 0.3).abs() < 1e-9 && (min + 0.3).abs() < 1e-9);
        assert!(w.iter().all(|q| q.position == p.position));
    }

    #[test]
    fn yaw_is_normalized() {
        let g = GraspPose::new(Point3::origin(), -std::f64::consts::PI);
        assert_eq!(g.yaw, std::f64::consts::PI);
        assert!(g.frame().orthonormality_error() < 1e-9);
    }
}
