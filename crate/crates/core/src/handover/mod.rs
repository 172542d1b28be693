//! Second-arm grasp planning at an arc offset from the first grasp, TCP-space
//! path planning and the tactile local-correction retry loop.

mod planner;

pub use planner::{
    path_clearance, plan_path, standoff, Obstacle, PlannerParams, World, CHECK_STEP,
};

use crate::geometry::{normal_from_tangent, GeometryError, Point3, Polyline3D, Pose, Vec3};
use crate::sim::{close_on, move_tcp, vitac_read, JawGeometry, SensorNoise, SimError, Workspace};
use nalgebra::{Matrix3, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HandoverError {
    #[error("grasp offset {requested} m exceeds the {available} m left on the DLO")]
    OffsetTooLarge { requested: f64, available: f64 },
    #[error("path planning failed: {0}")]
    PlanFailure(String),
    #[error("invalid handover parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoverParams {
    /// Arc offset of the second grasp from the first, meters.
    pub l_g: f64,
    /// Corrective regrasps allowed after the first attempt.
    pub max_retries: u32,
    /// A handover succeeds when the final gap is at most this, meters.
    pub success_gap: f64,
    /// The loop stops correcting once the measured gap is at most this.
    pub align_tol: f64,
    /// Fraction of the measured offset applied per correction.
    pub gain: f64,
    /// Tactile corrections on: the tracked shape is aligned with the first
    /// arm's reading and the second arm runs the retry loop.
    pub correction: bool,
    /// Pre-grasp standoff along the approach axis, meters.
    pub standoff: f64,
    /// Second arm's start position.
    pub home: [f64; 3],
    pub planner: PlannerParams,
}

impl Default for HandoverParams {
    fn default() -> Self {
        Self {
            l_g: 0.10,
            max_retries: 3,
            success_gap: 0.0093,
            align_tol: 0.002,
            gain: 1.0,
            correction: true,
            standoff: 0.10,
            home: [0.0, -0.6, 0.7],
            planner: PlannerParams::default(),
        }
    }
}

impl HandoverParams {
    pub fn validate(&self) -> Result<(), HandoverError> {
        let ok = self.l_g > 0.0
            && self.success_gap > 0.0
            && self.align_tol >= 0.0
            && self.gain > 0.0
            && self.standoff >= 0.0
            && self.planner.step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(HandoverError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Half window for the tangent chord at the second grasp, meters.
const TANGENT_WINDOW: f64 = 0.01;

/// Grasp frame at arc offset `l_g` from the point of `s` nearest `p_first`,
/// walking toward the end with more DLO left. Columns are the tangent in
/// walking direction, the normal and their cross product.
pub fn second_grasp_pose(
    s: &Polyline3D,
    p_first: &Point3,
    l_g: f64,
) -> Result<Pose, HandoverError> {
    let len = s.arc_length();
    let (_, a0, _) = s.nearest(p_first);
    let (dir, available) = if len - a0 >= a0 {
        (1.0, len - a0)
    } else {
        (-1.0, a0)
    };
    if l_g > available {
        return Err(HandoverError::OffsetTooLarge {
            requested: l_g,
            available,
        });
    }
    let a = a0 + dir * l_g;
    let (lo, hi) = ((a - TANGENT_WINDOW).max(0.0), (a + TANGENT_WINDOW).min(len));
    let chord = (s.point_at_arc(hi) - s.point_at_arc(lo)) * dir;
    let t = Unit::try_new(chord, 1e-12).ok_or(GeometryError::DegenerateTangent { index: 0 })?;
    let n = normal_from_tangent(&t);
    let b = t.cross(&n);
    let axes = Matrix3::from_columns(&[t.into_inner(), n.into_inner(), b]);
    Ok(Pose::from_axes(s.point_at_arc(a), axes)?)
}

/// The second arm and the DLO it reaches for; the DLO stays where the first
/// arm holds it while the jaws open and close.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondArm {
    /// True centerline.
    pub dlo: Polyline3D,
    pub diameter: f64,
    pub jaws: JawGeometry,
    pub noise: SensorNoise,
    pub workspace: Workspace,
}

impl SecondArm {
    pub fn new(dlo: Polyline3D, diameter: f64, noise: SensorNoise) -> Self {
        Self {
            dlo,
            diameter,
            jaws: JawGeometry::handover(),
            noise,
            workspace: Workspace::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub target: Pose,
    pub executed: Pose,
    /// True in-hand offset `(x, z)` in the executed TCP frame.
    pub offset: [f64; 2],
    /// Distance between grasp point and TCP, meters.
    pub gap: f64,
    pub contact: bool,
    pub reading: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandoverFailure {
    OffsetTooLarge,
    PlanFailure,
    /// The DLO is outside the tactile field of view, so there is nothing
    /// to correct from.
    UnrecoverableMiss,
    /// Contact, but the final gap is above the success threshold.
    GapTooLarge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverResult {
    pub success: bool,
    pub failure: Option<HandoverFailure>,
    pub correction: bool,
    pub attempts: Vec<Attempt>,
    pub target: Option<Pose>,
    pub path: Vec<Pose>,
    /// The first arm released the DLO to the second.
    pub transferred: bool,
}

impl HandoverResult {
    fn failed(failure: HandoverFailure, correction: bool) -> Self {
        Self {
            success: false,
            failure: Some(failure),
            correction,
            attempts: Vec::new(),
            target: None,
            path: Vec::new(),
            transferred: false,
        }
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.attempts.iter().map(|a| a.gap).collect()
    }

    pub fn first_gap(&self) -> Option<f64> {
        self.attempts.first().map(|a| a.gap)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.attempts.last().map(|a| a.gap)
    }
}

fn attempt<R: Rng + ?Sized>(arm: &SecondArm, target: Pose, executed: Pose, rng: &mut R) -> Attempt {
    let g = close_on(&arm.dlo, arm.diameter, &executed, &arm.jaws);
    let reading = vitac_read(&g, &arm.jaws, &arm.noise, rng);
    Attempt {
        target,
        executed,
        offset: g.in_hand_offset,
        gap: g.offset_norm(),
        contact: g.attached_instance.is_some(),
        reading,
    }
}

/// Grasp at `target`, then keep moving the TCP onto the measured grasp
/// point and regrasping while the measured gap exceeds the alignment
/// tolerance. With correction off a single attempt is made.
pub fn correction_loop<R: Rng + ?Sized>(
    arm: &SecondArm,
    target: &Pose,
    p: &HandoverParams,
    rng: &mut R,
) -> Result<HandoverResult, HandoverError> {
    p.validate()?;
    let executed = move_tcp(target, arm.noise.tcp_exec_sigma, &arm.workspace, rng)?;
    let mut attempts = vec![attempt(arm, *target, executed, rng)];
    let mut failure = None;
    if p.correction {
        loop {
            let last = attempts[attempts.len() - 1];
            let Some(r) = last.reading else {
                failure = Some(HandoverFailure::UnrecoverableMiss);
                break;
            };
            if r[0].hypot(r[1]) <= p.align_tol || attempts.len() > p.max_retries as usize {
                break;
            }
            let shift = last.executed.orientation * Vec3::new(p.gain * r[0], 0.0, p.gain * r[1]);
            let next = Pose::new(last.executed.position + shift, last.executed.orientation);
            let executed = move_tcp(&next, arm.noise.fine_motion_sigma, &arm.workspace, rng)?;
            attempts.push(attempt(arm, next, executed, rng));
        }
    } else if attempts[0].reading.is_none() {
        failure = Some(HandoverFailure::UnrecoverableMiss);
    }
    let last = attempts[attempts.len() - 1];
    let success = failure.is_none() && last.contact && last.gap <= p.success_gap;
    if !success && failure.is_none() {
        failure = Some(HandoverFailure::GapTooLarge);
    }
    Ok(HandoverResult {
        success,
        failure,
        correction: p.correction,
        attempts,
        target: Some(*target),
        path: Vec::new(),
        transferred: success,
    })
}

/// Plan the second grasp on `shape`, move there and run the correction
/// loop. On success the first arm releases the DLO.
pub fn run_handover<R: Rng + ?Sized>(
    arm: &SecondArm,
    shape: &Polyline3D,
    p_first: &Point3,
    world: &World,
    p: &HandoverParams,
    rng: &mut R,
) -> Result<HandoverResult, HandoverError> {
    p.validate()?;
    let target = match second_grasp_pose(shape, p_first, p.l_g) {
        Ok(t) => t,
        Err(HandoverError::OffsetTooLarge { .. }) => {
            return Ok(HandoverResult::failed(
                HandoverFailure::OffsetTooLarge,
                p.correction,
            ));
        }
        Err(e) => return Err(e),
    };
    let pre = standoff(&target, p.standoff);
    let home = Pose::identity_at(Point3::from(p.home));
    let path = match plan_path(&home, &pre, world, &p.planner, rng) {
        Ok(path) if world.segment_free(&pre.position, &target.position) => path,
        _ => {
            let mut r = HandoverResult::failed(HandoverFailure::PlanFailure, p.correction);
            r.target = Some(target);
            return Ok(r);
        }
    };
    let mut result = correction_loop(arm, &target, p, rng)?;
    result.path = path;
    result.path.push(target);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64) -> Polyline3D {
        Polyline3D::new(vec![Point3::new(0.0, 0.0, 0.3), Point3::new(len, 0.0, 0.3)])
            .unwrap()
            .resample_pitch(0.005)
    }

    #[test]
    fn eq3_frame_on_a_straight_dlo() {
        let s = straight(0.5);
        let g = second_grasp_pose(&s, &Point3::new(0.0, 0.0, 0.3), 0.10).unwrap();
        assert!((g.position - Point3::new(0.10, 0.0, 0.3)).norm() < 1e-12);
        assert!((g.x_axis() - Vec3::x()).norm() < 1e-12);
        assert!((g.y_axis() - Vec3::z()).norm() < 1e-12);
        assert!((g.z_axis() + Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn walks_toward_the_longer_side() {
        let s = straight(0.5);
        let g = second_grasp_pose(&s, &Point3::new(0.45, 0.0, 0.3), 0.10).unwrap();
        assert!((g.position.x - 0.35).abs() < 1e-12);
        assert!((g.x_axis() + Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn offset_beyond_the_end() {
        let s = straight(0.12);
        let r = second_grasp_pose(&s, &Point3::new(0.0, 0.0, 0.3), 0.15);
        assert!(matches!(r, Err(HandoverError::OffsetTooLarge { .. })));
    }

    fn arm(noise: SensorNoise) -> SecondArm {
        SecondArm::new(straight(0.5), 0.0095, noise)
    }

    fn shifted(target: &Pose, approach: f64) -> Pose {
        Pose::new(
            target.position + target.z_axis() * approach,
            target.orientation,
        )
    }

    #[test]
    fn noiseless_grasp_succeeds_first_time() {
        let a = arm(SensorNoise::zero());
        let t = second_grasp_pose(&a.dlo, &Point3::new(0.0, 0.0, 0.3), 0.1).unwrap();
        let mut rng = crate::rng::seeded(4);
        let r = correction_loop(&a, &t, &HandoverParams::default(), &mut rng).unwrap();
        assert!(r.success && r.transferred);
        assert_eq!(r.attempts.len(), 1);
        assert!(r.final_gap().unwrap() < 1e-9);
    }

    #[test]
    fn visible_miss_is_corrected_in_one_step() {
        let a = arm(SensorNoise::zero());
        let t = second_grasp_pose(&a.dlo, &Point3::new(0.0, 0.0, 0.3), 0.1).unwrap();
        let mut rng = crate::rng::seeded(5);
        let r = correction_loop(
            &a,
            &shifted(&t, 0.006),
            &HandoverParams::default(),
            &mut rng,
        )
        .unwrap();
        let gaps = r.gaps();
        assert_eq!(gaps.len(), 2);
        assert!((gaps[0] - 0.006).abs() < 1e-9);
        assert!(gaps[1] < 1e-9);
        assert!(r.success);
    }

    #[test]
    fn miss_outside_the_field_of_view_is_unrecoverable() {
        let a = arm(SensorNoise::zero());
        let t = second_grasp_pose(&a.dlo, &Point3::new(0.0, 0.0, 0.3), 0.1).unwrap();
        let mut rng = crate::rng::seeded(6);
        let r =
            correction_loop(&a, &shifted(&t, 0.02), &HandoverParams::default(), &mut rng).unwrap();
        assert!(!r.success);
        assert_eq!(r.failure, Some(HandoverFailure::UnrecoverableMiss));
        assert!(!r.transferred);
    }

    #[test]
    fn correction_off_takes_one_attempt() {
        let a = arm(SensorNoise::zero());
        let t = second_grasp_pose(&a.dlo, &Point3::new(0.0, 0.0, 0.3), 0.1).unwrap();
        let p = HandoverParams {
            correction: false,
            ..HandoverParams::default()
        };
        let mut rng = crate::rng::seeded(7);
        let r = correction_loop(&a, &shifted(&t, 0.006), &p, &mut rng).unwrap();
        assert_eq!(r.attempts.len(), 1);
        assert!(r.success);
    }

    #[test]
    fn full_handover_in_an_empty_world() {
        let a = arm(SensorNoise::zero());
        let mut rng = crate::rng::seeded(8);
        let r = run_handover(
            &a,
            &a.dlo,
            &Point3::new(0.0, 0.0, 0.3),
            &World::empty(),
            &HandoverParams::default(),
            &mut rng,
        )
        .unwrap();
        assert!(r.success);
        assert!(r.final_gap().unwrap() < 1e-6);
        assert_eq!(r.path.len(), 3);
        let far = HandoverParams {
            l_g: 0.6,
            ..HandoverParams::default()
        };
        let r = run_handover(
            &a,
            &a.dlo,
            &Point3::new(0.0, 0.0, 0.3),
            &World::empty(),
            &far,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.failure, Some(HandoverFailure::OffsetTooLarge));
        assert!(r.attempts.is_empty() && r.path.is_empty());
    }
}
