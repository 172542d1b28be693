//! Clip mounting: for each fixture, both mounting arms co-grasp a DLO
//! segment, carry it over the clip and press it in. Insertion succeeds when
//! the segment lands within the clip's tolerance of the clip axis.

use crate::geometry::{Point3, Polyline3D, Pose, Vec3};
use crate::handover::{plan_path, standoff, HandoverError, PlannerParams, World};
use crate::sim::{gauss, SensorNoise};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MountError {
    #[error("fixture {id} is unreachable: {reason}")]
    PlanFailure { id: usize, reason: String },
    #[error("invalid fixture {id}: {reason}")]
    InvalidFixture { id: usize, reason: String },
    #[error("invalid mounting parameters: {0}")]
    InvalidParams(String),
}

/// A clip; the DLO must end up along the pose's local X through its origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: usize,
    pub pose: Pose,
    pub slot_width: f64,
    pub tolerance: f64,
}

impl Fixture {
    pub fn validate(&self, diameter: f64) -> Result<(), MountError> {
        if self.slot_width < diameter || self.tolerance < 0.0 {
            return Err(MountError::InvalidFixture {
                id: self.id,
                reason: format!("slot {} for diameter {diameter}", self.slot_width),
            });
        }
        Ok(())
    }

    /// Three clips in a row along +Y at table height, 10 mm slots.
    pub fn default_rig() -> Vec<Fixture> {
        (0..3)
            .map(|i| Fixture {
                id: i,
                pose: Pose::identity_at(Point3::new(0.6, -0.2 + 0.2 * i as f64, 0.1)),
                slot_width: 0.010,
                tolerance: 0.003,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MountParams {
    /// Arms grasp this far either side of the segment center, meters.
    pub cograsp_half: f64,
    /// Arc spacing between the segments of consecutive fixtures, meters.
    pub segment_step: f64,
    /// Approach height above each grasp target, meters.
    pub standoff: f64,
    pub home_a: [f64; 3],
    pub home_b: [f64; 3],
    pub planner: PlannerParams,
}

impl Default for MountParams {
    fn default() -> Self {
        Self {
            cograsp_half: 0.04,
            segment_step: 0.12,
            standoff: 0.1,
            home_a: [0.4, -0.5, 0.6],
            home_b: [0.4, 0.5, 0.6],
            planner: PlannerParams::default(),
        }
    }
}

impl MountParams {
    pub fn validate(&self) -> Result<(), MountError> {
        let ok = self.cograsp_half > 0.0 && self.segment_step >= 2.0 * self.cograsp_half;
        if ok {
            Ok(())
        } else {
            Err(MountError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixturePlan {
    pub fixture: Fixture,
    /// Arc range of the co-grasped segment; `None` when the DLO runs out.
    pub segment: Option<(f64, f64)>,
    pub target_a: Pose,
    pub target_b: Pose,
    pub path_a: Vec<Pose>,
    pub path_b: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountPlan {
    pub fixtures: Vec<FixturePlan>,
}

/// Segment and approach plan for every fixture, in the given order.
///
/// Segments start centered on the first arm's grasp at arc `s_hold` and
/// step along the DLO toward the end with more length left.
pub fn plan_mount<R: Rng + ?Sized>(
    s: &Polyline3D,
    s_hold: f64,
    diameter: f64,
    fixtures: &[Fixture],
    world: &World,
    p: &MountParams,
    rng: &mut R,
) -> Result<MountPlan, MountError> {
    p.validate()?;
    let len = s.arc_length();
    let dir = if len - s_hold >= s_hold { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(fixtures.len());
    for (k, f) in fixtures.iter().enumerate() {
        f.validate(diameter)?;
        let center = s_hold + dir * p.segment_step * k as f64;
        let (lo, hi) = (center - p.cograsp_half, center + p.cograsp_half);
        let segment = (lo >= 0.0 && hi <= len).then_some((lo, hi));
        let x = f.pose.x_axis();
        let target_a = Pose::new(f.pose.position - x * p.cograsp_half, f.pose.orientation);
        let target_b = Pose::new(f.pose.position + x * p.cograsp_half, f.pose.orientation);
        let mut paths = Vec::with_capacity(2);
        for (home, target) in [(p.home_a, target_a), (p.home_b, target_b)] {
            let above = standoff(&target, p.standoff);
            let path = plan_path(
                &Pose::identity_at(Point3::from(home)),
                &above,
                world,
                &p.planner,
                rng,
            )
            .and_then(|mut path| {
                if world.segment_free(&above.position, &target.position) {
                    path.push(target);
                    Ok(path)
                } else {
                    Err(HandoverError::PlanFailure("final approach blocked".into()))
                }
            })
            .map_err(|e| MountError::PlanFailure {
                id: f.id,
                reason: e.to_string(),
            })?;
            paths.push(path);
        }
        let path_b = paths.pop().unwrap_or_default();
        let path_a = paths.pop().unwrap_or_default();
        out.push(FixturePlan {
            fixture: *f,
            segment,
            target_a,
            target_b,
            path_a,
            path_b,
        });
    }
    Ok(MountPlan { fixtures: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MountFailure {
    /// Not enough DLO left around the segment for the clip.
    FixtureMiss,
    /// Placed outside the insertion tolerance.
    Misaligned,
    /// An executed path was not collision-free.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureOutcome {
    pub id: usize,
    pub success: bool,
    pub failure: Option<MountFailure>,
    /// Lateral offset of the segment from the clip axis, clip frame (y, z).
    pub residual: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountReport {
    pub fixtures: Vec<FixtureOutcome>,
}

impl MountReport {
    pub fn all_mounted(&self) -> bool {
        self.fixtures.iter().all(|f| f.success)
    }
}

/// Lateral placement error of one insertion. Both arms move in lock-step
/// with the coordinator, so the pair shares one placement error.
pub fn insertion_residual<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> [f64; 2] {
    [gauss(rng, sigma), gauss(rng, sigma)]
}

/// Success probability of a 2D isotropic Gaussian error landing within
/// `tolerance` of the axis.
pub fn insertion_probability(tolerance: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    1.0 - (-(tolerance * tolerance) / (2.0 * sigma * sigma)).exp()
}

/// Run the plan fixture by fixture; each outcome is recorded once and never
/// revisited.
pub fn execute_mount<R: Rng + ?Sized>(
    plan: &MountPlan,
    world: &World,
    noise: &SensorNoise,
    rng: &mut R,
) -> MountReport {
    let mut fixtures = Vec::with_capacity(plan.fixtures.len());
    for fp in &plan.fixtures {
        let outcome = if fp.segment.is_none() {
            FixtureOutcome {
                id: fp.fixture.id,
                success: false,
                failure: Some(MountFailure::FixtureMiss),
                residual: None,
            }
        } else if !world.path_free(&fp.path_a[..fp.path_a.len().saturating_sub(1)])
            || !world.path_free(&fp.path_b[..fp.path_b.len().saturating_sub(1)])
        {
            FixtureOutcome {
                id: fp.fixture.id,
                success: false,
                failure: Some(MountFailure::Collision),
                residual: None,
            }
        } else {
            let r = insertion_residual(noise.mount_exec_sigma, rng);
            let ok = r[0].hypot(r[1]) <= fp.fixture.tolerance;
            FixtureOutcome {
                id: fp.fixture.id,
                success: ok,
                failure: (!ok).then_some(MountFailure::Misaligned),
                residual: Some(r),
            }
        };
        fixtures.push(outcome);
    }
    MountReport { fixtures }
}

/// World-frame residual vector of an outcome.
pub fn residual_world(f: &Fixture, r: [f64; 2]) -> Vec3 {
    f.pose.orientation * Vec3::new(0.0, r[0], r[1])
}
