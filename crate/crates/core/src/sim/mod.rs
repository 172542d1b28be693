//! Deterministic synthetic world.
//!
//! A [`Scene`] is a bin with DLO instances draped kinematically over a pile
//! height field, plus an explicit entanglement graph. Rendering, the oracle
//! segmenter and the gripper / force / tactile sensor models all read from
//! the scene; randomness always comes from a caller-supplied RNG.

mod gen;
mod gripper;
mod held;
mod oracle;
mod render;

pub use gen::{gen_bin, GenParams};
pub use gripper::{
    close_on, disentangle_primitive, lift, move_tcp, read_fz, simulate_pick, vitac_read,
    GripperState, JawGeometry, Workspace,
};
pub use held::{HeldDlo, HeldParams, TrackingFrame, TrackingView};
pub use oracle::{oracle_segment, OracleSegmenter};
pub use render::{
    add_depth_noise, render_depth, render_scene, Camera, RenderOutput, FLOOR_ID, OCCLUDER_ID,
    WALL_ID,
};

use crate::geometry::{Point3, Polyline3D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("bin cannot hold {n} DLOs of this size: {reason}")]
    CapacityError { n: usize, reason: String },
    #[error("target ({x:.4}, {y:.4}, {z:.4}) is outside the workspace")]
    WorkspaceError { x: f64, y: f64, z: f64 },
    #[error("invalid simulator parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Physical parameters of one DLO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DloSpec {
    pub length: f64,
    pub diameter: f64,
    /// Kilograms.
    pub mass: f64,
    /// Bend resistance in `[0, 1]`; higher values give smoother curves.
    pub stiffness: f64,
    pub has_connectors: bool,
}

impl DloSpec {
    /// High-voltage cable replica used for the bin-picking series.
    pub fn hv_cable() -> Self {
        Self {
            length: 0.6,
            diameter: 0.011,
            mass: 0.13,
            stiffness: 0.5,
            has_connectors: true,
        }
    }

    /// Power cable used for the full assembly run.
    pub fn power_cable() -> Self {
        Self {
            length: 0.6,
            diameter: 0.0095,
            mass: 0.1,
            stiffness: 0.5,
            has_connectors: true,
        }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.length > 0.0
            && self.diameter > 0.0
            && self.mass > 0.0
            && (0.0..=1.0).contains(&self.stiffness);
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidParameter(format!("{self:?}")))
        }
    }
}

impl Default for DloSpec {
    fn default() -> Self {
        Self::hv_cable()
    }
}

/// Axis-aligned bin. The floor spans `[0, length] × [0, width]` at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinDims {
    pub length: f64,
    pub width: f64,
    pub wall_height: f64,
    pub wall_thickness: f64,
}

impl Default for BinDims {
    fn default() -> Self {
        Self {
            length: 0.6,
            width: 0.4,
            wall_height: 0.2,
            wall_thickness: 0.02,
        }
    }
}

impl BinDims {
    pub fn contains_xy(&self, p: &Point3) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.length && p.y <= self.width
    }

    pub fn center(&self) -> Point3 {
        Point3::new(0.5 * self.length, 0.5 * self.width, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceStatus {
    InPile,
    Held,
    Deposited,
    /// Taken out by hand after a failed pick.
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DloInstance {
    pub id: usize,
    pub spec: DloSpec,
    pub centerline: Polyline3D,
    /// Draping order; higher layers were dropped later and lie on top.
    pub layer: usize,
    pub status: InstanceStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementEdge {
    pub a: usize,
    pub b: usize,
    /// Fraction of the neighbor's weight transmitted, in `[0, 1]`.
    pub strength: f64,
    pub crossings: usize,
}

impl EntanglementEdge {
    pub fn other(&self, id: usize) -> Option<usize> {
        if self.a == id {
            Some(self.b)
        } else if self.b == id {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bin: BinDims,
    pub instances: Vec<DloInstance>,
    pub entanglement: Vec<EntanglementEdge>,
    pub seed: u64,
}

impl Scene {
    pub fn empty(bin: BinDims, seed: u64) -> Self {
        Self {
            bin,
            instances: Vec::new(),
            entanglement: Vec::new(),
            seed,
        }
    }

    pub fn in_pile(&self) -> impl Iterator<Item = &DloInstance> {
        self.instances
            .iter()
            .filter(|i| i.status == InstanceStatus::InPile)
    }

    pub fn pile_count(&self) -> usize {
        self.in_pile().count()
    }

    pub fn set_status(&mut self, id: usize, status: InstanceStatus) {
        self.instances[id].status = status;
        if status != InstanceStatus::InPile && status != InstanceStatus::Held {
            // an instance out of the bin no longer couples to anything
            for e in self
                .entanglement
                .iter_mut()
                .filter(|e| e.a == id || e.b == id)
            {
                e.strength = 0.0;
            }
        }
    }

    /// Total mass per status: (pile, held, deposited, removed).
    pub fn mass_by_status(&self) -> (f64, f64, f64, f64) {
        let mut m = (0.0, 0.0, 0.0, 0.0);
        for i in &self.instances {
            match i.status {
                InstanceStatus::InPile => m.0 += i.spec.mass,
                InstanceStatus::Held => m.1 += i.spec.mass,
                InstanceStatus::Deposited => m.2 += i.spec.mass,
                InstanceStatus::Removed => m.3 += i.spec.mass,
            }
        }
        m
    }

    /// Live edges from `id` to instances still in the pile.
    pub fn active_edges(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entanglement.iter().filter_map(move |e| {
            let other = e.other(id)?;
            (e.strength > 0.0 && self.instances[other].status == InstanceStatus::InPile)
                .then_some((other, e.strength))
        })
    }
}

/// Injectable sensor and actuation imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// Per-pixel Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Masks are eroded or dilated by a uniform integer in `[-k, k]` pixels.
    pub mask_boundary_erosion: u32,
    pub spurious_mask_rate: f64,
    pub confidence_sigma: f64,
    /// Newtons.
    pub ft_sigma: f64,
    /// Per-axis position error of TCP moves, meters.
    pub tcp_exec_sigma: f64,
    /// Per-axis noise of tactile in-hand readings, meters.
    pub vitac_sigma: f64,
    /// Per-axis position error of the picking arm's grasp moves, meters.
    pub pick_exec_sigma: f64,
    /// Per-axis translation error of the handover camera extrinsics, meters.
    pub calib_drift_sigma: f64,
    /// Yaw error of the handover camera extrinsics, radians.
    pub calib_rot_sigma: f64,
    /// Per-axis error of short corrective moves, meters.
    pub fine_motion_sigma: f64,
    /// Per-axis lateral error of a co-grasped clip insertion, meters.
    pub mount_exec_sigma: f64,
}

impl SensorNoise {
    pub fn zero() -> Self {
        Self {
            depth_sigma: 0.0,
            mask_boundary_erosion: 0,
            spurious_mask_rate: 0.0,
            confidence_sigma: 0.0,
            ft_sigma: 0.0,
            tcp_exec_sigma: 0.0,
            vitac_sigma: 0.0,
            pick_exec_sigma: 0.0,
            calib_drift_sigma: 0.0,
            calib_rot_sigma: 0.0,
            fine_motion_sigma: 0.0,
            mount_exec_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let vals = [
            self.depth_sigma,
            self.spurious_mask_rate,
            self.confidence_sigma,
            self.ft_sigma,
            self.tcp_exec_sigma,
            self.vitac_sigma,
            self.pick_exec_sigma,
            self.calib_drift_sigma,
            self.calib_rot_sigma,
            self.fine_motion_sigma,
            self.mount_exec_sigma,
        ];
        if vals.iter().all(|v| v.is_finite() && *v >= 0.0) && self.spurious_mask_rate <= 1.0 {
            Ok(())
        } else {
            Err(SimError::InvalidParameter(format!("{self:?}")))
        }
    }
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            depth_sigma: 0.002,
            mask_boundary_erosion: 2,
            spurious_mask_rate: 0.05,
            confidence_sigma: 0.05,
            ft_sigma: 0.05,
            tcp_exec_sigma: 0.005,
            vitac_sigma: 0.0003,
            pick_exec_sigma: 0.002,
            calib_drift_sigma: 0.018,
            calib_rot_sigma: 0.01,
            fine_motion_sigma: 0.0005,
            mount_exec_sigma: 0.001,
        }
    }
}

/// Gaussian sample helper; returns exactly 0 for `sigma == 0`, consuming no
/// randomness, so switching a noise source off never shifts other streams.
pub(crate) fn gauss<R: rand::Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        let n: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        n * sigma
    } else {
        0.0
    }
}
