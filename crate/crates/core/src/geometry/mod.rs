//! Shared geometric and numerical primitives.
//!
//! World frame: the bin floor spans the X-Y plane and Z points up, toward the
//! top-view camera. Depth images store the distance from the camera plane,
//! so a smaller depth value means a higher surface.

mod dbscan;
mod grid;
mod pca;
mod polyfit;
mod polyline;

pub use dbscan::{dbscan, Dbscan};
pub use grid::{connected_components, iou, DepthImage, GridImage, Mask, Pixel};
pub use pca::pca_principal_axis;
pub use polyfit::{fit_polynomial, polyfit_bridge, BridgeFit, PolyFit, K_FIT};
pub(crate) use polyline::normal_from_tangent;
pub use polyline::{hausdorff, normal_at, tangent_at, Polyline3D};

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vec3>;

/// World up direction used for normals and top-down grasp frames.
pub const WORLD_UP: Vec3 = Vector3::new(0.0, 0.0, 1.0);

/// Minimum separation between consecutive polyline points, meters.
pub const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("tangent at index {index} is degenerate (zero chord)")]
    DegenerateTangent { index: usize },
    #[error("index {index} out of range for polyline of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeError {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("orientation is not a proper rotation (orthonormality error {0:e})")]
    NotOrthonormal(f64),
}

/// Rigid pose: position plus a proper rotation whose columns are the local
/// x, y, z axes expressed in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point3,
    pub orientation: Rotation3<f64>,
}

impl Pose {
    pub fn new(position: Point3, orientation: Rotation3<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity_at(position: Point3) -> Self {
        Self::new(position, Rotation3::identity())
    }

    /// Top-down frame rotated by `yaw` about world Z.
    pub fn from_yaw(position: Point3, yaw: f64) -> Self {
        Self::new(
            position,
            Rotation3::from_axis_angle(&Vector3::z_axis(), yaw),
        )
    }

    /// Build a pose from a matrix whose columns are the local axes. Fails
    /// unless the matrix is orthonormal with determinant +1 within 1e-9.
    pub fn from_axes(position: Point3, axes: Matrix3<f64>) -> Result<Self, GeometryError> {
        let err = (axes.transpose() * axes - Matrix3::identity()).amax();
        let det = axes.determinant();
        if !err.is_finite() || err > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotOrthonormal(err.max((det - 1.0).abs())));
        }
        Ok(Self::new(position, Rotation3::from_matrix_unchecked(axes)))
    }

    pub fn x_axis(&self) -> Vec3 {
        self.orientation.matrix().column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.orientation.matrix().column(1).into_owned()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.orientation.matrix().column(2).into_owned()
    }

    /// Express a world point in this pose's local frame.
    pub fn to_local(&self, p: &Point3) -> Vec3 {
        self.orientation.inverse() * (p - self.position)
    }

    /// Map a local-frame vector to a world point.
    pub fn to_world(&self, local: &Vec3) -> Point3 {
        self.position + self.orientation * local
    }

    /// Largest deviation of RᵀR from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.orientation.matrix();
        (m.transpose() * m - Matrix3::identity()).amax()
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    /// Row-major rotation matrix.
    orientation: [[f64; 3]; 3],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = self.orientation.matrix();
        let mut rows = [[0.0; 3]; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: rows,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(d)?;
        let m = Matrix3::from_fn(|r, c| repr.orientation[r][c]);
        let p = Point3::new(repr.position[0], repr.position[1], repr.position[2]);
        Pose::from_axes(p, m).map_err(serde::de::Error::custom)
    }
}

/// Pure translation `T = [I | delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTranslation {
    pub delta: [f64; 3],
}

impl RigidTranslation {
    pub fn new(delta: Vec3) -> Self {
        Self {
            delta: [delta.x, delta.y, delta.z],
        }
    }

    pub fn identity() -> Self {
        Self { delta: [0.0; 3] }
    }

    /// Translation carrying `from` onto `to`.
    pub fn between(from: &Point3, to: &Point3) -> Self {
        Self::new(to - from)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.delta[0], self.delta[1], self.delta[2])
    }

    pub fn magnitude(&self) -> f64 {
        self.vector().norm()
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        p + self.vector()
    }
}

/// Shift every point of `shape` by `t`.
pub fn apply_translation(shape: &Polyline3D, t: &RigidTranslation) -> Polyline3D {
    shape.map_points(|p| t.apply(p))
}

pub(crate) fn point_array(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn yaw_frame_columns() {
        let pose = Pose::from_yaw(Point3::origin(), FRAC_PI_2);
        assert!((pose.x_axis() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((pose.y_axis() - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(pose.orthonormality_error() < 1e-12);
    }

    #[test]
    fn from_axes_rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Pose::from_axes(Point3::origin(), m).is_err());
    }

    #[test]
    fn pose_json_round_trip() {
        let pose = Pose::from_yaw(Point3::new(0.1, 0.2, 0.3), 0.7);
        let s = serde_json::to_string(&pose).unwrap();
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert!((back.position - pose.position).norm() < 1e-15);
        assert!((back.orientation.matrix() - pose.orientation.matrix()).amax() < 1e-15);
    }

    #[test]
    fn translation_between_points() {
        let pc = Point3::new(0.5, 0.2, 0.3);
        let pc_est = Point3::new(0.48, 0.2, 0.3);
        let t = RigidTranslation::between(&pc_est, &pc);
        assert!((t.vector() - Vec3::new(0.02, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_translation_is_identity() {
        let s =
            Polyline3D::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0)]).unwrap();
        let out = apply_translation(&s, &RigidTranslation::identity());
        assert_eq!(out, s);
    }

    #[test]
    fn translation_preserves_arc_length() {
        let s = Polyline3D::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.3, 0.1, 0.0),
            Point3::new(0.5, 0.4, 0.2),
        ])
        .unwrap();
        let out = apply_translation(&s, &RigidTranslation::new(Vec3::new(0.02, 0.0, 0.0)));
        assert!((out.arc_length() - s.arc_length()).abs() < 1e-12);
    }
}
