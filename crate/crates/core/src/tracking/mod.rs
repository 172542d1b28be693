//! Shape reconstruction of a held DLO from a partial point sequence and
//! its correction against the tactile grasp measurement.

use crate::geometry::{
    apply_translation, dbscan, pca_principal_axis, polyfit_bridge, DepthImage, GeometryError, Mask,
    Point3, Polyline3D, Pose, RigidTranslation, Vec3, K_FIT,
};
use crate::segmentation::{mask_to_raw_shape, SegError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("tracking lost: no usable points")]
    TrackingLost,
    #[error(transparent)]
    Segmentation(#[from] SegError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// DBSCAN neighborhood radius, meters.
    pub eps: f64,
    /// DBSCAN density threshold.
    pub min_pts: usize,
    /// Bridge polynomial degree.
    pub degree: usize,
    /// Points per side used to fit a bridge.
    pub k_fit: usize,
    /// Spacing of the output shape, meters.
    pub pitch: f64,
    /// Skeleton spur pruning length, pixels.
    pub prune_min: usize,
}

impl TrackParams {
    pub fn for_diameter(d: f64) -> Self {
        Self {
            eps: 1.5 * d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if self.eps > 0.0 && self.min_pts >= 1 && self.pitch > 0.0 {
            Ok(())
        } else {
            Err(GeometryError::DegenerateInput(format!("{self:?}")).into())
        }
    }
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            eps: 1.5 * 0.0095,
            min_pts: 5,
            degree: 3,
            k_fit: K_FIT,
            pitch: 0.005,
            prune_min: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Points ordered along the principal axis.
    pub points: Vec<Point3>,
    /// Projection range on the principal axis.
    pub span: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    /// Bridges the gap after cluster `gap`.
    pub gap: usize,
    pub line: Polyline3D,
}

impl Bridge {
    pub fn midpoint(&self) -> Point3 {
        self.line.point_at_fraction(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedShape {
    pub shape: Polyline3D,
    pub clusters: Vec<Cluster>,
    pub bridges: Vec<Bridge>,
    pub axis: Vec3,
    pub correction: RigidTranslation,
    /// Whether a tactile correction has been applied.
    pub corrected: bool,
}

fn cluster_polyline(points: &[Point3], pitch: f64) -> Vec<Point3> {
    match Polyline3D::from_points_dedup(points.iter().copied()) {
        Ok(line) if line.arc_length() > pitch => line.resample_pitch(pitch).into_points(),
        Ok(line) => line.into_points(),
        Err(_) => points.to_vec(),
    }
}

/// Density clustering, ordering along the principal axis and polynomial
/// bridges over the gaps between consecutive clusters.
pub fn reconstruct(raw: &Polyline3D, p: &TrackParams) -> Result<ReconstructedShape, TrackError> {
    p.validate()?;
    let pts = raw.points();
    let db = dbscan(pts, p.eps, p.min_pts);
    if db.clusters.is_empty() {
        return Err(TrackError::TrackingLost);
    }
    let kept: Vec<Point3> = db.clusters.iter().flatten().map(|&i| pts[i]).collect();
    let axis = pca_principal_axis(&kept).map_err(|_| TrackError::TrackingLost)?;
    let proj = |q: &Point3| q.coords.dot(&axis);

    let mut clusters: Vec<(f64, Cluster)> = db
        .clusters
        .iter()
        .map(|members| {
            // members are in input order, which follows the curve
            let mut c: Vec<Point3> = members.iter().map(|&i| pts[i]).collect();
            if proj(&c[c.len() - 1]) < proj(&c[0]) {
                c.reverse();
            }
            let mean = c.iter().map(proj).sum::<f64>() / c.len() as f64;
            let (lo, hi) = c
                .iter()
                .map(proj)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| {
                    (a.min(t), b.max(t))
                });
            let points = cluster_polyline(&c, p.pitch);
            (
                mean,
                Cluster {
                    points,
                    span: (lo, hi),
                },
            )
        })
        .collect();
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0));
    let clusters: Vec<Cluster> = clusters.into_iter().map(|c| c.1).collect();

    let mut bridges = Vec::new();
    let mut all: Vec<Point3> = Vec::new();
    for (i, c) in clusters.iter().enumerate() {
        all.extend_from_slice(&c.points);
        if let Some(next) = clusters.get(i + 1) {
            let k = p.k_fit.max(1);
            let tail = &c.points[c.points.len().saturating_sub(k)..];
            let head = &next.points[..k.min(next.points.len())];
            let window: Vec<Point3> = tail.iter().chain(head).copied().collect();
            let mut local = pca_principal_axis(&window).unwrap_or(axis);
            if local.dot(&axis) < 0.0 {
                local = -local;
            }
            let line = polyfit_bridge(tail, head, &local, p.degree)?;
            let inner = line.points();
            if inner.len() > 2 {
                all.extend_from_slice(&inner[1..inner.len() - 1]);
            }
            bridges.push(Bridge { gap: i, line });
        }
    }
    let joined = Polyline3D::from_points_dedup(all).map_err(|_| TrackError::TrackingLost)?;
    let shape = joined.resample_pitch(p.pitch);
    Ok(ReconstructedShape {
        shape,
        clusters,
        bridges,
        axis,
        correction: RigidTranslation::identity(),
        corrected: false,
    })
}

/// Tactile in-hand reading `(x, z)` as a TCP-frame vector.
pub fn in_hand_vector(reading: [f64; 2]) -> Vec3 {
    Vec3::new(reading[0], 0.0, reading[1])
}

/// DLO center under the gripper in world coordinates.
pub fn grasp_center(tcp: &Pose, in_hand: &Vec3) -> Point3 {
    tcp.position + tcp.orientation * in_hand
}

/// Where the reconstruction believes the grasped point is: the midpoint of
/// the bridge nearest `p_c`, since the gripper itself hides that stretch;
/// without bridges, the nearest point of the shape.
pub fn match_missing_center(rec: &ReconstructedShape, p_c: &Point3) -> Result<Point3, TrackError> {
    if rec.shape.is_empty() {
        return Err(TrackError::TrackingLost);
    }
    let best = rec
        .bridges
        .iter()
        .map(Bridge::midpoint)
        .min_by(|a, b| (a - p_c).norm().total_cmp(&(b - p_c).norm()));
    Ok(match best {
        Some(m) => m,
        None => rec.shape.nearest(p_c).0,
    })
}

fn translate_rec(rec: &ReconstructedShape, t: &RigidTranslation) -> ReconstructedShape {
    let mv = |pts: &[Point3]| pts.iter().map(|q| t.apply(q)).collect::<Vec<_>>();
    ReconstructedShape {
        shape: apply_translation(&rec.shape, t),
        clusters: rec
            .clusters
            .iter()
            .map(|c| {
                let d = t.vector().dot(&rec.axis);
                Cluster {
                    points: mv(&c.points),
                    span: (c.span.0 + d, c.span.1 + d),
                }
            })
            .collect(),
        bridges: rec
            .bridges
            .iter()
            .map(|b| Bridge {
                gap: b.gap,
                line: apply_translation(&b.line, t),
            })
            .collect(),
        axis: rec.axis,
        correction: RigidTranslation::new(rec.correction.vector() + t.vector()),
        corrected: true,
    }
}

/// Translate the whole reconstruction so its estimated grasp point lands on
/// the measured one.
pub fn correct(rec: &ReconstructedShape, p_c: &Point3) -> Result<ReconstructedShape, TrackError> {
    let p_tilde = match_missing_center(rec, p_c)?;
    Ok(translate_rec(
        rec,
        &RigidTranslation::between(&p_tilde, p_c),
    ))
}

/// Full per-frame pipeline. Without a tactile reading the shape is
/// returned uncorrected.
pub fn track_frame(
    depth: &DepthImage,
    mask: &Mask,
    tcp: &Pose,
    vitac: Option<[f64; 2]>,
    p: &TrackParams,
) -> Result<ReconstructedShape, TrackError> {
    let raw = mask_to_raw_shape(mask, depth, p.prune_min)?;
    let rec = reconstruct(&raw, p)?;
    match vitac {
        Some(r) => correct(&rec, &grasp_center(tcp, &in_hand_vector(r))),
        None => Ok(rec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hausdorff;

    fn line_pts(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<Point3> {
        (0..n)
            .map(|i| {
                let x = a + (b - a) * i as f64 / (n - 1) as f64;
                Point3::new(x, f(x), 0.3)
            })
            .collect()
    }

    #[test]
    fn gap_free_input_is_reproduced() {
        let pts = line_pts(0.0, 0.5, 501, |x| 0.1 * x * x);
        let raw = Polyline3D::new(pts).unwrap();
        let rec = reconstruct(&raw, &TrackParams::default()).unwrap();
        assert!(rec.bridges.is_empty());
        assert!(hausdorff(&rec.shape, &raw) < 0.001);
    }

    #[test]
    fn straight_gap_and_outliers() {
        let mut pts = line_pts(0.0, 0.3, 301, |_| 0.0);
        pts.extend(line_pts(0.4, 0.7, 301, |_| 0.0));
        for k in 0..5 {
            pts.push(Point3::new(0.1 * k as f64, 0.5, 0.3));
        }
        let raw = Polyline3D::new(pts).unwrap();
        let rec = reconstruct(&raw, &TrackParams::default()).unwrap();
        assert_eq!(rec.clusters.len(), 2);
        assert_eq!(rec.bridges.len(), 1);
        for q in rec.bridges[0].line.points() {
            assert!(q.y.abs() < 1e-6 && (q.z - 0.3).abs() < 1e-6);
        }
        assert!(rec.shape.points().iter().all(|q| q.y.abs() < 1e-6));
    }

    #[test]
    fn parabola_with_two_gaps() {
        let f = |x: f64| 0.8 * (x - 0.3) * (x - 0.3);
        let mut pts = line_pts(0.0, 0.15, 151, f);
        pts.extend(line_pts(0.22, 0.4, 181, f));
        pts.extend(line_pts(0.47, 0.6, 131, f));
        let raw = Polyline3D::new(pts).unwrap();
        let rec = reconstruct(&raw, &TrackParams::default()).unwrap();
        assert_eq!(rec.bridges.len(), 2);
        let truth = Polyline3D::new(line_pts(0.0, 0.6, 601, f)).unwrap();
        assert!(hausdorff(&rec.shape, &truth) < 0.002);
    }

    #[test]
    fn grasp_center_examples() {
        let id = Pose::identity_at(Point3::origin());
        assert_eq!(
            grasp_center(&id, &Vec3::new(0.01, 0.0, 0.0)),
            Point3::new(0.01, 0.0, 0.0)
        );
        let yawed = Pose::from_yaw(Point3::new(1.0, 0.0, 0.0), std::f64::consts::FRAC_PI_2);
        let c = grasp_center(&yawed, &Vec3::new(0.01, 0.0, 0.0));
        assert!((c - Point3::new(1.0, 0.01, 0.0)).norm() < 1e-12);
        assert_eq!(grasp_center(&yawed, &Vec3::zeros()), yawed.position);
    }

    fn two_gap_rec() -> ReconstructedShape {
        let mut pts = line_pts(0.0, 0.25, 251, |_| 0.0);
        pts.extend(line_pts(0.35, 0.65, 301, |_| 0.0));
        pts.extend(line_pts(0.75, 1.0, 251, |_| 0.0));
        reconstruct(&Polyline3D::new(pts).unwrap(), &TrackParams::default()).unwrap()
    }

    #[test]
    fn nearest_bridge_midpoint_is_matched() {
        let rec = two_gap_rec();
        let m = match_missing_center(&rec, &Point3::new(0.68, 0.0, 0.3)).unwrap();
        assert!((m - Point3::new(0.7, 0.0, 0.3)).norm() < 1e-6);
        let m = match_missing_center(&rec, &Point3::new(0.32, 0.0, 0.3)).unwrap();
        assert!((m - Point3::new(0.3, 0.0, 0.3)).norm() < 1e-6);
    }

    #[test]
    fn fallback_without_bridges() {
        let raw = Polyline3D::new(line_pts(0.0, 0.5, 501, |_| 0.0)).unwrap();
        let rec = reconstruct(&raw, &TrackParams::default()).unwrap();
        let m = match_missing_center(&rec, &Point3::new(0.2, 0.01, 0.3)).unwrap();
        assert!((m - Point3::new(0.2, 0.0, 0.3)).norm() < 1e-9);
    }

    #[test]
    fn correction_is_exact_and_idempotent() {
        let rec = two_gap_rec();
        let p_c = Point3::new(0.32, 0.01, 0.31);
        let p_tilde = match_missing_center(&rec, &p_c).unwrap();
        let once = correct(&rec, &p_c).unwrap();
        assert!((once.correction.apply(&p_tilde) - p_c).norm() < 1e-12);
        assert!((once.shape.arc_length() - rec.shape.arc_length()).abs() < 1e-12);
        let twice = correct(&once, &p_c).unwrap();
        assert!(hausdorff(&once.shape, &twice.shape) < 1e-12);
        let same = correct(&rec, &p_tilde).unwrap();
        assert!(same.correction.magnitude() < 1e-15);
    }
}
