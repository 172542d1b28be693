use super::render::{BoxOccluder, Rasterizer};
use super::{
    gauss, DloSpec, GripperState, OracleSegmenter, RenderOutput, SensorNoise, SimError, FLOOR_ID,
};
use crate::geometry::{DepthImage, Mask, Point3, Polyline3D, Pose, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape and camera parameters for a DLO held in the air by the first arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeldParams {
    pub spec: DloSpec,
    /// Mean height of the held DLO above the table, meters.
    pub hold_height: f64,
    /// Largest sag below `hold_height` at mid-length, meters.
    pub max_sag: f64,
    /// Curvature noise of the generated shape, 1/m per step.
    pub bend_sigma: f64,
    /// Heading never strays further than this from the initial direction.
    pub max_heading: f64,
    /// Grasp position of the first arm as a fraction of arc length.
    pub grasp_ratio: f64,
    /// Gripper body seen from above: half extent along and across the DLO.
    pub gripper_half: (f64, f64),
    pub pitch: f64,
}

impl Default for HeldParams {
    fn default() -> Self {
        Self {
            spec: DloSpec::power_cable(),
            hold_height: 0.35,
            max_sag: 0.02,
            bend_sigma: 0.6,
            max_heading: std::f64::consts::FRAC_PI_4,
            grasp_ratio: 0.9,
            gripper_half: (0.02, 0.045),
            pitch: 0.001,
        }
    }
}

/// Ground truth of a held DLO: centerline, the first arm's TCP and the
/// DLO center relative to that TCP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldDlo {
    pub spec: DloSpec,
    pub centerline: Polyline3D,
    pub grasp_arc: f64,
    pub tcp: Pose,
    /// (x, z) in the TCP frame, same convention as [`GripperState`].
    pub in_hand_offset: [f64; 2],
}

/// One camera frame plus the robot-side readings that go with it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingFrame {
    pub depth: DepthImage,
    pub mask: Mask,
    /// First arm TCP as reported by the robot.
    pub tcp: Pose,
    pub vitac: Option<[f64; 2]>,
}

/// A frame together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingView {
    pub frame: TrackingFrame,
    /// Noise-free render in the (possibly miscalibrated) camera frame.
    pub render: RenderOutput,
    /// The centerline as the miscalibrated camera sees it.
    pub observed: Polyline3D,
    /// Rigid map from true to observed coordinates.
    pub extrinsic_error: Pose,
}

impl HeldDlo {
    /// Held DLO with a given centerline, gripped at `grasp_arc`.
    pub fn from_centerline(
        spec: DloSpec,
        centerline: Polyline3D,
        grasp_arc: f64,
        in_hand_offset: [f64; 2],
    ) -> Self {
        let p = centerline.point_at_arc(grasp_arc);
        let t = centerline.tangent_at_arc(grasp_arc);
        let tcp_frame = Pose::from_yaw(p, t.y.atan2(t.x));
        let off = tcp_frame.orientation * Vec3::new(in_hand_offset[0], 0.0, in_hand_offset[1]);
        Self {
            spec,
            centerline,
            grasp_arc,
            tcp: Pose::new(p - off, tcp_frame.orientation),
            in_hand_offset,
        }
    }

    /// Random gently curved shape; the heading is bounded so the curve is
    /// monotone along its initial direction.
    pub fn generate<R: Rng + ?Sized>(
        params: &HeldParams,
        in_hand_offset: [f64; 2],
        rng: &mut R,
    ) -> Result<Self, SimError> {
        params.spec.validate()?;
        if !(0.0..=1.0).contains(&params.grasp_ratio) {
            return Err(SimError::InvalidParameter(format!(
                "grasp_ratio {}",
                params.grasp_ratio
            )));
        }
        let step = 0.005;
        let len = params.spec.length;
        let n = (len / step).ceil().max(2.0) as usize;
        let step = len / n as f64;
        let yaw0 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let sag = rng.random_range(0.0..=params.max_sag.max(0.0));
        let (mut heading, mut kappa) = (0.0f64, 0.0f64);
        let (mut x, mut y) = (0.0, 0.0);
        let mut pts = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = k as f64 * step;
            let z = params.hold_height - sag * (std::f64::consts::PI * s / len).sin();
            pts.push(Point3::new(x, y, z));
            kappa = (0.9 * kappa + gauss(rng, params.bend_sigma)).clamp(-4.0, 4.0);
            heading += kappa * step;
            if heading.abs() > params.max_heading {
                heading = heading.clamp(-params.max_heading, params.max_heading);
                kappa = 0.0;
            }
            let h = yaw0 + heading;
            x += step * h.cos();
            y += step * h.sin();
        }
        let centerline = Polyline3D::new(pts)?;
        Ok(Self::from_centerline(
            params.spec,
            centerline,
            params.grasp_ratio * len,
            in_hand_offset,
        ))
    }

    /// True DLO center under the first arm's jaws.
    pub fn grasp_center(&self) -> Point3 {
        self.centerline.point_at_arc(self.grasp_arc)
    }

    /// Gripper state of the first arm for sensor reads.
    pub fn gripper(&self) -> GripperState {
        GripperState {
            closure_width: self.spec.diameter,
            attached_instance: Some(0),
            extra_instances: Vec::new(),
            in_hand_offset: self.in_hand_offset,
            held: vec![0],
        }
    }

    /// Top-view frame. Calibration error moves the whole observed world
    /// rigidly about the TCP; the tactile reading is in the gripper frame
    /// and does not see it.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        params: &HeldParams,
        noise: &SensorNoise,
        rng: &mut R,
    ) -> TrackingView {
        let yaw_err = gauss(rng, noise.calib_rot_sigma);
        let shift = Vec3::new(
            gauss(rng, noise.calib_drift_sigma),
            gauss(rng, noise.calib_drift_sigma),
            gauss(rng, noise.calib_drift_sigma),
        );
        let pivot = self.tcp.position;
        let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), yaw_err);
        let to_cam = |p: &Point3| pivot + rot * (p - pivot) + shift;
        let observed = self.centerline.map_points(to_cam);
        let tcp_obs = to_cam(&self.tcp.position);
        let yaw = {
            let x = self.tcp.x_axis();
            x.y.atan2(x.x) + yaw_err
        };
        let occ = BoxOccluder {
            center: (tcp_obs.x, tcp_obs.y),
            yaw,
            half: params.gripper_half,
            top: tcp_obs.z + 0.1,
        };
        let mut hull: Vec<Point3> = observed.points().to_vec();
        let reach = params.gripper_half.0.hypot(params.gripper_half.1);
        hull.push(tcp_obs + Vec3::new(reach, reach, 0.0));
        hull.push(tcp_obs - Vec3::new(reach, reach, 0.0));
        let cam = super::Camera::covering(&hull, 0.02, params.pitch);
        let mut r = Rasterizer::new(cam, 1, |_, _| (0.0, FLOOR_ID));
        r.tube(0, &observed, self.spec.radius());
        r.occluder(&occ);
        let render = r.finish();

        let mut depth = render.depth.clone();
        super::add_depth_noise(&mut depth, noise.depth_sigma, rng);
        let mask = {
            let mut oracle = OracleSegmenter::new(&render);
            match prompt_pixel(&render) {
                Some(p) => oracle.segment_one(p, noise, rng).mask,
                None => render.ids.blank_like(false),
            }
        };
        let vitac = super::vitac_read(&self.gripper(), &super::JawGeometry::picking(), noise, rng);
        TrackingView {
            frame: TrackingFrame {
                depth,
                mask,
                tcp: self.tcp,
                vitac,
            },
            render,
            observed,
            extrinsic_error: Pose::new(pivot - rot * pivot.coords + shift, rot),
        }
    }
}

/// A visible DLO pixel with the most visible neighbors, first in row order.
fn prompt_pixel(render: &RenderOutput) -> Option<crate::geometry::Pixel> {
    let ids = &render.ids;
    let mut best: Option<(usize, crate::geometry::Pixel)> = None;
    for (k, &v) in ids.values.iter().enumerate() {
        if v != 0 {
            continue;
        }
        let p = ids.pixel_of(k);
        let support = ids
            .neighbors8(p)
            .filter(|q| *ids.get(q.x, q.y) == 0)
            .count();
        if best.is_none_or(|(s, _)| support > s) {
            best = Some((support, p));
            if support == 8 {
                break;
            }
        }
    }
    best.map(|b| b.1)
}
