use super::{gauss, InstanceStatus, Scene, SensorNoise, SimError};
use crate::geometry::{Point3, Polyline3D, Pose, Vec3};
use crate::GRAVITY;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Entanglement edges weaker than this after a primitive come loose.
pub const BREAK_STRENGTH: f64 = 0.3;
/// Strength multiplier applied by each disentangling primitive.
pub const PRIMITIVE_DECAY: f64 = 0.5;

/// Two-finger jaw volume in the grasp frame: local x along the fingers'
/// width, y along the closing direction, z along the approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JawGeometry {
    pub half_length: f64,
    /// Half of the maximum opening.
    pub open_half: f64,
    /// Half height of the finger pads.
    pub pad_half: f64,
    /// Largest |z| offset at which a DLO survives the lift.
    pub secure_half: f64,
    /// Largest in-hand offset the tactile sensor can image.
    pub vitac_range: f64,
}

impl JawGeometry {
    /// Parallel jaws of the picking arm.
    pub fn picking() -> Self {
        Self {
            half_length: 0.01,
            open_half: 0.015,
            pad_half: 0.006,
            secure_half: 0.0045,
            vitac_range: 0.0093,
        }
    }

    /// Jaws of the receiving arm during handover.
    pub fn handover() -> Self {
        Self {
            half_length: 0.01,
            open_half: 0.02,
            pad_half: 0.02,
            secure_half: 0.02,
            vitac_range: 0.0093,
        }
    }
}

impl Default for JawGeometry {
    fn default() -> Self {
        Self::picking()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GripperState {
    /// Jaw separation after closing; 0 when fully closed.
    pub closure_width: f64,
    /// Instance nearest the closing line among those captured.
    pub attached_instance: Option<usize>,
    /// Further instances trapped between the jaws.
    pub extra_instances: Vec<usize>,
    /// DLO center relative to the TCP in the jaw plane, (x, z) in meters.
    pub in_hand_offset: [f64; 2],
    /// Instances lifted out of the pile.
    pub held: Vec<usize>,
}

impl GripperState {
    pub fn captured(&self) -> impl Iterator<Item = usize> + '_ {
        self.attached_instance
            .into_iter()
            .chain(self.extra_instances.iter().copied())
    }

    pub fn is_multi(&self) -> bool {
        self.attached_instance.is_some() && !self.extra_instances.is_empty()
    }

    pub fn offset_norm(&self) -> f64 {
        self.in_hand_offset[0].hypot(self.in_hand_offset[1])
    }
}

/// Does segment `a`→`b` (local frame) pass through the jaw box?
fn segment_hits_box(a: &Vec3, b: &Vec3, half: &Vec3) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = b - a;
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if a[k].abs() > half[k] {
                return false;
            }
            continue;
        }
        let (mut lo, mut hi) = ((-half[k] - a[k]) / d[k], (half[k] - a[k]) / d[k]);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Closest approach of a local-frame polyline to the closing (local y)
/// axis: the (x, z) of the nearest point.
pub(crate) fn nearest_to_closing_line(local: &[Vec3]) -> [f64; 2] {
    let mut best = [f64::INFINITY, f64::INFINITY];
    let mut best_d = f64::INFINITY;
    for w in local.windows(2) {
        let (p, q) = ((w[0].x, w[0].z), (w[1].x, w[1].z));
        let (ex, ez) = (q.0 - p.0, q.1 - p.1);
        let len2 = ex * ex + ez * ez;
        let t = if len2 > 0.0 {
            (-(p.0 * ex + p.1 * ez) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = (p.0 + t * ex, p.1 + t * ez);
        let d = c.0.hypot(c.1);
        if d < best_d {
            best_d = d;
            best = [c.0, c.1];
        }
    }
    best
}

/// Close the jaws on a single DLO that is held elsewhere (instance 0).
/// The in-hand offset is filled in even when the jaws miss, so callers can
/// still report how far off the grasp was.
pub fn close_on(
    line: &Polyline3D,
    diameter: f64,
    grasp: &Pose,
    jaws: &JawGeometry,
) -> GripperState {
    match capture(&[(0, line)], grasp, jaws).first() {
        Some(&(_, offset)) => GripperState {
            closure_width: diameter,
            attached_instance: Some(0),
            extra_instances: Vec::new(),
            in_hand_offset: offset,
            held: vec![0],
        },
        None => {
            let local: Vec<Vec3> = line.points().iter().map(|p| grasp.to_local(p)).collect();
            GripperState {
                closure_width: 0.0,
                attached_instance: None,
                extra_instances: Vec::new(),
                in_hand_offset: nearest_to_closing_line(&local),
                held: Vec::new(),
            }
        }
    }
}

/// Close the jaws of `grasp` on a set of centerlines. Returns captured
/// indices (into `lines`) ordered by distance from the closing line, with
/// their in-hand offsets.
pub(crate) fn capture(
    lines: &[(usize, &Polyline3D)],
    grasp: &Pose,
    jaws: &JawGeometry,
) -> Vec<(usize, [f64; 2])> {
    let half = Vec3::new(jaws.half_length, jaws.open_half, jaws.pad_half);
    let reach = half.norm();
    let mut hits: Vec<(usize, [f64; 2])> = Vec::new();
    for &(id, line) in lines {
        if line
            .points()
            .iter()
            .all(|p| (p - grasp.position).norm() > reach + 0.05)
            && line.distance_to(&grasp.position) > reach
        {
            continue;
        }
        let local: Vec<Vec3> = line.points().iter().map(|p| grasp.to_local(p)).collect();
        if local
            .windows(2)
            .any(|w| segment_hits_box(&w[0], &w[1], &half))
        {
            hits.push((id, nearest_to_closing_line(&local)));
        }
    }
    hits.sort_by(|a, b| {
        a.1[0]
            .hypot(a.1[1])
            .total_cmp(&b.1[0].hypot(b.1[1]))
            .then(a.0.cmp(&b.0))
    });
    hits
}

/// Close the jaws at `grasp` over the pile. The scene is not modified;
/// see [`lift`].
pub fn simulate_pick(scene: &Scene, grasp: &Pose, jaws: &JawGeometry) -> GripperState {
    let lines: Vec<(usize, &Polyline3D)> = scene.in_pile().map(|i| (i.id, &i.centerline)).collect();
    let hits = capture(&lines, grasp, jaws);
    let width: f64 = hits
        .iter()
        .map(|(id, _)| scene.instances[*id].spec.diameter)
        .sum();
    let mut state = GripperState {
        closure_width: width.min(2.0 * jaws.open_half),
        ..GripperState::default()
    };
    if let Some(&(id, off)) = hits.first() {
        state.attached_instance = Some(id);
        state.in_hand_offset = off;
        state.extra_instances = hits[1..].iter().map(|h| h.0).collect();
    }
    state
}

/// Raise the gripper. Captured instances leave the pile, except an
/// attached DLO held off-center beyond `secure_half`, which slips out and
/// stays behind.
pub fn lift(scene: &mut Scene, gripper: &mut GripperState, jaws: &JawGeometry) {
    gripper.held.clear();
    if let Some(id) = gripper.attached_instance {
        if gripper.in_hand_offset[1].abs() <= jaws.secure_half {
            gripper.held.push(id);
        }
    }
    gripper.held.extend(gripper.extra_instances.iter().copied());
    for &id in &gripper.held {
        scene.set_status(id, InstanceStatus::Held);
    }
}

/// Static vertical force: weight of everything held plus the share of
/// entangled pile neighbors' weight transmitted through live edges.
pub fn read_fz<R: Rng + ?Sized>(
    gripper: &GripperState,
    scene: &Scene,
    noise: &SensorNoise,
    rng: &mut R,
) -> f64 {
    let mut load = 0.0;
    for &id in &gripper.held {
        load += scene.instances[id].spec.mass;
        for (other, strength) in scene.active_edges(id) {
            load += strength * scene.instances[other].spec.mass;
        }
    }
    GRAVITY * load + gauss(rng, noise.ft_sigma)
}

/// One pendular primitive: every live edge of a held instance loses half
/// its strength and breaks once it falls below [`BREAK_STRENGTH`].
pub fn disentangle_primitive(scene: &mut Scene, gripper: &GripperState) {
    let held = &gripper.held;
    let pile: Vec<bool> = scene
        .instances
        .iter()
        .map(|i| i.status == InstanceStatus::InPile)
        .collect();
    for e in scene.entanglement.iter_mut() {
        let touches = (held.contains(&e.a) && pile[e.b]) || (held.contains(&e.b) && pile[e.a]);
        if touches && e.strength > 0.0 {
            e.strength *= PRIMITIVE_DECAY;
            if e.strength < BREAK_STRENGTH {
                e.strength = 0.0;
            }
        }
    }
}

/// Tactile reading of the in-hand grasp center, if the sensor sees the DLO.
pub fn vitac_read<R: Rng + ?Sized>(
    gripper: &GripperState,
    jaws: &JawGeometry,
    noise: &SensorNoise,
    rng: &mut R,
) -> Option<[f64; 2]> {
    gripper.attached_instance?;
    if gripper.offset_norm() > jaws.vitac_range {
        return None;
    }
    Some([
        gripper.in_hand_offset[0] + gauss(rng, noise.vitac_sigma),
        gripper.in_hand_offset[1] + gauss(rng, noise.vitac_sigma),
    ])
}

/// Axis-aligned reachable box for TCP targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [-1.0, -1.0, -0.05],
            max: [2.0, 2.0, 1.5],
        }
    }
}

/// Execute a TCP move: position gets per-axis Gaussian error, orientation
/// is reached exactly.
pub fn move_tcp<R: Rng + ?Sized>(
    target: &Pose,
    sigma: f64,
    workspace: &Workspace,
    rng: &mut R,
) -> Result<Pose, SimError> {
    let p = target.position;
    if !workspace.contains(&p) {
        return Err(SimError::WorkspaceError {
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }
    let e = Vec3::new(gauss(rng, sigma), gauss(rng, sigma), gauss(rng, sigma));
    Ok(Pose::new(p + e, target.orientation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{BinDims, DloInstance, DloSpec};

    fn scene(spec: DloSpec, lines: &[(f64, f64)]) -> Scene {
        let mut s = Scene::empty(BinDims::default(), 0);
        for (id, &(y, z)) in lines.iter().enumerate() {
            s.instances.push(DloInstance {
                id,
                spec,
                centerline: Polyline3D::new(vec![Point3::new(0.1, y, z), Point3::new(0.5, y, z)])
                    .unwrap(),
                layer: id,
                status: InstanceStatus::InPile,
            });
        }
        s
    }

    fn grasp_at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_yaw(Point3::new(x, y, z), 0.0)
    }

    #[test]
    fn centered_grasp_closes_on_diameter() {
        let spec = DloSpec::power_cable();
        let s = scene(spec, &[(0.2, 0.00475)]);
        let g = simulate_pick(&s, &grasp_at(0.3, 0.2, 0.00475), &JawGeometry::picking());
        assert!((g.closure_width - 0.0095).abs() < 1e-12);
        assert_eq!(g.attached_instance, Some(0));
        assert!(g.offset_norm() < 1e-12);
    }

    #[test]
    fn distant_grasp_is_empty() {
        let s = scene(DloSpec::power_cable(), &[(0.2, 0.00475)]);
        let g = simulate_pick(&s, &grasp_at(0.3, 0.25, 0.00475), &JawGeometry::picking());
        assert_eq!(g.closure_width, 0.0);
        assert_eq!(g.attached_instance, None);
    }

    #[test]
    fn vertical_miss_becomes_in_hand_offset() {
        let s = scene(DloSpec::power_cable(), &[(0.2, 0.00475)]);
        let jaws = JawGeometry::picking();
        let g = simulate_pick(&s, &grasp_at(0.3, 0.2, 0.00775), &jaws);
        assert!((g.offset_norm() - 0.003).abs() < 1e-12);
        let mut rng = crate::rng::seeded(0);
        let noise = SensorNoise {
            vitac_sigma: 0.0003,
            ..SensorNoise::zero()
        };
        let r = vitac_read(&g, &jaws, &noise, &mut rng).unwrap();
        assert!((r[0].hypot(r[1]) - 0.003).abs() < 4.0 * 0.0003);
    }

    #[test]
    fn vitac_sees_only_nearby_dlo() {
        let jaws = JawGeometry::handover();
        let mut g = GripperState {
            attached_instance: Some(0),
            in_hand_offset: [0.0, 0.004],
            ..GripperState::default()
        };
        let mut rng = crate::rng::seeded(0);
        assert_eq!(
            vitac_read(&g, &jaws, &SensorNoise::zero(), &mut rng),
            Some([0.0, 0.004])
        );
        g.in_hand_offset = [0.0, 0.02];
        assert_eq!(vitac_read(&g, &jaws, &SensorNoise::zero(), &mut rng), None);
    }

    #[test]
    fn force_reading_examples() {
        let spec = DloSpec::hv_cable();
        let mut s = scene(spec, &[(0.2, 0.0055), (0.3, 0.0055)]);
        let jaws = JawGeometry::picking();
        let mut g = simulate_pick(&s, &grasp_at(0.3, 0.2, 0.0055), &jaws);
        let mut rng = crate::rng::seeded(0);
        let zero = SensorNoise::zero();
        assert_eq!(read_fz(&GripperState::default(), &s, &zero, &mut rng), 0.0);
        lift(&mut s, &mut g, &jaws);
        assert!((read_fz(&g, &s, &zero, &mut rng) - 1.2753).abs() < 1e-9);
        s.entanglement.push(crate::sim::EntanglementEdge {
            a: 0,
            b: 1,
            strength: 1.0,
            crossings: 1,
        });
        assert!((read_fz(&g, &s, &zero, &mut rng) - 2.5506).abs() < 1e-9);
        disentangle_primitive(&mut s, &g);
        assert!((read_fz(&g, &s, &zero, &mut rng) - 1.5 * 1.2753).abs() < 1e-9);
        disentangle_primitive(&mut s, &g);
        assert!((read_fz(&g, &s, &zero, &mut rng) - 1.2753).abs() < 1e-9);
        let (pile, held, dep, rem) = s.mass_by_status();
        assert!((pile + held + dep + rem - 0.26).abs() < 1e-12);
    }

    #[test]
    fn off_center_grasp_drops_on_lift() {
        let mut s = scene(DloSpec::power_cable(), &[(0.2, 0.00475)]);
        let jaws = JawGeometry::picking();
        let mut g = simulate_pick(&s, &grasp_at(0.3, 0.2, 0.01), &jaws);
        assert_eq!(g.attached_instance, Some(0));
        lift(&mut s, &mut g, &jaws);
        assert!(g.held.is_empty());
        assert_eq!(s.pile_count(), 1);
    }

    #[test]
    fn move_tcp_noise_statistics() {
        let ws = Workspace::default();
        let target = Pose::identity_at(Point3::new(0.3, 0.2, 0.3));
        let mut rng = crate::rng::seeded(11);
        assert_eq!(move_tcp(&target, 0.0, &ws, &mut rng).unwrap(), target);
        let n = 1000;
        let mut sq = 0.0;
        for _ in 0..n {
            let p = move_tcp(&target, 0.005, &ws, &mut rng).unwrap();
            sq += (p.position - target.position).norm_squared();
        }
        let rms = (sq / (3 * n) as f64).sqrt();
        assert!((0.0045..=0.0055).contains(&rms), "rms {rms}");
        let far = Pose::identity_at(Point3::new(5.0, 0.0, 0.0));
        assert!(matches!(
            move_tcp(&far, 0.0, &ws, &mut rng),
            Err(SimError::WorkspaceError { .. })
        ));
    }
}
