use super::{
    grasp_with_replan, pendular_primitive, GraspPose, PickError, PickEvent, PickMachine,
    PickParams, PickState,
};
use crate::geometry::{DepthImage, Mask, Pixel, Polyline3D, Pose};
use crate::rng::{self, SimRng};
use crate::segmentation::{
    estimate_radius, extract_top_layer, path_to_points, postprocess_masks, sample_prompts,
    select_target, skeletonize, MaskSet, SegError, SegParams, Skeleton,
};
use crate::sim::{
    add_depth_noise, disentangle_primitive, lift, move_tcp, read_fz, render_scene, simulate_pick,
    GripperState, InstanceStatus, JawGeometry, OracleSegmenter, RenderOutput, Scene, SensorNoise,
    Workspace,
};
use serde::{Deserialize, Serialize};

/// Floor pixels are those lower than this fraction of the DLO diameter.
const FLOOR_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PickConfig {
    pub seg: SegParams,
    pub pick: PickParams,
    pub noise: SensorNoise,
    /// Camera pixel pitch, meters.
    pub pitch: f64,
    pub jaws: JawGeometry,
    pub workspace: Workspace,
}

impl Default for PickConfig {
    fn default() -> Self {
        Self {
            seg: SegParams::default(),
            pick: PickParams::default(),
            noise: SensorNoise::default(),
            pitch: 0.001,
            jaws: JawGeometry::picking(),
            workspace: Workspace::default(),
        }
    }
}

/// Independent random streams of one bin run.
#[derive(Debug, Clone)]
pub struct PickRngs {
    pub perception: SimRng,
    pub motion: SimRng,
    pub force: SimRng,
}

impl PickRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            perception: rng::seeded(rng::child_seed(seed, rng::stream::PERCEPTION)),
            motion: rng::seeded(rng::child_seed(seed, rng::stream::MOTION)),
            force: rng::seeded(rng::child_seed(seed, rng::stream::FORCE)),
        }
    }
}

/// Everything the perception stage produced for one pick.
#[derive(Debug, Clone)]
pub struct Perception {
    pub render: RenderOutput,
    /// Noisy depth with floor and walls blanked.
    pub depth: DepthImage,
    pub top_layer: Mask,
    /// Depth at which the top layer was found; `None` when the fallback
    /// (largest foreground region) was used.
    pub layer_depth: Option<f64>,
    pub prompts: Vec<Pixel>,
    pub raw: MaskSet,
    pub processed: MaskSet,
    pub target: usize,
    pub skeleton: Skeleton,
    /// Back-projected longest skeleton path of the target mask.
    pub raw_shape: Polyline3D,
    /// Instance most of the target mask belongs to.
    pub target_instance: Option<usize>,
}

/// Blank pixels that belong to the bin rather than to DLOs: anything
/// outside the floor rectangle and anything lower than a DLO could be.
pub fn mask_background(depth: &mut DepthImage, scene: &Scene) {
    let d = scene
        .instances
        .iter()
        .map(|i| i.spec.diameter)
        .fold(0.0, f64::max);
    let floor_cut = FLOOR_FRACTION * d;
    let cam_z = depth.origin[2];
    for y in 0..depth.height {
        for x in 0..depth.width {
            let (wx, wy) = depth.pixel_center(x, y);
            let v = *depth.get(x, y);
            let inside = wx >= 0.0 && wy >= 0.0 && wx <= scene.bin.length && wy <= scene.bin.width;
            if !inside || (v > 0.0 && cam_z - v < floor_cut) {
                depth.set(x, y, 0.0);
            }
        }
    }
}

fn majority_instance(mask: &Mask, ids: &crate::geometry::GridImage<i32>) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::<i32, usize>::new();
    for (m, id) in mask.values.iter().zip(&ids.values) {
        if *m && *id >= 0 {
            *counts.entry(*id).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k as usize)
}

/// Render, segment and select the DLO to pick.
pub fn perceive(scene: &Scene, cfg: &PickConfig, rng: &mut SimRng) -> Result<Perception, SegError> {
    let render = render_scene(scene, cfg.pitch);
    let mut depth = render.depth.clone();
    add_depth_noise(&mut depth, cfg.noise.depth_sigma, rng);
    mask_background(&mut depth, scene);
    let (top_layer, layer_depth) = match extract_top_layer(&depth, &cfg.seg) {
        Ok((m, d)) => (m, Some(d)),
        Err(SegError::NoTopLayer) => {
            let mut fg = depth.blank_like(false);
            for (f, v) in fg.values.iter_mut().zip(&depth.values) {
                *f = *v > 0.0;
            }
            let (m, area) = crate::segmentation::largest_component(&fg);
            if area == 0 {
                return Err(SegError::NoTopLayer);
            }
            (m, None)
        }
        Err(e) => return Err(e),
    };
    let top_skel = skeletonize(&top_layer, cfg.seg.prune_min);
    let prompts = sample_prompts(&top_skel, cfg.seg.n_prompts);
    let raw = OracleSegmenter::new(&render).segment(&prompts, &cfg.noise, rng);
    let processed = postprocess_masks(&raw, &cfg.seg);
    let (target, skeleton) = select_target(&processed, cfg.seg.prune_min)?;
    let path = skeleton
        .longest()
        .map(|i| skeleton.paths[i].clone())
        .unwrap_or_default();
    let mask = &processed.masks[target].mask;
    let radius = estimate_radius(mask, &path);
    let pts = path_to_points(&path, &depth, radius);
    if pts.len() < 2 {
        return Err(SegError::NoDepthData);
    }
    let raw_shape = Polyline3D::from_points_dedup(pts)?;
    let target_instance = majority_instance(mask, &render.ids);
    Ok(Perception {
        render,
        depth,
        top_layer,
        layer_depth,
        prompts,
        raw,
        processed,
        target,
        skeleton,
        raw_shape,
        target_instance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickFailure {
    /// The DLO slipped out of the jaws during the lift.
    Dropped,
    MultiGrasp,
    NoGraspPose,
    /// The DLO was too steep for a top-down grasp even after re-planning.
    Vertical,
    /// The jaws closed on nothing twice.
    MissedGrasp,
    /// Still too heavy after every disentangling primitive.
    Entangled,
}

/// Result of one pick (one pass of the state machine).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub terminal: PickState,
    pub failure: Option<PickFailure>,
    pub target: Option<usize>,
    pub deposited: Option<usize>,
    /// Instances taken out by hand after this pick.
    pub removed: Vec<usize>,
    /// Static checks over the threshold.
    pub detections: u32,
    pub disentangles: u32,
    pub grasp_attempts: u32,
    pub grasp: Option<GraspPose>,
    pub in_hand_offset: Option<[f64; 2]>,
    pub fz_trace: Vec<f64>,
}

impl TrialOutcome {
    pub fn is_success(&self) -> bool {
        self.failure.is_none() && self.deposited.is_some()
    }
}

fn remove_all(scene: &mut Scene, ids: &mut Vec<usize>) {
    ids.sort_unstable();
    ids.dedup();
    for &id in ids.iter() {
        scene.set_status(id, InstanceStatus::Removed);
    }
}

/// Run the state machine once against the scene. On success the retained
/// DLO is marked deposited; on failure the DLOs involved are removed.
/// Leaves a held DLO in state `Held` when `keep_held` is set, for callers
/// that continue with it.
pub fn run_pick(scene: &mut Scene, cfg: &PickConfig, rngs: &mut PickRngs) -> TrialOutcome {
    run_pick_inner(scene, cfg, rngs, false).0
}

pub(crate) fn run_pick_inner(
    scene: &mut Scene,
    cfg: &PickConfig,
    rngs: &mut PickRngs,
    keep_held: bool,
) -> (TrialOutcome, Option<GripperState>) {
    let mut out = TrialOutcome {
        terminal: PickState::Home,
        failure: None,
        target: None,
        deposited: None,
        removed: Vec::new(),
        detections: 0,
        disentangles: 0,
        grasp_attempts: 0,
        grasp: None,
        in_hand_offset: None,
        fz_trace: Vec::new(),
    };
    let Some(spec) = scene.in_pile().next().map(|i| i.spec) else {
        out.terminal = PickState::Abort;
        out.failure = Some(PickFailure::NoGraspPose);
        return (out, None);
    };
    let mut m = PickMachine::new(cfg.pick, spec.mass, spec.diameter);
    let static_pose = Pose::identity_at(cfg.pick.static_position.into());
    let mut reason = PickFailure::NoGraspPose;
    let mut grasp: Option<GraspPose> = None;
    let mut gripper = GripperState::default();
    let mut guard = 0;
    while !m.state.is_terminal() {
        guard += 1;
        assert!(
            guard <= 4 * m.step_bound(),
            "pick state machine failed to terminate"
        );
        let event = match m.state {
            PickState::Home => {
                grasp = None;
                match perceive(scene, cfg, &mut rngs.perception) {
                    Ok(p) => {
                        out.target = p.target_instance;
                        match grasp_with_replan(&p.raw_shape, cfg.pick.r) {
                            Ok(g) => {
                                grasp = Some(g);
                                PickEvent::PoseAvailable
                            }
                            Err(PickError::VerticalSegment) => {
                                reason = PickFailure::Vertical;
                                PickEvent::NoPose
                            }
                            Err(_) => {
                                reason = PickFailure::NoGraspPose;
                                PickEvent::NoPose
                            }
                        }
                    }
                    Err(_) => {
                        reason = PickFailure::NoGraspPose;
                        PickEvent::NoPose
                    }
                }
            }
            PickState::Approach => PickEvent::ReachedPose,
            PickState::Grasp => {
                let g = grasp.expect("grasp pose set before approach");
                out.grasp = Some(g);
                match move_tcp(
                    &g.frame(),
                    cfg.noise.pick_exec_sigma,
                    &cfg.workspace,
                    &mut rngs.motion,
                ) {
                    Ok(achieved) => gripper = simulate_pick(scene, &achieved, &cfg.jaws),
                    Err(_) => gripper = GripperState::default(),
                }
                PickEvent::GripperClosed
            }
            PickState::CheckClosure => {
                reason = PickFailure::MissedGrasp;
                PickEvent::ClosureWidth(gripper.closure_width)
            }
            PickState::Lift => {
                lift(scene, &mut gripper, &cfg.jaws);
                out.in_hand_offset = Some(gripper.in_hand_offset);
                PickEvent::Lifted
            }
            PickState::StaticCheck => {
                reason = PickFailure::Entangled;
                let f = read_fz(&gripper, scene, &cfg.noise, &mut rngs.force);
                out.fz_trace.push(f);
                PickEvent::ForceZ(f)
            }
            PickState::Disentangle => {
                let _waypoints = pendular_primitive(
                    &static_pose,
                    cfg.pick.pendulum_amplitude,
                    cfg.pick.pendulum_cycles,
                );
                disentangle_primitive(scene, &gripper);
                PickEvent::PrimitiveDone
            }
            PickState::Retain | PickState::Abort => unreachable!(),
        };
        m.step(event).expect("runner only emits documented events");
    }
    out.terminal = m.state;
    out.detections = m.detections;
    out.disentangles = m.disentangles;
    out.grasp_attempts = m.grasp_attempts;

    let mut held_out = None;
    if m.state == PickState::Retain {
        let single = gripper.held.len() == 1 && gripper.attached_instance == Some(gripper.held[0]);
        if single {
            let id = gripper.held[0];
            if keep_held {
                held_out = Some(gripper.clone());
            } else {
                scene.set_status(id, InstanceStatus::Deposited);
            }
            out.deposited = Some(id);
        } else {
            out.failure = Some(if gripper.held.is_empty() {
                PickFailure::Dropped
            } else {
                PickFailure::MultiGrasp
            });
            out.removed = gripper
                .captured()
                .chain(gripper.held.iter().copied())
                .collect();
        }
    } else {
        out.failure = Some(reason);
        match reason {
            PickFailure::Entangled => out.removed = gripper.held.clone(),
            PickFailure::MissedGrasp | PickFailure::Vertical => {
                out.removed = out.target.into_iter().collect()
            }
            _ => {}
        }
    }
    remove_all(scene, &mut out.removed);
    (out, held_out)
}

/// One bin emptied pick by pick. If no grasp pose can be found, the bin
/// ends and whatever is left counts as errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub n_dlos: usize,
    pub successes: usize,
    pub errors: usize,
    /// Picks on which the static check detected entanglement.
    pub entanglements: usize,
    pub picks: Vec<TrialOutcome>,
    pub ended_without_pose: bool,
}

impl BinReport {
    pub fn success_rate(&self) -> f64 {
        if self.n_dlos == 0 {
            0.0
        } else {
            self.successes as f64 / self.n_dlos as f64
        }
    }
}

pub fn run_bin(scene: &mut Scene, cfg: &PickConfig, seed: u64) -> BinReport {
    let mut rngs = PickRngs::from_seed(seed);
    let n = scene.instances.len();
    let mut picks = Vec::new();
    let mut ended = false;
    while scene.pile_count() > 0 && picks.len() < 3 * n + 3 {
        let o = run_pick(scene, cfg, &mut rngs);
        let stop = o.failure == Some(PickFailure::NoGraspPose);
        picks.push(o);
        if stop {
            ended = true;
            break;
        }
    }
    let left: Vec<usize> = scene.in_pile().map(|i| i.id).collect();
    for id in left {
        scene.set_status(id, InstanceStatus::Removed);
    }
    let count = |s: InstanceStatus| scene.instances.iter().filter(|i| i.status == s).count();
    BinReport {
        n_dlos: n,
        successes: count(InstanceStatus::Deposited),
        errors: count(InstanceStatus::Removed),
        entanglements: picks.iter().filter(|p| p.detections > 0).count(),
        picks,
        ended_without_pose: ended,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::sim::{BinDims, DloInstance, DloSpec, EntanglementEdge};

    fn zero_cfg() -> PickConfig {
        PickConfig {
            noise: SensorNoise::zero(),
            ..PickConfig::default()
        }
    }

    fn lone(spec: DloSpec, y: f64) -> DloInstance {
        DloInstance {
            id: 0,
            spec,
            centerline: Polyline3D::new(vec![
                Point3::new(0.1, y, spec.radius()),
                Point3::new(0.5, y, spec.radius()),
            ])
            .unwrap()
            .resample_pitch(0.005),
            layer: 0,
            status: InstanceStatus::InPile,
        }
    }

    #[test]
    fn single_dlo_is_retained() {
        let mut s = Scene::empty(BinDims::default(), 0);
        s.instances.push(lone(DloSpec::hv_cable(), 0.2));
        let o = run_pick(&mut s, &zero_cfg(), &mut PickRngs::from_seed(1));
        assert_eq!(o.terminal, PickState::Retain, "{o:?}");
        assert_eq!(o.disentangles, 0);
        assert_eq!(s.instances[0].status, InstanceStatus::Deposited);
    }

    #[test]
    fn entangled_pair_needs_a_primitive() {
        let spec = DloSpec::hv_cable();
        let mut s = Scene::empty(BinDims::default(), 0);
        let mut under = lone(spec, 0.1);
        under.id = 0;
        let over = {
            let mut i = lone(spec, 0.2);
            i.id = 1;
            i.layer = 1;
            i
        };
        s.instances.push(under);
        s.instances.push(over);
        s.entanglement.push(EntanglementEdge {
            a: 0,
            b: 1,
            strength: 1.0,
            crossings: 1,
        });
        let o = run_pick(&mut s, &zero_cfg(), &mut PickRngs::from_seed(1));
        assert_eq!(o.terminal, PickState::Retain, "{o:?}");
        assert!(o.disentangles >= 1);
        assert!(o.detections >= 1);
    }

    #[test]
    fn empty_bin_has_no_pose() {
        let mut s = Scene::empty(BinDims::default(), 0);
        let o = run_pick(&mut s, &zero_cfg(), &mut PickRngs::from_seed(1));
        assert_eq!(o.failure, Some(PickFailure::NoGraspPose));
        assert_eq!(o.terminal, PickState::Abort);
    }

    #[test]
    fn perception_targets_an_uncovered_dlo() {
        let spec = DloSpec::hv_cable();
        let mut s = Scene::empty(BinDims::default(), 0);
        s.instances.push(lone(spec, 0.1));
        let mut b = lone(spec, 0.3);
        b.id = 1;
        s.instances.push(b);
        let cfg = zero_cfg();
        let p = perceive(&s, &cfg, &mut rng::seeded(0)).unwrap();
        let t = p.target_instance.unwrap();
        let truth = &s.instances[t].centerline;
        assert!(p
            .raw_shape
            .points()
            .iter()
            .all(|q| truth.distance_to(q) < 0.003));
    }
}
