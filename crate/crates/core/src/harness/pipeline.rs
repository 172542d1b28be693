use super::{handover_world, ConfigError, ExperimentConfig, ExperimentKind, FailureKind};
use crate::geometry::hausdorff;
use crate::handover::{run_handover, HandoverResult, SecondArm};
use crate::mounting::{execute_mount, plan_mount, MountError, MountReport};
use crate::pick::{run_pick_inner, PickFailure, PickRngs, TrialOutcome};
use crate::rng::{self, stream};
use crate::sim::{gen_bin, HeldDlo, HeldParams};
use crate::tracking::{grasp_center, in_hand_vector, track_frame};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Pick,
    Transfer,
    Track,
    Handover,
    Mount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub success: bool,
    pub failure: Option<FailureKind>,
}

/// Tracking result of the transferred DLO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub hausdorff: f64,
    pub correction: f64,
    pub clusters: usize,
    pub bridges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    /// Every pick made until one DLO was retained.
    pub picks: Vec<TrialOutcome>,
    /// Arc of the first arm's grasp on the picked DLO, meters.
    pub grasp_arc: Option<f64>,
    pub tracking: Option<TrackSummary>,
    pub handover: Option<HandoverResult>,
    pub mount: Option<MountReport>,
    /// Stages in the order they ran; the run stops at the first failure.
    pub stages: Vec<StageOutcome>,
    pub success: bool,
    pub failure: Option<FailureKind>,
}

impl PipelineReport {
    fn stage(&mut self, stage: Stage, failure: Option<FailureKind>) -> bool {
        self.stages.push(StageOutcome {
            stage,
            success: failure.is_none(),
            failure,
        });
        if failure.is_some() {
            self.failure = failure;
        }
        failure.is_none()
    }
}

/// Bin pick, transfer to the tracking area, track, hand over and mount on
/// every fixture.
pub fn run_full_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport, ConfigError> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::FullPipeline {
        return Err(ConfigError::new(
            "kind",
            format!("expected FullPipeline, got {:?}", cfg.kind),
        ));
    }
    let mut report = PipelineReport {
        seed: cfg.seed,
        picks: Vec::new(),
        grasp_arc: None,
        tracking: None,
        handover: None,
        mount: None,
        stages: Vec::new(),
        success: false,
        failure: None,
    };
    let pick_seed = rng::child_seed(cfg.seed, 0);
    let post_seed = rng::child_seed(cfg.seed, 1);
    let mut scene = gen_bin(
        cfg.scene.n_dlos,
        &cfg.scene.spec,
        &cfg.scene.bin,
        &cfg.scene.gen,
        rng::child_seed(pick_seed, stream::SCENE),
    )
    .map_err(|e| ConfigError::new("scene", e.to_string()))?;

    // Pick until one DLO is retained alone.
    let pick_cfg = cfg.pick_config();
    let mut rngs = PickRngs::from_seed(pick_seed);
    let mut held = None;
    let mut last_failure = FailureKind::NoPose;
    while scene.pile_count() > 0 && report.picks.len() < 3 * cfg.scene.n_dlos + 3 {
        let (o, g) = run_pick_inner(&mut scene, &pick_cfg, &mut rngs, true);
        let stop = o.failure == Some(PickFailure::NoGraspPose);
        last_failure = o.failure.map_or(FailureKind::NoPose, FailureKind::from);
        let done = g.is_some();
        if let (Some(g), Some(id), Some(grasp)) = (g, o.deposited, o.grasp) {
            held = Some((id, grasp, g));
        }
        report.picks.push(o);
        if done || stop {
            break;
        }
    }
    let Some((id, grasp, gripper)) = held else {
        report.stage(Stage::Pick, Some(last_failure));
        return Ok(report);
    };
    report.stage(Stage::Pick, None);

    // The picked DLO hangs from the first arm at the arc it was grasped at.
    let inst = &scene.instances[id];
    let arc = inst.centerline.nearest(&grasp.position).1;
    report.grasp_arc = Some(arc);
    let params = HeldParams {
        spec: inst.spec,
        grasp_ratio: (arc / inst.centerline.arc_length()).clamp(0.0, 1.0),
        ..cfg.scene.held
    };
    let mut transfer = rng::seeded(rng::child_seed(post_seed, stream::TRANSFER));
    let held = HeldDlo::generate(&params, gripper.in_hand_offset, &mut transfer)
        .map_err(|e| ConfigError::new("scene.held", e.to_string()))?;
    report.stage(Stage::Transfer, None);

    let mut perception = rng::seeded(rng::child_seed(post_seed, stream::CALIBRATION));
    let view = held.observe(&params, &cfg.noise, &mut perception);
    let f = &view.frame;
    let rec = match track_frame(&f.depth, &f.mask, &f.tcp, f.vitac, &cfg.track) {
        Ok(rec) => rec,
        Err(_) => {
            report.stage(Stage::Track, Some(FailureKind::TrackingLost));
            return Ok(report);
        }
    };
    report.tracking = Some(TrackSummary {
        hausdorff: hausdorff(&rec.shape, &held.centerline),
        correction: rec.correction.magnitude(),
        clusters: rec.clusters.len(),
        bridges: rec.bridges.len(),
    });
    report.stage(Stage::Track, None);

    let p_first = match f.vitac {
        Some(r) => grasp_center(&f.tcp, &in_hand_vector(r)),
        None => f.tcp.position,
    };
    let arm = SecondArm {
        workspace: cfg.workspace,
        ..SecondArm::new(held.centerline.clone(), held.spec.diameter, cfg.noise)
    };
    let mut motion = rng::seeded(rng::child_seed(post_seed, stream::MOTION));
    let h = run_handover(
        &arm,
        &rec.shape,
        &p_first,
        &handover_world(cfg, &held.tcp.position),
        &cfg.handover,
        &mut motion,
    )
    .map_err(|e| ConfigError::new("handover", e.to_string()))?;
    let hf = h.failure.map(FailureKind::from);
    report.handover = Some(h);
    if !report.stage(Stage::Handover, hf) {
        return Ok(report);
    }

    let s_hold = rec.shape.nearest(&p_first).1;
    let mut planner = rng::seeded(rng::child_seed(post_seed, stream::PLANNER));
    let plan = match plan_mount(
        &rec.shape,
        s_hold,
        held.spec.diameter,
        &cfg.fixtures,
        &cfg.world,
        &cfg.mount,
        &mut planner,
    ) {
        Ok(p) => p,
        Err(MountError::PlanFailure { .. }) => {
            report.stage(Stage::Mount, Some(FailureKind::PlanFailure));
            return Ok(report);
        }
        Err(e) => return Err(ConfigError::new("fixtures", e.to_string())),
    };
    let m = execute_mount(&plan, &cfg.world, &cfg.noise, &mut motion);
    let mf = m
        .fixtures
        .iter()
        .find_map(|f| f.failure)
        .map(FailureKind::from);
    report.mount = Some(m);
    report.success = report.stage(Stage::Mount, mf);
    Ok(report)
}
