use super::{ConfigError, ExperimentConfig, ExperimentKind, FailureKind};
use crate::geometry::{hausdorff, Point3};
use crate::handover::{run_handover, Obstacle, SecondArm, World};
use crate::pick::{run_bin, BinReport};
use crate::rng::{self, stream};
use crate::sim::{gen_bin, HeldDlo, Scene};
use crate::tracking::{grasp_center, in_hand_vector, track_frame};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Map `f` over `0..n` on at most `jobs` threads (0 = all cores) and
/// return the results in index order.
pub fn par_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
    match pool {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

fn require(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(), ConfigError> {
    cfg.validate()?;
    if cfg.kind != kind {
        return Err(ConfigError::new(
            "kind",
            format!("expected {kind:?}, got {:?}", cfg.kind),
        ));
    }
    Ok(())
}

/// One row of the bin-picking table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin: String,
    pub n_dlos: usize,
    pub successes: usize,
    pub errors: usize,
    pub entanglements: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPickingReport {
    pub seed: u64,
    pub bins: Vec<BinReport>,
    /// Per-bin rows followed by the overall row; always equal to
    /// [`BinPickingReport::table`].
    pub rows: Vec<BinRow>,
}

impl BinPickingReport {
    pub fn new(seed: u64, bins: Vec<BinReport>) -> Self {
        let mut r = Self {
            seed,
            bins,
            rows: Vec::new(),
        };
        r.rows = r.table();
        r
    }

    pub fn table(&self) -> Vec<BinRow> {
        let row = |bin: String, n: usize, s: usize, e: usize, ent: usize| BinRow {
            bin,
            n_dlos: n,
            successes: s,
            errors: e,
            entanglements: ent,
            success_rate: if n == 0 { 0.0 } else { s as f64 / n as f64 },
        };
        let mut rows: Vec<BinRow> = self
            .bins
            .iter()
            .enumerate()
            .map(|(i, b)| {
                row(
                    (i + 1).to_string(),
                    b.n_dlos,
                    b.successes,
                    b.errors,
                    b.entanglements,
                )
            })
            .collect();
        if !self.bins.is_empty() {
            let sum = |f: fn(&BinRow) -> usize| rows.iter().map(f).sum::<usize>();
            let overall = row(
                "overall".into(),
                sum(|r| r.n_dlos),
                sum(|r| r.successes),
                sum(|r| r.errors),
                sum(|r| r.entanglements),
            );
            rows.push(overall);
        }
        rows
    }

    pub fn overall_success_rate(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.success_rate)
    }

    pub fn mean_entanglements(&self) -> f64 {
        if self.bins.is_empty() {
            0.0
        } else {
            self.bins.iter().map(|b| b.entanglements).sum::<usize>() as f64 / self.bins.len() as f64
        }
    }

    /// Fine failure taxonomy per bin, counted over picks.
    pub fn failure_counts(&self) -> Vec<Vec<(FailureKind, usize)>> {
        self.bins
            .iter()
            .map(|b| {
                FailureKind::PICKING
                    .iter()
                    .map(|&k| {
                        (
                            k,
                            b.picks
                                .iter()
                                .filter(|p| p.failure.map(FailureKind::from) == Some(k))
                                .count(),
                        )
                    })
                    .collect()
            })
            .collect()
    }
}

/// Empty `trials` bins of `scene.n_dlos` DLOs each.
pub fn run_bin_picking(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<BinPickingReport, ConfigError> {
    require(cfg, ExperimentKind::BinPicking)?;
    let pick = cfg.pick_config();
    let bins = par_map(cfg.trials, jobs, |b| {
        let seed = rng::child_seed(cfg.seed, b as u64);
        let mut scene = gen_bin(
            cfg.scene.n_dlos,
            &cfg.scene.spec,
            &cfg.scene.bin,
            &cfg.scene.gen,
            rng::child_seed(seed, stream::SCENE),
        )
        .map_err(|e| ConfigError::new("scene", e.to_string()))?;
        Ok(run_bin(&mut scene, &pick, seed))
    });
    Ok(BinPickingReport::new(
        cfg.seed,
        bins.into_iter().collect::<Result<_, ConfigError>>()?,
    ))
}

/// Per-scene result of the tracking experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingTrial {
    pub trial: usize,
    pub success: bool,
    pub failure: Option<FailureKind>,
    /// Hausdorff distance of the corrected shape to the true centerline.
    pub hausdorff: Option<f64>,
    /// Magnitude of the tactile translation correction.
    pub correction: Option<f64>,
    pub mask_pixels: usize,
    pub clusters: usize,
    pub bridges: usize,
    /// Wall time of `track_frame`; kept out of JSON so reports stay
    /// reproducible.
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub seed: u64,
    pub trials: Vec<TrackingTrial>,
}

impl TrackingReport {
    pub fn max_hausdorff(&self) -> Option<f64> {
        self.trials
            .iter()
            .map(|t| t.hausdorff.unwrap_or(f64::INFINITY))
            .reduce(f64::max)
    }
}

fn held_shape(cfg: &ExperimentConfig, seed: u64, offset: [f64; 2]) -> Result<HeldDlo, ConfigError> {
    let mut rng = rng::seeded(seed);
    HeldDlo::generate(&cfg.scene.held, offset, &mut rng)
        .map_err(|e| ConfigError::new("scene.held", e.to_string()))
}

fn draw_offset<R: Rng + ?Sized>(range: f64, rng: &mut R) -> [f64; 2] {
    let z = if range > 0.0 {
        rng.random_range(-range..=range)
    } else {
        0.0
    };
    [0.0, z]
}

/// Reconstruct `trials` random held DLOs and compare with ground truth.
pub fn run_tracking_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<TrackingReport, ConfigError> {
    require(cfg, ExperimentKind::Tracking)?;
    let trials = par_map(cfg.trials, jobs, |t| {
        let seed = rng::child_seed(cfg.seed, t as u64);
        let mut tactile = rng::seeded(rng::child_seed(seed, stream::TACTILE));
        let offset = draw_offset(cfg.offset_range, &mut tactile);
        let held = held_shape(cfg, rng::child_seed(seed, stream::SCENE), offset)?;
        let mut perception = rng::seeded(rng::child_seed(seed, stream::PERCEPTION));
        let view = held.observe(&cfg.scene.held, &cfg.noise, &mut perception);
        let mask_pixels = view.frame.mask.count();
        let start = Instant::now();
        let rec = track_frame(
            &view.frame.depth,
            &view.frame.mask,
            &view.frame.tcp,
            view.frame.vitac,
            &cfg.track,
        );
        let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
        Ok(match rec {
            Ok(rec) => TrackingTrial {
                trial: t,
                success: true,
                failure: None,
                hausdorff: Some(hausdorff(&rec.shape, &held.centerline)),
                correction: rec.corrected.then(|| rec.correction.magnitude()),
                mask_pixels,
                clusters: rec.clusters.len(),
                bridges: rec.bridges.len(),
                elapsed_ms,
            },
            Err(_) => TrackingTrial {
                trial: t,
                success: false,
                failure: Some(FailureKind::TrackingLost),
                hausdorff: None,
                correction: None,
                mask_pixels,
                clusters: 0,
                bridges: 0,
                elapsed_ms,
            },
        })
    });
    Ok(TrackingReport {
        seed: cfg.seed,
        trials: trials.into_iter().collect::<Result<_, ConfigError>>()?,
    })
}

/// One handover attempt sequence. Correction-on and correction-off runs
/// of the same (config, L_g, seed) cell share every random draw up to the
/// point where they diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverTrial {
    pub config: usize,
    pub l_g: f64,
    pub seed: usize,
    pub corrected: bool,
    pub success: bool,
    pub failure: Option<FailureKind>,
    /// Gap between the DLO center and the TCP after the first grasp.
    pub first_gap: Option<f64>,
    /// Gap after the last grasp.
    pub gap: Option<f64>,
    pub attempts: usize,
    /// Magnitude of the tactile shape correction, when applied.
    pub correction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverSummary {
    pub trials_per_arm: usize,
    pub successes_on: usize,
    pub successes_off: usize,
    pub success_rate_on: f64,
    pub success_rate_off: f64,
    pub mean_gap_on: f64,
    pub mean_gap_off: f64,
    /// Mean gap without correction minus mean gap with correction.
    pub mean_gap_reduction: f64,
    pub mean_correction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverReport {
    pub seed: u64,
    pub trials: Vec<HandoverTrial>,
    pub summary: HandoverSummary,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl HandoverSummary {
    pub fn from_trials(trials: &[HandoverTrial]) -> Self {
        let arm = |on: bool| trials.iter().filter(move |t| t.corrected == on);
        let n_on = arm(true).count();
        let n_off = arm(false).count();
        let s_on = arm(true).filter(|t| t.success).count();
        let s_off = arm(false).filter(|t| t.success).count();
        let rate = |s: usize, n: usize| if n == 0 { 0.0 } else { s as f64 / n as f64 };
        let g_on = mean(arm(true).filter_map(|t| t.gap));
        let g_off = mean(arm(false).filter_map(|t| t.gap));
        Self {
            trials_per_arm: n_on.max(n_off),
            successes_on: s_on,
            successes_off: s_off,
            success_rate_on: rate(s_on, n_on),
            success_rate_off: rate(s_off, n_off),
            mean_gap_on: g_on,
            mean_gap_off: g_off,
            mean_gap_reduction: g_off - g_on,
            mean_correction: mean(arm(true).filter_map(|t| t.correction)),
        }
    }
}

/// World of the handover: the configured obstacles plus a keep-out sphere
/// around the first arm.
pub fn handover_world(cfg: &ExperimentConfig, first_tcp: &Point3) -> World {
    let mut w = cfg.world.clone();
    if cfg.keepout_radius > 0.0 {
        w.obstacles.push(Obstacle::Sphere {
            center: [first_tcp.x, first_tcp.y, first_tcp.z],
            radius: cfg.keepout_radius,
        });
    }
    w
}

fn handover_trial(
    cfg: &ExperimentConfig,
    config: usize,
    l_g: f64,
    seed_index: usize,
    cell: u64,
    corrected: bool,
) -> Result<HandoverTrial, ConfigError> {
    let shape_seed = rng::child_seed(rng::child_seed(cfg.seed, u64::MAX), config as u64);
    let seed = rng::child_seed(cfg.seed, cell);
    let mut tactile = rng::seeded(rng::child_seed(seed, stream::TACTILE));
    let offset = draw_offset(cfg.offset_range, &mut tactile);
    let shape = held_shape(cfg, shape_seed, [0.0, 0.0])?;
    let held = HeldDlo::from_centerline(shape.spec, shape.centerline, shape.grasp_arc, offset);
    let mut perception = rng::seeded(rng::child_seed(seed, stream::CALIBRATION));
    let view = held.observe(&cfg.scene.held, &cfg.noise, &mut perception);
    let frame = &view.frame;
    let vitac = if corrected { frame.vitac } else { None };
    let mut out = HandoverTrial {
        config,
        l_g,
        seed: seed_index,
        corrected,
        success: false,
        failure: None,
        first_gap: None,
        gap: None,
        attempts: 0,
        correction: None,
    };
    let rec = match track_frame(&frame.depth, &frame.mask, &frame.tcp, vitac, &cfg.track) {
        Ok(rec) => rec,
        Err(_) => {
            out.failure = Some(FailureKind::TrackingLost);
            return Ok(out);
        }
    };
    out.correction = rec.corrected.then(|| rec.correction.magnitude());
    let p_first = match vitac {
        Some(r) => grasp_center(&frame.tcp, &in_hand_vector(r)),
        None => frame.tcp.position,
    };
    let arm = SecondArm {
        workspace: cfg.workspace,
        ..SecondArm::new(held.centerline.clone(), held.spec.diameter, cfg.noise)
    };
    let world = handover_world(cfg, &held.tcp.position);
    let p = crate::handover::HandoverParams {
        l_g,
        correction: corrected,
        ..cfg.handover
    };
    let mut motion = rng::seeded(rng::child_seed(seed, stream::MOTION));
    let r = run_handover(&arm, &rec.shape, &p_first, &world, &p, &mut motion)
        .map_err(|e| ConfigError::new("handover", e.to_string()))?;
    out.success = r.success;
    out.failure = r.failure.map(FailureKind::from);
    out.first_gap = r.first_gap();
    out.gap = r.final_gap();
    out.attempts = r.attempts.len();
    Ok(out)
}

/// Sweep held shapes × L_g × seeds, each with correction on and off.
/// Trials are ordered by (config, L_g, seed, off-then-on).
pub fn run_handover_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<HandoverReport, ConfigError> {
    require(cfg, ExperimentKind::Handover)?;
    let n_l = cfg.l_g_values.len();
    let cells = cfg.configs * n_l * cfg.trials;
    let trials = par_map(2 * cells, jobs, |i| {
        let cell = i / 2;
        let corrected = i % 2 == 1;
        let config = cell / (n_l * cfg.trials);
        let l = (cell / cfg.trials) % n_l;
        let seed_index = cell % cfg.trials;
        handover_trial(
            cfg,
            config,
            cfg.l_g_values[l],
            seed_index,
            cell as u64,
            corrected,
        )
    });
    let trials: Vec<HandoverTrial> = trials.into_iter().collect::<Result<_, _>>()?;
    Ok(HandoverReport {
        seed: cfg.seed,
        summary: HandoverSummary::from_trials(&trials),
        trials,
    })
}

/// A generated bin scene for `gen-scene`.
pub fn generate_scene(cfg: &ExperimentConfig, index: usize) -> Result<Scene, ConfigError> {
    cfg.validate()?;
    let seed = rng::child_seed(cfg.seed, index as u64);
    gen_bin(
        cfg.scene.n_dlos,
        &cfg.scene.spec,
        &cfg.scene.bin,
        &cfg.scene.gen,
        rng::child_seed(seed, stream::SCENE),
    )
    .map_err(|e| ConfigError::new("scene", e.to_string()))
}
