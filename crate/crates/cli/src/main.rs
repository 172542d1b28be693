//! `dlo`: command-line driver for the simulator and the experiments.
//!
//! Exit codes: 0 when the command ran (failed trials are data), 2 for
//! configuration errors and 3 for I/O errors.

use clap::{Args, Parser, Subcommand};
use dlo_core::geometry::Polyline3D;
use dlo_core::harness::{
    emit_plots_data, generate_scene, run_bin_picking, run_full_pipeline, run_handover_experiment,
    run_tracking_experiment, ConfigError, ExperimentConfig, ExperimentKind, ExperimentReport,
};
use dlo_core::io::{self, IoError};
use dlo_core::mounting::{execute_mount, plan_mount, Fixture};
use dlo_core::pick::{perceive, run_pick, PickRngs};
use dlo_core::rng::{self, stream};
use dlo_core::sim::{render_scene, Scene};
use dlo_core::tracking::track_frame;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "dlo",
    version,
    about = "DLO bin picking, tracking, handover and mounting simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON). Defaults depend on the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent trials (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a configuration leaf, e.g. `--set pick.r=0.99`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a bin scene and its noise-free depth image.
    GenScene {
        /// Bin index under the master seed.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run perception on a scene: top layer, masks and the target's raw shape.
    Segment {
        #[arg(long)]
        scene: PathBuf,
    },
    /// One pick on a scene; writes the outcome and the updated scene.
    Pick {
        #[arg(long)]
        scene: PathBuf,
    },
    /// The bin-picking experiment.
    PickBatch,
    /// Replay tracking frames, or run the tracking experiment without `--frames`.
    Track {
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// The handover experiment.
    Handover,
    /// Plan and execute clip mounting for a tracked shape.
    Mount {
        /// Polyline JSON of the tracked shape.
        #[arg(long)]
        shape: PathBuf,
        /// Arc position of the holding grasp; defaults to `pick.r` of the length.
        #[arg(long)]
        hold_arc: Option<f64>,
        /// Fixture list JSON; defaults to the configured fixtures.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// The full assembly pipeline.
    Pipeline,
    /// Write CSV bundles for a report.
    Plots {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Io(IoError),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

impl Command {
    fn default_kind(&self) -> ExperimentKind {
        match self {
            Command::GenScene { .. }
            | Command::Segment { .. }
            | Command::Pick { .. }
            | Command::PickBatch
            | Command::Plots { .. } => ExperimentKind::BinPicking,
            Command::Track { .. } => ExperimentKind::Tracking,
            Command::Handover => ExperimentKind::Handover,
            Command::Mount { .. } | Command::Pipeline => ExperimentKind::FullPipeline,
        }
    }
}

fn load_config(common: &Common, kind: ExperimentKind) -> CliResult<ExperimentConfig> {
    let mut overrides = Vec::new();
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::new(s.clone(), "expected KEY=VALUE"))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let doc = match &common.config {
        Some(p) => {
            let bytes = io::read_bytes(p)?;
            String::from_utf8(bytes).map_err(|_| IoError::format(p, "not UTF-8"))?
        }
        None => {
            serde_json::to_string(&ExperimentConfig::for_kind(kind)).expect("config serializes")
        }
    };
    Ok(ExperimentConfig::from_json(&doc, &overrides)?)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(io::write_bytes(path, text.as_bytes())?)
}

fn out_dir(common: &Common) -> CliResult<&Path> {
    std::fs::create_dir_all(&common.out).map_err(|e| IoError::io(&common.out, e))?;
    Ok(&common.out)
}

fn write_report(common: &Common, report: &ExperimentReport) -> CliResult<PathBuf> {
    let dir = out_dir(common)?;
    let path = dir.join("report.json");
    io::write_json(&path, report)?;
    emit_plots_data(report, dir)?;
    Ok(path)
}

#[derive(Serialize)]
struct SegmentSummary {
    target: Option<usize>,
    target_instance: Option<usize>,
    layer_depth: Option<f64>,
    prompts: usize,
    raw_masks: usize,
    kept_masks: usize,
    skeleton_paths: usize,
    error: Option<String>,
}

/// One frame of a tracking replay; image paths are relative to the frames file.
#[derive(Deserialize)]
struct FrameSpec {
    depth: PathBuf,
    mask: PathBuf,
    tcp: dlo_core::geometry::Pose,
    vitac: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct MountOutput {
    hold_arc: f64,
    plan: dlo_core::mounting::MountPlan,
    report: dlo_core::mounting::MountReport,
}

fn run(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    let cfg = load_config(common, cli.command.default_kind())?;
    match &cli.command {
        Command::GenScene { index } => {
            let scene = generate_scene(&cfg, *index)?;
            let dir = out_dir(common)?;
            io::write_json(&dir.join("scene.json"), &scene)?;
            let render = render_scene(&scene, cfg.scene.pitch);
            io::write_depth_pgm(&dir.join("depth.pgm"), &render.depth)?;
            println!(
                "scene with {} DLOs, {} entanglement edges -> {}",
                scene.instances.len(),
                scene.entanglement.len(),
                dir.display()
            );
        }
        Command::Segment { scene } => {
            let scene: Scene = io::read_json(scene)?;
            let mut rng = rng::seeded(rng::child_seed(cfg.seed, stream::PERCEPTION));
            let dir = out_dir(common)?;
            let summary = match perceive(&scene, &cfg.pick_config(), &mut rng) {
                Ok(p) => {
                    io::write_depth_pgm(&dir.join("depth.pgm"), &p.depth)?;
                    io::write_mask_pgm(&dir.join("top_layer.pgm"), &p.top_layer)?;
                    for (k, m) in p.processed.masks.iter().enumerate() {
                        io::write_mask_pgm(&dir.join(format!("mask_{k:02}.pgm")), &m.mask)?;
                    }
                    io::write_json(&dir.join("raw_shape.json"), &p.raw_shape)?;
                    SegmentSummary {
                        target: Some(p.target),
                        target_instance: p.target_instance,
                        layer_depth: p.layer_depth,
                        prompts: p.prompts.len(),
                        raw_masks: p.raw.len(),
                        kept_masks: p.processed.len(),
                        skeleton_paths: p.skeleton.paths.len(),
                        error: None,
                    }
                }
                Err(e) => SegmentSummary {
                    target: None,
                    target_instance: None,
                    layer_depth: None,
                    prompts: 0,
                    raw_masks: 0,
                    kept_masks: 0,
                    skeleton_paths: 0,
                    error: Some(e.to_string()),
                },
            };
            io::write_json(&dir.join("segment.json"), &summary)?;
            println!(
                "kept {} of {} masks, target {:?}",
                summary.kept_masks, summary.raw_masks, summary.target_instance
            );
        }
        Command::Pick { scene } => {
            let mut scene: Scene = io::read_json(scene)?;
            let mut rngs = PickRngs::from_seed(cfg.seed);
            let outcome = run_pick(&mut scene, &cfg.pick_config(), &mut rngs);
            let dir = out_dir(common)?;
            io::write_json(&dir.join("pick.json"), &outcome)?;
            io::write_json(&dir.join("scene.json"), &scene)?;
            println!(
                "pick ended in {:?}, failure {:?}",
                outcome.terminal, outcome.failure
            );
        }
        Command::PickBatch => {
            let r = run_bin_picking(&cfg, common.jobs)?;
            let line = format!(
                "{} bins, overall success rate {:.3}",
                r.bins.len(),
                r.overall_success_rate()
            );
            let path = write_report(common, &ExperimentReport::BinPicking(r))?;
            println!("{line} -> {}", path.display());
        }
        Command::Track {
            frames: Some(frames),
        } => {
            let specs: Vec<FrameSpec> = io::read_json(frames)?;
            let base = frames.parent().unwrap_or(Path::new("."));
            let mut shapes: Vec<Option<Polyline3D>> = Vec::new();
            let mut csv = String::from("frame,ok,corrected,correction,elapsed_ms\n");
            for (i, f) in specs.iter().enumerate() {
                let depth = io::read_depth_pgm(&base.join(&f.depth))?;
                let mask = io::read_mask_pgm(&base.join(&f.mask))?;
                let start = Instant::now();
                let rec = track_frame(&depth, &mask, &f.tcp, f.vitac, &cfg.track);
                let ms = start.elapsed().as_secs_f64() * 1000.0;
                match rec {
                    Ok(r) => {
                        csv.push_str(&format!(
                            "{i},true,{},{},{ms}\n",
                            r.corrected,
                            r.correction.magnitude()
                        ));
                        shapes.push(Some(r.shape));
                    }
                    Err(_) => {
                        csv.push_str(&format!("{i},false,false,,{ms}\n"));
                        shapes.push(None);
                    }
                }
            }
            let dir = out_dir(common)?;
            io::write_json(&dir.join("shapes.json"), &shapes)?;
            write_text(&dir.join("track.csv"), &csv)?;
            println!(
                "tracked {} of {} frames",
                shapes.iter().flatten().count(),
                shapes.len()
            );
        }
        Command::Track { frames: None } => {
            let r = run_tracking_experiment(&cfg, common.jobs)?;
            let line = format!(
                "{} scenes, worst Hausdorff {:?} m",
                r.trials.len(),
                r.max_hausdorff()
            );
            let path = write_report(common, &ExperimentReport::Tracking(r))?;
            println!("{line} -> {}", path.display());
        }
        Command::Handover => {
            let r = run_handover_experiment(&cfg, common.jobs)?;
            let s = &r.summary;
            let line = format!(
                "success on {:.3} off {:.3}, mean gap reduction {:.4} m",
                s.success_rate_on, s.success_rate_off, s.mean_gap_reduction
            );
            let path = write_report(common, &ExperimentReport::Handover(r))?;
            println!("{line} -> {}", path.display());
        }
        Command::Mount {
            shape,
            hold_arc,
            fixtures,
        } => {
            let s: Polyline3D = io::read_json(shape)?;
            let fixtures: Vec<Fixture> = match fixtures {
                Some(p) => io::read_json(p)?,
                None => cfg.fixtures.clone(),
            };
            let hold = hold_arc.unwrap_or(cfg.pick.r * s.arc_length());
            let mut planner = rng::seeded(rng::child_seed(cfg.seed, stream::PLANNER));
            let plan = plan_mount(
                &s,
                hold,
                cfg.scene.spec.diameter,
                &fixtures,
                &cfg.world,
                &cfg.mount,
                &mut planner,
            )
            .map_err(|e| ConfigError::new("fixtures", e.to_string()))?;
            let mut motion = rng::seeded(rng::child_seed(cfg.seed, stream::MOTION));
            let report = execute_mount(&plan, &cfg.world, &cfg.noise, &mut motion);
            let dir = out_dir(common)?;
            let ok = report.fixtures.iter().filter(|f| f.success).count();
            let n = report.fixtures.len();
            io::write_json(
                &dir.join("mount.json"),
                &MountOutput {
                    hold_arc: hold,
                    plan,
                    report,
                },
            )?;
            println!("mounted {ok} of {n} fixtures");
        }
        Command::Pipeline => {
            let r = run_full_pipeline(&cfg)?;
            let line = format!(
                "end-to-end success {}, failure {:?}",
                r.success,
                r.failure.map(|f| f.name())
            );
            let path = write_report(common, &ExperimentReport::FullPipeline(r))?;
            println!("{line} -> {}", path.display());
        }
        Command::Plots { report } => {
            let r: ExperimentReport = io::read_json(report)?;
            let files = emit_plots_data(&r, out_dir(common)?)?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
