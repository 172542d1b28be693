//! Experiment configuration, runners and reporting.
//!
//! Every runner is a pure function of its configuration: a master seed fans
//! out into one child seed per trial index, trials may run in parallel, and
//! results are merged in trial order.

mod config;
mod experiments;
mod pipeline;
mod report;

pub use config::{set_path, ConfigError, ExperimentConfig, ExperimentKind, SceneConfig};
pub use experiments::{
    generate_scene, handover_world, par_map, run_bin_picking, run_handover_experiment,
    run_tracking_experiment, BinPickingReport, BinRow, HandoverReport, HandoverSummary,
    HandoverTrial, TrackingReport, TrackingTrial,
};
pub use pipeline::{run_full_pipeline, PipelineReport, Stage, StageOutcome};
pub use report::{
    bin_table_csv, correction_histogram_csv, emit_plots_data, failure_table_csv,
    handover_scatter_csv, parse_bin_table_csv, parse_handover_scatter_csv, scatter_rows,
    tracking_csv, ExperimentReport, ScatterRow,
};

use crate::handover::HandoverFailure;
use crate::mounting::MountFailure;
use crate::pick::PickFailure;
use serde::{Deserialize, Serialize};

/// Why a trial did not succeed. Each failed trial carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Dropped,
    MultiGrasp,
    NoPose,
    /// Too steep for a top-down grasp.
    Vertical,
    MissedGrasp,
    Entangled,
    TrackingLost,
    OffsetTooLarge,
    PlanFailure,
    UnrecoverableMiss,
    GapTooLarge,
    FixtureMiss,
    Misaligned,
    Collision,
}

impl FailureKind {
    /// Categories a bin pick can end in.
    pub const PICKING: [FailureKind; 6] = [
        FailureKind::Dropped,
        FailureKind::MultiGrasp,
        FailureKind::NoPose,
        FailureKind::Vertical,
        FailureKind::MissedGrasp,
        FailureKind::Entangled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureKind::Dropped => "dropped",
            FailureKind::MultiGrasp => "multi-grasp",
            FailureKind::NoPose => "no-pose",
            FailureKind::Vertical => "vertical",
            FailureKind::MissedGrasp => "missed-grasp",
            FailureKind::Entangled => "entangled",
            FailureKind::TrackingLost => "tracking-lost",
            FailureKind::OffsetTooLarge => "offset-too-large",
            FailureKind::PlanFailure => "plan-failure",
            FailureKind::UnrecoverableMiss => "unrecoverable-miss",
            FailureKind::GapTooLarge => "gap-too-large",
            FailureKind::FixtureMiss => "fixture-miss",
            FailureKind::Misaligned => "misaligned",
            FailureKind::Collision => "collision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL_FAILURES.iter().copied().find(|k| k.name() == s)
    }
}

const ALL_FAILURES: [FailureKind; 14] = [
    FailureKind::Dropped,
    FailureKind::MultiGrasp,
    FailureKind::NoPose,
    FailureKind::Vertical,
    FailureKind::MissedGrasp,
    FailureKind::Entangled,
    FailureKind::TrackingLost,
    FailureKind::OffsetTooLarge,
    FailureKind::PlanFailure,
    FailureKind::UnrecoverableMiss,
    FailureKind::GapTooLarge,
    FailureKind::FixtureMiss,
    FailureKind::Misaligned,
    FailureKind::Collision,
];

impl From<PickFailure> for FailureKind {
    fn from(f: PickFailure) -> Self {
        match f {
            PickFailure::Dropped => FailureKind::Dropped,
            PickFailure::MultiGrasp => FailureKind::MultiGrasp,
            PickFailure::NoGraspPose => FailureKind::NoPose,
            PickFailure::Vertical => FailureKind::Vertical,
            PickFailure::MissedGrasp => FailureKind::MissedGrasp,
            PickFailure::Entangled => FailureKind::Entangled,
        }
    }
}

impl From<HandoverFailure> for FailureKind {
    fn from(f: HandoverFailure) -> Self {
        match f {
            HandoverFailure::OffsetTooLarge => FailureKind::OffsetTooLarge,
            HandoverFailure::PlanFailure => FailureKind::PlanFailure,
            HandoverFailure::UnrecoverableMiss => FailureKind::UnrecoverableMiss,
            HandoverFailure::GapTooLarge => FailureKind::GapTooLarge,
        }
    }
}

impl From<MountFailure> for FailureKind {
    fn from(f: MountFailure) -> Self {
        match f {
            MountFailure::FixtureMiss => FailureKind::FixtureMiss,
            MountFailure::Misaligned => FailureKind::Misaligned,
            MountFailure::Collision => FailureKind::Collision,
        }
    }
}
