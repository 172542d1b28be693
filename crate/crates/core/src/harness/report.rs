use super::{
    BinPickingReport, BinRow, FailureKind, HandoverReport, PipelineReport, TrackingReport,
};
use crate::io::{write_bytes, write_json, IoError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A report of any experiment kind, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "report", rename_all = "kebab-case")]
pub enum ExperimentReport {
    BinPicking(BinPickingReport),
    Tracking(TrackingReport),
    Handover(HandoverReport),
    FullPipeline(PipelineReport),
}

fn to_csv<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, String> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| e.to_string())
}

/// Header `bin,n_dlos,successes,errors,entanglements,success_rate`; one row
/// per bin and an `overall` row.
pub fn bin_table_csv(report: &BinPickingReport) -> String {
    if report.rows.is_empty() {
        return "bin,n_dlos,successes,errors,entanglements,success_rate\n".to_string();
    }
    to_csv(&report.rows, None)
}

pub fn parse_bin_table_csv(text: &str) -> Result<Vec<BinRow>, String> {
    from_csv(text)
}

/// Picks per failure category and bin; the `errors` column of the table
/// lumps these together.
pub fn failure_table_csv(report: &BinPickingReport) -> String {
    let mut out = String::from("bin");
    for k in FailureKind::PICKING {
        out.push(',');
        out.push_str(k.name());
    }
    out.push('\n');
    for (i, counts) in report.failure_counts().iter().enumerate() {
        out.push_str(&(i + 1).to_string());
        for (_, c) in counts {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

/// One point of the gap scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub config: usize,
    pub l_g: f64,
    pub seed: usize,
    pub corrected: bool,
    pub gap: Option<f64>,
    pub success: bool,
    pub failure: Option<FailureKind>,
}

pub fn scatter_rows(report: &HandoverReport) -> Vec<ScatterRow> {
    report
        .trials
        .iter()
        .map(|t| ScatterRow {
            config: t.config,
            l_g: t.l_g,
            seed: t.seed,
            corrected: t.corrected,
            gap: t.gap,
            success: t.success,
            failure: t.failure,
        })
        .collect()
}

/// One row per handover trial: `config,l_g,seed,corrected,gap,success,failure`.
pub fn handover_scatter_csv(report: &HandoverReport) -> String {
    let rows = scatter_rows(report);
    if rows.is_empty() {
        return "config,l_g,seed,corrected,gap,success,failure\n".to_string();
    }
    to_csv(&rows, None)
}

pub fn parse_handover_scatter_csv(text: &str) -> Result<Vec<ScatterRow>, String> {
    from_csv(text)
}

#[derive(Serialize)]
struct HistRow {
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

/// Counts of correction magnitudes in `width`-wide bins from zero.
pub fn correction_histogram_csv(values: &[f64], width: f64) -> String {
    let n = values
        .iter()
        .map(|v| (v / width).floor() as usize + 1)
        .max()
        .unwrap_or(0);
    let mut counts = vec![0usize; n];
    for v in values {
        counts[(v / width).floor() as usize] += 1;
    }
    let rows: Vec<HistRow> = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistRow {
            bin_lo: i as f64 * width,
            bin_hi: (i + 1) as f64 * width,
            count,
        })
        .collect();
    if rows.is_empty() {
        return "bin_lo,bin_hi,count\n".to_string();
    }
    to_csv(&rows, None)
}

/// Per-scene tracking metrics including wall time.
pub fn tracking_csv(report: &TrackingReport) -> String {
    let mut out = String::from(
        "trial,success,hausdorff,correction,mask_pixels,clusters,bridges,elapsed_ms\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in &report.trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t.trial,
            t.success,
            opt(t.hausdorff),
            opt(t.correction),
            t.mask_pixels,
            t.clusters,
            t.bridges,
            t.elapsed_ms
        ));
    }
    out
}

fn stages_csv(report: &PipelineReport) -> String {
    let mut out = String::from("stage,success,failure\n");
    for s in &report.stages {
        let stage = serde_json::to_value(s.stage)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        out.push_str(&format!(
            "{stage},{},{}\n",
            s.success,
            s.failure.map(FailureKind::name).unwrap_or("")
        ));
    }
    out
}

fn fixtures_csv(report: &PipelineReport) -> String {
    let mut out = String::from("fixture,success,failure,residual_y,residual_z\n");
    for f in report.mount.iter().flat_map(|m| &m.fixtures) {
        let (y, z) = f.residual.map_or((String::new(), String::new()), |r| {
            (r[0].to_string(), r[1].to_string())
        });
        let failure = f.failure.map(|k| FailureKind::from(k).name()).unwrap_or("");
        out.push_str(&format!("{},{},{failure},{y},{z}\n", f.id, f.success));
    }
    out
}

/// Write the CSV bundle for `report` into `dir` and return the paths written.
pub fn emit_plots_data(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    match report {
        ExperimentReport::BinPicking(r) => {
            files.push(("table.csv", bin_table_csv(r)));
            files.push(("failures.csv", failure_table_csv(r)));
        }
        ExperimentReport::Tracking(r) => {
            files.push(("tracking.csv", tracking_csv(r)));
            let c: Vec<f64> = r.trials.iter().filter_map(|t| t.correction).collect();
            files.push(("correction_hist.csv", correction_histogram_csv(&c, 0.005)));
        }
        ExperimentReport::Handover(r) => {
            files.push(("scatter.csv", handover_scatter_csv(r)));
            let c: Vec<f64> = r.trials.iter().filter_map(|t| t.correction).collect();
            files.push(("correction_hist.csv", correction_histogram_csv(&c, 0.005)));
        }
        ExperimentReport::FullPipeline(r) => {
            files.push(("stages.csv", stages_csv(r)));
            files.push(("fixtures.csv", fixtures_csv(r)));
        }
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_bytes(&path, text.as_bytes())?;
        written.push(path);
    }
    if let ExperimentReport::Handover(r) = report {
        let path = dir.join("summary.json");
        write_json(&path, &r.summary)?;
        written.push(path);
    }
    Ok(written)
}
