//! Run-directory layout and plot-ready exports.
//!
//! ```text
//! <run>/config.json        scenario as run (seed filled in)
//! <run>/report.json        RunReport
//! <run>/tracks.csv         per-frame tracker state
//! <run>/path.csv           planned waypoints, one row per waypoint
//! <run>/flown.csv          UAV pose per tick
//! <run>/metrics.csv        λ_max, KL and entropy after every particle update
//! <run>/ground_truth.csv   target boxes
//! <run>/coverage.json      mapping coverage per mapped target
//! <run>/particles/*.json   particle snapshots
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::runner::RunOutput;
use super::{MissionError, MissionMode, ScenarioConfig};
use crate::localizer::{LocalizationStatus, ParticleSnapshot};
use crate::mapping::CoverageReport;
use crate::tracker::TrackLogRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub phase: String,
    pub seq: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlownRecord {
    pub frame: u64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub mode: MissionMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub frame: u64,
    pub t: f64,
    pub target_id: u64,
    pub lambda_max: f64,
    pub kl: Option<f64>,
    pub entropy: f64,
    pub status: LocalizationStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub frame: u64,
    pub t: f64,
    pub from: MissionMode,
    pub to: MissionMode,
    pub target_id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub target_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub half_x: f64,
    pub half_y: f64,
    pub half_z: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLogs {
    pub tracks: Vec<TrackLogRecord>,
    pub plans: Vec<PlanRecord>,
    pub flown: Vec<FlownRecord>,
    pub metrics: Vec<MetricRecord>,
    pub snapshots: Vec<ParticleSnapshot>,
    pub coverage: BTreeMap<u64, CoverageReport>,
    pub truth: Vec<TruthRecord>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), MissionError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| MissionError::Log(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| MissionError::Log(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| MissionError::io(path, e))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, MissionError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| MissionError::Log(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| MissionError::Log(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), MissionError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| MissionError::Log(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| MissionError::io(path, e))
}

/// Writes every log of `out` under `dir`, creating it if needed.
pub fn write_run_dir(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput) -> Result<(), MissionError> {
    let particles = dir.join("particles");
    fs::create_dir_all(&particles).map_err(|e| MissionError::io(&particles, e))?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("report.json"), &out.report)?;
    write_json(&dir.join("coverage.json"), &out.logs.coverage)?;
    write_csv(&dir.join("tracks.csv"), &out.logs.tracks)?;
    write_csv(&dir.join("path.csv"), &out.logs.plans)?;
    write_csv(&dir.join("flown.csv"), &out.logs.flown)?;
    write_csv(&dir.join("metrics.csv"), &out.logs.metrics)?;
    write_csv(&dir.join("ground_truth.csv"), &out.logs.truth)?;
    for (k, s) in out.logs.snapshots.iter().enumerate() {
        let name = format!("{k:04}_target{}_frame{}.json", s.target_id, s.frame);
        write_json(&particles.join(name), s)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PathPoint {
    x: f64,
    y: f64,
    z: f64,
    t: f64,
}

#[derive(Serialize)]
struct SeriesPoint {
    target_id: u64,
    frame: u64,
    t: f64,
    lambda_max: f64,
    entropy: f64,
    kl: Option<f64>,
}

#[derive(Serialize)]
struct CloudPoint {
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize)]
struct PlannedPoint {
    kind: &'static str,
    phase: String,
    x: f64,
    y: f64,
    z: f64,
}

/// Turns a run directory into plot-ready CSV series under `<run>/plot/`.
/// Returns the files written.
pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>, MissionError> {
    let out = run_dir.join("plot");
    fs::create_dir_all(&out).map_err(|e| MissionError::io(&out, e))?;
    let mut written = Vec::new();

    let flown: Vec<FlownRecord> = read_csv(&run_dir.join("flown.csv"))?;
    let p = out.join("uav_path.csv");
    let rows: Vec<PathPoint> = flown
        .iter()
        .map(|f| PathPoint {
            x: f.x,
            y: f.y,
            z: f.z,
            t: f.t,
        })
        .collect();
    write_csv(&p, &rows)?;
    written.push(p);

    let metrics: Vec<MetricRecord> = read_csv(&run_dir.join("metrics.csv"))?;
    let p = out.join("convergence.csv");
    let rows: Vec<SeriesPoint> = metrics
        .iter()
        .map(|m| SeriesPoint {
            target_id: m.target_id,
            frame: m.frame,
            t: m.t,
            lambda_max: m.lambda_max,
            entropy: m.entropy,
            kl: m.kl,
        })
        .collect();
    write_csv(&p, &rows)?;
    written.push(p);

    let plans: Vec<PlanRecord> = read_csv(&run_dir.join("path.csv"))?;
    let p = out.join("planned_vs_flown.csv");
    let rows: Vec<PlannedPoint> = plans
        .iter()
        .map(|r| PlannedPoint {
            kind: "planned",
            phase: r.phase.clone(),
            x: r.x,
            y: r.y,
            z: r.z,
        })
        .chain(flown.iter().map(|f| {
            PlannedPoint {
                kind: "flown",
                phase: serde_json::to_value(f.mode)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                x: f.x,
                y: f.y,
                z: f.z,
            }
        }))
        .collect();
    write_csv(&p, &rows)?;
    written.push(p);

    let particles = run_dir.join("particles");
    let mut names: Vec<PathBuf> = match fs::read_dir(&particles) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    for src in names {
        let text = fs::read_to_string(&src).map_err(|e| MissionError::io(&src, e))?;
        let snap: ParticleSnapshot =
            serde_json::from_str(&text).map_err(|e| MissionError::Log(format!("{}: {e}", src.display())))?;
        let stem = src.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
        let p = out.join(format!("particles_{stem}.csv"));
        let rows: Vec<CloudPoint> = snap
            .points
            .iter()
            .map(|q| CloudPoint {
                x: q[0],
                y: q[1],
                z: q[2],
            })
            .collect();
        write_csv(&p, &rows)?;
        written.push(p);
    }
    Ok(written)
}
