//! Manifest-driven evaluation: per-object and per-scene metrics, desiderata
//! verdicts and report files.

mod config;
mod evaluate;
mod gate;
mod manifest;
mod records;
mod report;
mod stats;
pub mod synthetic;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{CollisionConfig, HarnessConfig, OcclusionConfig, SceneMode, Stages, Thresholds};
pub use evaluate::{evaluate_object, evaluate_scene, relative_errors_from_clouds, SceneEvaluation};
pub use gate::{
    desiderata_gate, AccuracyGate, CollisionGate, DesiderataReport, GateStatus, LatencyGate,
    OcclusionGate, StabilityGate, DESIDERATA,
};
pub use manifest::{load_manifest, parse_manifest, ObjectEntry, SceneManifest};
pub use records::{
    recon_time_totals, GraspSummary, MetricsRecord, RelativeDistanceError, SceneCollision,
    SceneMetrics, SceneTimings, StabilitySummary, StageTimings,
};
pub use report::{
    emit_reports, load_results, long_csv, objects_csv, scenes_csv, summarize, summary_json,
    RunSummary, SceneResult, StatusCounts, OBJECT_COLUMNS, SCENE_COLUMNS,
};
pub use stats::{median, quantile, Summary};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub results: Vec<SceneResult>,
    pub timings: Vec<SceneTimings>,
}

impl RunOutcome {
    pub fn any_gate_failed(&self) -> bool {
        self.results.iter().any(|r| r.desiderata.any_fail())
    }
}

/// Expands directories into the `*.json` manifests below them (recursively,
/// sorted); files are taken as they are.
pub fn collect_manifests(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.extension().is_some_and(|x| x == "json") {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    Ok(out)
}

/// Loads every manifest, evaluates each scene, gates it and writes the
/// reports, the resolved config and the harness timings to `out_dir`.
pub fn run(
    manifest_paths: &[PathBuf],
    config: &HarnessConfig,
    out_dir: &Path,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut manifests = manifest_paths
        .iter()
        .map(|p| load_manifest(p))
        .collect::<Result<Vec<_>>>()?;
    manifests.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    if let Some(w) = manifests
        .windows(2)
        .find(|w| w[0].scene_id == w[1].scene_id)
    {
        return Err(Error::InvalidArgument(format!(
            "scene_id {:?} appears twice",
            w[0].scene_id
        )));
    }

    let evaluate_all = || -> Result<Vec<SceneEvaluation>> {
        manifests
            .iter()
            .map(|m| {
                log::info!(
                    "evaluating scene {} ({} objects)",
                    m.scene_id,
                    m.objects.len()
                );
                evaluate_scene(m, config)
            })
            .collect()
    };
    let evaluations = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} workers: {e}")))?
            .install(evaluate_all)?,
        None => evaluate_all()?,
    };

    let mut results = Vec::with_capacity(evaluations.len());
    let mut timings = Vec::with_capacity(evaluations.len());
    for e in evaluations {
        let desiderata = desiderata_gate(&e.metrics, &config.thresholds);
        results.push(SceneResult {
            scene: e.metrics,
            desiderata,
        });
        timings.push(e.timings);
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_json(&out_dir.join(RESOLVED_CONFIG_FILE), config)?;
    emit_reports(&results, out_dir)?;
    write_json(&out_dir.join(TIMINGS_FILE), &timings)?;
    Ok(RunOutcome { results, timings })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads the resolved config written next to a run's reports.
pub fn load_resolved_config(metrics_dir: &Path) -> Result<HarnessConfig> {
    let path = metrics_dir.join(RESOLVED_CONFIG_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    HarnessConfig::load(&path)
}

#[cfg(test)]
mod tests;
