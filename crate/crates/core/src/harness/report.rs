use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gate::{DesiderataReport, GateStatus, DESIDERATA};
use super::records::SceneMetrics;
use super::stats::Summary;
use crate::error::{Error, Result};

/// One scene's metrics with its verdicts, as written to `scenes/<id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene: SceneMetrics,
    pub desiderata: DesiderataReport,
}

pub const OBJECT_COLUMNS: [&str; 25] = [
    "scene_id",
    "object_id",
    "label",
    "occluded",
    "cd_symmetric_m",
    "cd_recon_to_gt_m",
    "cd_gt_to_recon_m",
    "align_rmse_m",
    "align_scale",
    "visible_cd_m",
    "occluded_cd_m",
    "occlusion_ratio",
    "stable",
    "stable_tilt_deg",
    "perturbations_reverted",
    "n_perturbations",
    "in_collision",
    "colliding_partners",
    "grasp_rate",
    "grasp_wilson_low",
    "grasp_wilson_high",
    "grasp_n",
    "recon_time_s",
    "peak_mem_bytes",
    "errors",
];

pub const SCENE_COLUMNS: [&str; 11] = [
    "scene_id",
    "n_objects",
    "scene_cd_m",
    "colliding_pairs",
    "total_recon_time_s",
    "mean_recon_time_s",
    "d1_accuracy",
    "d2_collision",
    "d3_stability",
    "d4_occlusion",
    "d5_latency",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is built from UTF-8 strings"))
}

/// One row per object, in scene then object order.
pub fn objects_csv(results: &[SceneResult]) -> Result<String> {
    let mut rows = Vec::new();
    for r in results {
        for o in &r.scene.objects {
            let stab = o.stability.as_ref();
            let grasp = o.grasp_transfer.as_ref();
            let chamfer = o.chamfer.as_ref();
            rows.push(vec![
                r.scene.scene_id.clone(),
                o.object_id.clone(),
                o.label.clone(),
                o.occluded.to_string(),
                opt(chamfer.map(|c| c.symmetric)),
                opt(chamfer.map(|c| c.mean_recon_to_gt)),
                opt(chamfer.map(|c| c.mean_gt_to_recon)),
                opt(o.alignment.as_ref().map(|a| a.rmse)),
                opt(o.alignment.as_ref().map(|a| a.transform.scale)),
                opt(o.visible_cd()),
                opt(o.occluded_cd()),
                opt(o.occlusion_ratio()),
                opt(stab.map(|s| s.stable)),
                opt(stab.and_then(|s| s.tilt_deg)),
                opt(stab.map(|s| s.perturbations_reverted)),
                opt(stab.map(|s| s.n_perturbations)),
                opt(o.in_collision),
                o.colliding_partners.join(";"),
                opt(grasp.map(|g| g.rate)),
                opt(grasp.map(|g| g.wilson_low)),
                opt(grasp.map(|g| g.wilson_high)),
                opt(grasp.map(|g| g.n)),
                opt(o.recon_time_s),
                opt(o.peak_mem_bytes),
                o.errors
                    .iter()
                    .map(|(k, v)| format!("{k}: {v}"))
                    .collect::<Vec<_>>()
                    .join("; "),
            ]);
        }
    }
    csv_string(&OBJECT_COLUMNS, rows)
}

/// One row per scene with the desiderata verdicts.
pub fn scenes_csv(results: &[SceneResult]) -> Result<String> {
    let rows = results
        .iter()
        .map(|r| {
            let s = &r.scene;
            let mut row = vec![
                s.scene_id.clone(),
                s.objects.len().to_string(),
                opt(s.scene_chamfer.as_ref().map(|c| c.symmetric)),
                opt(s.colliding_pairs()),
                opt(s.total_recon_time_s),
                opt(s.mean_recon_time_s),
            ];
            row.extend(
                r.desiderata
                    .statuses()
                    .iter()
                    .map(|st| st.as_str().to_string()),
            );
            row
        })
        .collect();
    csv_string(&SCENE_COLUMNS, rows)
}

/// Long format for plotting: one numeric value per row. Scene-level values
/// have an empty object id; pairwise values use `a|b`.
pub fn long_csv(results: &[SceneResult]) -> Result<String> {
    let mut rows = Vec::new();
    let mut push = |scene: &str, object: &str, metric: &str, value: Option<f64>| {
        if let Some(v) = value {
            rows.push(vec![
                scene.to_string(),
                object.to_string(),
                metric.to_string(),
                v.to_string(),
            ]);
        }
    };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    for r in results {
        let s = &r.scene;
        for o in &s.objects {
            for (metric, value) in object_metrics(o) {
                push(&s.scene_id, &o.object_id, metric, value);
            }
            push(
                &s.scene_id,
                &o.object_id,
                "stable",
                o.stability.as_ref().map(|x| flag(x.stable)),
            );
            push(
                &s.scene_id,
                &o.object_id,
                "in_collision",
                o.in_collision.map(flag),
            );
        }
        push(
            &s.scene_id,
            "",
            "scene_cd_m",
            s.scene_chamfer.as_ref().map(|c| c.symmetric),
        );
        push(
            &s.scene_id,
            "",
            "colliding_pairs",
            s.colliding_pairs().map(|p| p as f64),
        );
        push(&s.scene_id, "", "total_recon_time_s", s.total_recon_time_s);
        for e in &s.relative_distance_errors {
            push(
                &s.scene_id,
                &format!("{}|{}", e.object_a, e.object_b),
                "relative_distance_error_m",
                Some(e.error),
            );
        }
    }
    csv_string(&["scene_id", "object_id", "metric", "value"], rows)
}

/// Numeric per-object metrics shared by the long table and the summary.
fn object_metrics(o: &super::records::MetricsRecord) -> [(&'static str, Option<f64>); 10] {
    [
        ("cd_symmetric_m", o.symmetric_cd()),
        ("align_rmse_m", o.alignment.as_ref().map(|a| a.rmse)),
        ("visible_cd_m", o.visible_cd()),
        ("occluded_cd_m", o.occluded_cd()),
        ("occlusion_ratio", o.occlusion_ratio()),
        (
            "stable_tilt_deg",
            o.stability.as_ref().and_then(|s| s.tilt_deg),
        ),
        ("grasp_rate", o.grasp_transfer.as_ref().map(|g| g.rate)),
        ("recon_time_s", o.recon_time_s),
        ("peak_mem_bytes", o.peak_mem_bytes.map(|b| b as f64)),
        (
            "cd_recon_to_gt_m",
            o.chamfer.as_ref().map(|c| c.mean_recon_to_gt),
        ),
    ]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pass: usize,
    pub fail: usize,
    pub not_evaluable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_scenes: usize,
    pub n_objects: usize,
    pub metrics: BTreeMap<String, Summary>,
    pub gate: BTreeMap<String, StatusCounts>,
}

pub fn summarize(results: &[SceneResult]) -> RunSummary {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut add = |name: &str, v: Option<f64>| {
        let entry = values.entry(name.to_string()).or_default();
        if let Some(v) = v {
            entry.push(v);
        }
    };
    let mut gate: BTreeMap<String, StatusCounts> = DESIDERATA
        .iter()
        .map(|d| (d.to_string(), StatusCounts::default()))
        .collect();
    for r in results {
        let s = &r.scene;
        for o in &s.objects {
            for (metric, value) in object_metrics(o) {
                add(metric, value);
            }
        }
        add("scene_cd_m", s.scene_chamfer.as_ref().map(|c| c.symmetric));
        add("total_recon_time_s", s.total_recon_time_s);
        for e in &s.relative_distance_errors {
            add("relative_distance_error_m", Some(e.error));
        }
        for (name, status) in DESIDERATA.iter().zip(r.desiderata.statuses()) {
            let c = gate
                .get_mut(*name)
                .expect("every desideratum has a counter");
            match status {
                GateStatus::Pass => c.pass += 1,
                GateStatus::Fail => c.fail += 1,
                GateStatus::NotEvaluable => c.not_evaluable += 1,
            }
        }
    }
    if results.is_empty() {
        for r in object_metrics(&Default::default()).iter().map(|(m, _)| *m) {
            add(r, None);
        }
        add("scene_cd_m", None);
        add("total_recon_time_s", None);
        add("relative_distance_error_m", None);
    }
    RunSummary {
        n_scenes: results.len(),
        n_objects: results.iter().map(|r| r.scene.objects.len()).sum(),
        metrics: values
            .into_iter()
            .map(|(k, v)| (k, Summary::of(&v)))
            .collect(),
        gate,
    }
}

pub fn summary_json(results: &[SceneResult]) -> String {
    let mut s = serde_json::to_string_pretty(&summarize(results)).expect("summary serializes");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `objects.csv`, `scenes.csv`, `long.csv`, `summary.json` and one
/// `scenes/<scene_id>.json` per scene. Scenes are written in id order.
pub fn emit_reports(results: &[SceneResult], out_dir: &Path) -> Result<()> {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| a.scene.scene_id.cmp(&b.scene.scene_id));
    let scenes_dir = out_dir.join("scenes");
    std::fs::create_dir_all(&scenes_dir).map_err(|e| Error::io(&scenes_dir, e))?;
    write(&out_dir.join("objects.csv"), &objects_csv(&sorted)?)?;
    write(&out_dir.join("scenes.csv"), &scenes_csv(&sorted)?)?;
    write(&out_dir.join("long.csv"), &long_csv(&sorted)?)?;
    write(&out_dir.join("summary.json"), &summary_json(&sorted))?;
    for r in &sorted {
        let mut text = serde_json::to_string_pretty(r).expect("scene result serializes");
        text.push('\n');
        write(
            &scenes_dir.join(format!("{}.json", file_stem(&r.scene.scene_id))),
            &text,
        )?;
    }
    Ok(())
}

/// Scene id made safe for use as a file name.
fn file_stem(scene_id: &str) -> String {
    scene_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Reads back every `scenes/*.json` of a report directory, in scene id order.
pub fn load_results(metrics_dir: &Path) -> Result<Vec<SceneResult>> {
    let scenes_dir = metrics_dir.join("scenes");
    if !scenes_dir.is_dir() {
        return Err(Error::MissingFile(scenes_dir));
    }
    let mut paths: Vec<_> = std::fs::read_dir(&scenes_dir)
        .map_err(|e| Error::io(&scenes_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        out.push(super::manifest::parse_json::<SceneResult>(&text)?);
    }
    out.sort_by(|a, b| a.scene.scene_id.cmp(&b.scene.scene_id));
    Ok(out)
}
