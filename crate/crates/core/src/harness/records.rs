use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::SceneMode;
use crate::alignment::AlignmentResult;
use crate::collision::SceneCollisionReport;
use crate::grasping::GraspTransferResult;
use crate::mesh::ChamferResult;
use crate::stability::StabilityVerdict;
use crate::visibility::OcclusionSplit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub stable: bool,
    /// Tilt (deg) of the surviving pose from the scene pose.
    pub tilt_deg: Option<f64>,
    pub perturbations_reverted: usize,
    pub n_perturbations: usize,
}

impl From<&StabilityVerdict> for StabilitySummary {
    fn from(v: &StabilityVerdict) -> Self {
        Self {
            stable: v.has_stable_pose_near_scene,
            tilt_deg: v.surviving_pose.as_ref().map(|p| p.tilt_from_scene),
            perturbations_reverted: v.perturbations_reverted,
            n_perturbations: v.n_perturbations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSummary {
    pub rate: f64,
    pub n: usize,
    pub successes: usize,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl From<&GraspTransferResult> for GraspSummary {
    fn from(r: &GraspTransferResult) -> Self {
        Self {
            rate: r.rate,
            n: r.n,
            successes: r.successes,
            wilson_low: r.wilson_low,
            wilson_high: r.wilson_high,
        }
    }
}

/// Everything measured for one object. `None` marks a metric that was not
/// computed, either because it does not apply or because a stage failed; the
/// reason for a failure is in `errors` keyed by stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub object_id: String,
    pub label: String,
    pub occluded: bool,
    pub chamfer: Option<ChamferResult>,
    pub alignment: Option<AlignmentResult>,
    /// Present only for objects flagged occluded.
    pub occlusion: Option<OcclusionSplit>,
    pub stability: Option<StabilitySummary>,
    /// Full verdict with per-perturbation runs.
    pub stability_trace: Option<StabilityVerdict>,
    pub in_collision: Option<bool>,
    pub colliding_partners: Vec<String>,
    pub grasp_transfer: Option<GraspSummary>,
    pub recon_time_s: Option<f64>,
    pub peak_mem_bytes: Option<u64>,
    pub errors: BTreeMap<String, String>,
}

impl MetricsRecord {
    pub fn symmetric_cd(&self) -> Option<f64> {
        self.chamfer.as_ref().map(|c| c.symmetric)
    }

    pub fn visible_cd(&self) -> Option<f64> {
        self.occlusion.as_ref().and_then(|o| o.visible_cd)
    }

    pub fn occluded_cd(&self) -> Option<f64> {
        self.occlusion.as_ref().and_then(|o| o.occluded_cd)
    }

    pub fn occlusion_ratio(&self) -> Option<f64> {
        self.occlusion.as_ref().and_then(|o| o.ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistanceError {
    pub object_a: String,
    pub object_b: String,
    /// Symmetric Chamfer distance (m) between the two placed reconstructions.
    pub recon_cd: f64,
    /// The same between the two ground-truth objects.
    pub gt_cd: f64,
    /// `recon_cd - gt_cd`; positive means the objects ended up too far apart.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCollision {
    /// Object order of the report's rows and columns.
    pub object_ids: Vec<String>,
    pub report: SceneCollisionReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: String,
    pub scene_mode: SceneMode,
    /// Sorted by object id.
    pub objects: Vec<MetricsRecord>,
    pub scene_chamfer: Option<ChamferResult>,
    /// Whole-scene alignment, in whole-scene mode.
    pub scene_alignment: Option<AlignmentResult>,
    /// One entry per pair of placed objects.
    pub relative_distance_errors: Vec<RelativeDistanceError>,
    /// Collisions among the placed objects.
    pub collision: Option<SceneCollision>,
    /// Sum of adapter-reported times; `None` if any object lacks one.
    pub total_recon_time_s: Option<f64>,
    pub mean_recon_time_s: Option<f64>,
    pub errors: BTreeMap<String, String>,
}

impl SceneMetrics {
    pub fn colliding_pairs(&self) -> Option<usize> {
        self.collision.as_ref().map(|c| c.report.n_colliding_pairs)
    }

    /// Whether the collision report covers every object of the scene.
    pub fn collision_complete(&self) -> bool {
        self.collision
            .as_ref()
            .is_some_and(|c| c.object_ids.len() == self.objects.len())
    }
}

/// Total and mean of per-object adapter times; `None` when any is missing.
pub fn recon_time_totals(times: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    if times.is_empty() {
        return (None, None);
    }
    let all: Option<Vec<f64>> = times.iter().copied().collect();
    match all {
        Some(t) => {
            let total: f64 = t.iter().sum();
            (Some(total), Some(total / t.len() as f64))
        }
        None => (None, None),
    }
}

/// Harness wall time per stage, kept apart from the metrics so reports stay
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<(String, f64)>,
    pub total_s: f64,
}

impl StageTimings {
    /// Runs `f`, recording its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.stages
            .push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().map(|(_, s)| s).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneTimings {
    pub scene_id: String,
    pub scene: StageTimings,
    pub objects: BTreeMap<String, StageTimings>,
    pub total_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapter_times_aggregate() {
        assert_eq!(
            recon_time_totals(&[Some(0.5), Some(1.5)]),
            (Some(2.0), Some(1.0))
        );
        assert_eq!(recon_time_totals(&[Some(0.5), None]), (None, None));
        assert_eq!(recon_time_totals(&[]), (None, None));
    }

    #[test]
    fn stage_timer_records_each_stage() {
        let mut t = StageTimings::default();
        let v = t.time("a", || 3);
        t.time("b", || {
            std::thread::sleep(std::time::Duration::from_millis(5))
        });
        assert_eq!(v, 3);
        assert_eq!(t.stages.len(), 2);
        assert!(t.stages[1].1 >= 0.005);
    }

    #[test]
    fn records_round_trip_through_json() {
        let r = MetricsRecord {
            object_id: "a".into(),
            recon_time_s: Some(0.1 + 0.2),
            ..MetricsRecord::default()
        };
        let s = SceneMetrics {
            scene_id: "s".into(),
            objects: vec![r],
            ..SceneMetrics::default()
        };
        let back: SceneMetrics = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
