use serde::{Deserialize, Serialize};

use super::config::Thresholds;
use super::records::SceneMetrics;
use super::stats::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatus {
    Pass,
    Fail,
    /// A required metric is missing.
    NotEvaluable,
}

impl GateStatus {
    fn at_most(value: Option<f64>, threshold: f64) -> Self {
        match value {
            Some(v) if v <= threshold => GateStatus::Pass,
            Some(_) => GateStatus::Fail,
            None => GateStatus::NotEvaluable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateStatus::Pass => "pass",
            GateStatus::Fail => "fail",
            GateStatus::NotEvaluable => "not_evaluable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGate {
    pub status: GateStatus,
    pub median_cd_m: Option<f64>,
    pub threshold_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionGate {
    pub status: GateStatus,
    pub colliding_pairs: Option<usize>,
    pub max_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGate {
    pub status: GateStatus,
    /// Fraction of objects with a stable pose within the tilt threshold,
    /// over the objects where stability was computed.
    pub fraction_stable: Option<f64>,
    pub max_tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionGate {
    pub status: GateStatus,
    /// Median ratio over occluded objects.
    pub ratio: Option<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyGate {
    pub status: GateStatus,
    pub scene_time_s: Option<f64>,
    pub threshold_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiderataReport {
    pub d1_accuracy: AccuracyGate,
    pub d2_collision: CollisionGate,
    pub d3_stability: StabilityGate,
    pub d4_occlusion: OcclusionGate,
    pub d5_latency: LatencyGate,
}

impl DesiderataReport {
    pub fn statuses(&self) -> [GateStatus; 5] {
        [
            self.d1_accuracy.status,
            self.d2_collision.status,
            self.d3_stability.status,
            self.d4_occlusion.status,
            self.d5_latency.status,
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.statuses().iter().all(|s| *s == GateStatus::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.statuses().contains(&GateStatus::Fail)
    }
}

pub const DESIDERATA: [&str; 5] = [
    "d1_accuracy",
    "d2_collision",
    "d3_stability",
    "d4_occlusion",
    "d5_latency",
];

/// Pass/fail of each desideratum. Any missing input a desideratum depends on
/// makes it not evaluable rather than passed.
pub fn desiderata_gate(scene: &SceneMetrics, t: &Thresholds) -> DesiderataReport {
    let objects = &scene.objects;

    let cds: Vec<Option<f64>> = objects.iter().map(|o| o.symmetric_cd()).collect();
    let median_cd = all_present(&cds).and_then(|v| median(&v));
    let d1_accuracy = AccuracyGate {
        status: GateStatus::at_most(median_cd, t.accuracy_m),
        median_cd_m: median_cd,
        threshold_m: t.accuracy_m,
    };

    let pairs = scene.colliding_pairs();
    let d2_collision = CollisionGate {
        status: match pairs {
            Some(p) if p > t.max_colliding_pairs => GateStatus::Fail,
            Some(_) if scene.collision_complete() => GateStatus::Pass,
            _ => GateStatus::NotEvaluable,
        },
        colliding_pairs: pairs,
        max_pairs: t.max_colliding_pairs,
    };

    let verdicts: Vec<bool> = objects
        .iter()
        .filter_map(|o| o.stability.as_ref())
        .map(|s| s.stable && s.tilt_deg.is_some_and(|tilt| tilt <= t.stability_tilt_deg))
        .collect();
    let fraction_stable = (!verdicts.is_empty())
        .then(|| verdicts.iter().filter(|v| **v).count() as f64 / verdicts.len() as f64);
    let d3_stability = StabilityGate {
        status: if objects.is_empty() || verdicts.len() < objects.len() {
            GateStatus::NotEvaluable
        } else if verdicts.iter().all(|v| *v) {
            GateStatus::Pass
        } else {
            GateStatus::Fail
        },
        fraction_stable,
        max_tilt_deg: t.stability_tilt_deg,
    };

    let ratios: Vec<Option<f64>> = objects
        .iter()
        .filter(|o| o.occluded)
        .map(|o| o.occlusion_ratio())
        .collect();
    let ratio = all_present(&ratios).and_then(|v| median(&v));
    let d4_occlusion = OcclusionGate {
        status: GateStatus::at_most(ratio, t.occlusion_ratio),
        ratio,
        threshold: t.occlusion_ratio,
    };

    let d5_latency = LatencyGate {
        status: GateStatus::at_most(scene.total_recon_time_s, t.latency_s),
        scene_time_s: scene.total_recon_time_s,
        threshold_s: t.latency_s,
    };

    DesiderataReport {
        d1_accuracy,
        d2_collision,
        d3_stability,
        d4_occlusion,
        d5_latency,
    }
}

fn all_present(values: &[Option<f64>]) -> Option<Vec<f64>> {
    values.iter().copied().collect()
}
