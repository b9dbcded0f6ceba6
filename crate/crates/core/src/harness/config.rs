use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentParams;
use crate::error::{Error, Result};
use crate::grasping::GraspParams;
use crate::stability::StabilityParams;

/// How reconstructed objects are placed for scene-level metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneMode {
    /// Each object is aligned on its own; scene metrics use those placements.
    #[default]
    PerObject,
    /// Objects keep their reconstructed scene placement and the whole scene is
    /// aligned once.
    Whole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// Depth slack (m) for counting a point as visible.
    pub epsilon: f64,
    /// Lower bound (m) on the visible error in the ratio denominator.
    pub cd_floor: f64,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            epsilon: crate::visibility::DEFAULT_EPSILON,
            cd_floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    /// Separation (m) still counted as touching.
    pub contact_epsilon: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self {
            contact_epsilon: crate::collision::DEFAULT_CONTACT_EPSILON,
        }
    }
}

/// Pass thresholds for the five desiderata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest median symmetric Chamfer distance (m).
    pub accuracy_m: f64,
    pub max_colliding_pairs: usize,
    /// Largest tilt (deg) of the stable pose from the scene pose.
    pub stability_tilt_deg: f64,
    /// Largest median occlusion ratio.
    pub occlusion_ratio: f64,
    /// Largest total reconstruction time per scene (s).
    pub latency_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            accuracy_m: 0.002,
            max_colliding_pairs: 0,
            stability_tilt_deg: 5.0,
            occlusion_ratio: 0.10,
            latency_s: 2.0,
        }
    }
}

/// Optional pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub stability: bool,
    pub grasping: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            stability: true,
            grasping: true,
        }
    }
}

/// Everything a run depends on. Written back out in full next to the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub scene_mode: SceneMode,
    /// Surface samples per object and per scene.
    pub n_samples: usize,
    /// Depth render resolution relative to the camera.
    pub render_scale: f64,
    pub alignment: AlignmentParams,
    /// Use visibility-masked ICP for objects flagged occluded.
    pub masked_alignment: bool,
    pub symmetry_flip: bool,
    pub occlusion: OcclusionConfig,
    pub collision: CollisionConfig,
    pub stability: StabilityParams,
    pub grasping: GraspParams,
    pub stages: Stages,
    pub thresholds: Thresholds,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: None,
            scene_mode: SceneMode::PerObject,
            n_samples: crate::mesh::DEFAULT_SAMPLE_COUNT,
            render_scale: 1.0,
            alignment: AlignmentParams::default(),
            masked_alignment: true,
            symmetry_flip: true,
            occlusion: OcclusionConfig::default(),
            collision: CollisionConfig::default(),
            stability: StabilityParams::default(),
            grasping: GraspParams::default(),
            stages: Stages::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl HarnessConfig {
    /// Reads a (possibly partial) JSON config; missing keys take defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: HarnessConfig = super::manifest::parse_json(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument(
                "n_samples must be at least 1".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        if !(self.render_scale > 0.0 && self.render_scale.is_finite()) {
            return Err(Error::InvalidArgument(
                "render_scale must be positive".into(),
            ));
        }
        if !(self.occlusion.epsilon >= 0.0 && self.occlusion.cd_floor >= 0.0) {
            return Err(Error::InvalidArgument(
                "occlusion epsilon and floor must be non-negative".into(),
            ));
        }
        if !(self.collision.contact_epsilon >= 0.0) {
            return Err(Error::InvalidArgument(
                "collision.contact_epsilon must be non-negative".into(),
            ));
        }
        let t = &self.thresholds;
        if [
            t.accuracy_m,
            t.stability_tilt_deg,
            t.occlusion_ratio,
            t.latency_s,
        ]
        .iter()
        .any(|v| v.is_nan())
        {
            return Err(Error::InvalidArgument("thresholds must not be NaN".into()));
        }
        self.alignment.validate()?;
        self.stability.validate()?;
        self.grasping.validate()
    }

    /// Seed for one stage of one object, independent of evaluation order.
    pub fn stage_seed(&self, scene_id: &str, object_id: &str, stage: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let key = format!("{}/{scene_id}/{object_id}/{stage}", self.seed);
        for b in key.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
