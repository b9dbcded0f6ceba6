use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::alignment::SymmetrySpec;
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, MeshFormat, TriangleMesh};
use crate::transform::SimilarityTransform;
use crate::visibility::CameraModel;

/// One frame of a dataset: camera, ground truth and reconstructions.
///
/// After [`load_manifest`] every path is absolute and every translation is in
/// meters; meshes are scaled by `unit_scale` when read through
/// [`ObjectEntry::load_gt`] and [`ObjectEntry::load_recon`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene_id: String,
    /// Multiplier from manifest length units to meters.
    #[serde(default = "one")]
    pub unit_scale: f64,
    pub camera: CameraModel,
    pub objects: Vec<ObjectEntry>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub object_id: String,
    #[serde(default)]
    pub label: String,
    pub gt_mesh_path: PathBuf,
    pub recon_mesh_path: PathBuf,
    /// Ground-truth object-to-world pose (rigid).
    pub gt_pose: SimilarityTransform,
    /// Placement of the reconstruction in the world, when the model
    /// reconstructs whole scenes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_pose: Option<SimilarityTransform>,
    #[serde(default)]
    pub occluded: bool,
    #[serde(default)]
    pub symmetry: SymmetrySpec,
    /// Adapter-reported reconstruction wall time (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_time_s: Option<f64>,
    /// Adapter-reported peak memory (bytes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_mem_bytes: Option<u64>,
    /// Binary object mask for the camera image; overrides rendered occlusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
}

impl ObjectEntry {
    pub fn load_gt(&self, unit_scale: f64) -> Result<TriangleMesh> {
        load_scaled(&self.gt_mesh_path, unit_scale)
    }

    pub fn load_recon(&self, unit_scale: f64) -> Result<TriangleMesh> {
        load_scaled(&self.recon_mesh_path, unit_scale)
    }
}

fn load_scaled(path: &Path, unit_scale: f64) -> Result<TriangleMesh> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mesh = load_mesh(path, MeshFormat::from_path(path)?)?;
    Ok(if unit_scale == 1.0 {
        mesh
    } else {
        mesh.scaled(unit_scale)
    })
}

/// Deserializes JSON, reporting failures as a schema violation with a JSON
/// pointer to the offending value.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        Error::SchemaViolation {
            pointer,
            message: e.into_inner().to_string(),
        }
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::SchemaViolation {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Reads and validates a manifest; see [`SceneManifest`] for the conventions
/// applied on load.
pub fn load_manifest(path: &Path) -> Result<SceneManifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// Parses manifest JSON with relative paths resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<SceneManifest> {
    let mut m: SceneManifest = parse_json(text)?;
    if !(m.unit_scale > 0.0 && m.unit_scale.is_finite()) {
        return Err(violation("/unit_scale", "must be a positive finite number"));
    }
    if m.scene_id.is_empty() {
        return Err(violation("/scene_id", "must not be empty"));
    }
    if m.objects.is_empty() {
        return Err(violation("/objects", "must list at least one object"));
    }
    m.camera.world_from_camera.translation *= m.unit_scale;
    m.camera
        .validate()
        .map_err(|e| violation("/camera", e.to_string()))?;

    let mut seen = BTreeSet::new();
    for (i, o) in m.objects.iter_mut().enumerate() {
        if o.object_id.is_empty() || !seen.insert(o.object_id.clone()) {
            return Err(violation(
                format!("/objects/{i}/object_id"),
                format!("object_id {:?} is empty or duplicated", o.object_id),
            ));
        }
        if !o.gt_pose.is_rigid() {
            return Err(violation(
                format!("/objects/{i}/gt_pose"),
                "ground-truth pose must have unit scale",
            ));
        }
        o.symmetry
            .validate()
            .map_err(|e| violation(format!("/objects/{i}/symmetry"), e.to_string()))?;
        if o.recon_time_s.is_some_and(|t| !(t >= 0.0)) {
            return Err(violation(
                format!("/objects/{i}/recon_time_s"),
                "must be non-negative",
            ));
        }
        o.gt_pose.translation *= m.unit_scale;
        if let Some(p) = o.recon_pose.as_mut() {
            p.translation *= m.unit_scale;
        }
        for p in [
            Some(&mut o.gt_mesh_path),
            Some(&mut o.recon_mesh_path),
            o.mask_path.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        if !o.gt_mesh_path.exists() {
            return Err(Error::MissingFile(o.gt_mesh_path.clone()));
        }
        if let Some(mask) = o.mask_path.as_ref().filter(|p| !p.exists()) {
            return Err(Error::MissingFile(mask.clone()));
        }
    }
    Ok(m)
}

impl SceneManifest {
    pub fn object(&self, object_id: &str) -> Option<&ObjectEntry> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }
}
