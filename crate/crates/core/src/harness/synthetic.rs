//! Small synthetic dataset and debug reconstruction models for exercising the
//! harness end to end without any external model.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};

use super::manifest::{ObjectEntry, SceneManifest};
use crate::alignment::{SymmetryAxis, SymmetrySpec};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::mesh::{chamfer_distance, sample_surface, save_obj, TriangleMesh};
use crate::transform::SimilarityTransform;
use crate::visibility::CameraModel;

/// Stand-in reconstruction models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DebugModel {
    /// Returns the ground-truth mesh.
    Identity,
    /// Ground truth densified to `max_edge` with Gaussian noise of `sigma`
    /// (m) along the vertex normals.
    Noisy { sigma: f64, max_edge: f64 },
}

impl DebugModel {
    pub const NOISY_5MM: DebugModel = DebugModel::Noisy {
        sigma: 0.005,
        max_edge: 0.01,
    };

    pub fn reconstruct(&self, gt: &TriangleMesh, seed: u64) -> TriangleMesh {
        match *self {
            DebugModel::Identity => gt.clone(),
            DebugModel::Noisy { sigma, max_edge } => {
                fixtures::noisy_copy(gt, sigma, max_edge, seed)
            }
        }
    }

    /// Reported reconstruction time (s).
    pub fn recon_time_s(&self) -> f64 {
        match self {
            DebugModel::Identity => 0.1,
            DebugModel::Noisy { .. } => 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticObject {
    pub object_id: String,
    pub label: String,
    /// Object-frame mesh.
    pub mesh: TriangleMesh,
    pub pose: SimilarityTransform,
    pub occluded: bool,
    pub symmetry: SymmetrySpec,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub scene_id: String,
    pub camera: CameraModel,
    pub objects: Vec<SyntheticObject>,
}

/// Pinhole camera at `eye` looking at `target`, world z up.
pub fn look_at_camera(
    eye: Point3<f64>,
    target: Point3<f64>,
    width: u32,
    height: u32,
    focal: f64,
) -> CameraModel {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        Matrix3::from_columns(&[right, down, forward]),
    ));
    CameraModel::new(
        focal,
        focal,
        width as f64 / 2.0,
        height as f64 / 2.0,
        width,
        height,
        SimilarityTransform::rigid(rotation, eye.coords),
    )
    .expect("look-at camera is valid")
}

fn scene_camera() -> CameraModel {
    look_at_camera(
        Point3::new(0.0, -0.6, 0.35),
        Point3::new(0.0, 0.05, 0.04),
        640,
        480,
        600.0,
    )
}

/// Puts the mesh's bounding-box centre at `(x, y)`, its base on `z = 0`,
/// turned by `yaw` (rad) about the vertical.
fn on_table(mesh: &TriangleMesh, x: f64, y: f64, yaw: f64) -> SimilarityTransform {
    let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
    let b = mesh
        .transformed(&SimilarityTransform::from_rotation(rotation))
        .aabb();
    let c = b.center();
    SimilarityTransform::rigid(rotation, Vector3::new(x - c.x, y - c.y, -b.min.z))
}

fn object(
    id: &str,
    label: &str,
    mesh: TriangleMesh,
    at: (f64, f64, f64),
    occluded: bool,
) -> SyntheticObject {
    let pose = on_table(&mesh, at.0, at.1, at.2);
    SyntheticObject {
        object_id: id.into(),
        label: label.into(),
        mesh,
        pose,
        occluded,
        symmetry: SymmetrySpec::default(),
    }
}

/// Three tabletop scenes of three separated objects; in each, one object is
/// partly hidden behind another as seen from the camera.
pub fn mini_dataset() -> Vec<SyntheticScene> {
    let camera = scene_camera();
    let mut cube = object(
        "cube",
        "cube",
        fixtures::cube(0.05),
        (0.03, 0.12, 0.2),
        true,
    );
    cube.symmetry = SymmetrySpec {
        axes: vec![SymmetryAxis {
            axis: [0.0, 0.0, 1.0],
            order: 4,
        }],
    };
    vec![
        SyntheticScene {
            scene_id: "scene_000".into(),
            camera: camera.clone(),
            objects: vec![
                object(
                    "box",
                    "box",
                    fixtures::cuboid(0.04, 0.06, 0.1),
                    (0.0, 0.0, 0.1),
                    false,
                ),
                cube,
                object(
                    "can",
                    "cylinder",
                    fixtures::cylinder(0.03, 0.08, 32),
                    (-0.12, 0.02, 0.0),
                    false,
                ),
            ],
        },
        SyntheticScene {
            scene_id: "scene_001".into(),
            camera: camera.clone(),
            objects: vec![
                object(
                    "bracket",
                    "l_solid",
                    fixtures::l_solid(0.03),
                    (-0.1, 0.0, 0.4),
                    false,
                ),
                object("mug", "mug", fixtures::mug(), (0.05, 0.0, -0.3), false),
                object(
                    "block",
                    "cube",
                    fixtures::cube(0.04),
                    (0.1, 0.13, 0.5),
                    true,
                ),
            ],
        },
        SyntheticScene {
            scene_id: "scene_002".into(),
            camera,
            objects: vec![
                object(
                    "bottle",
                    "cylinder",
                    fixtures::cylinder(0.025, 0.12, 32),
                    (0.0, 0.0, 0.0),
                    false,
                ),
                object(
                    "carton",
                    "box",
                    fixtures::cuboid(0.06, 0.04, 0.05),
                    (0.11, 0.02, -0.2),
                    false,
                ),
                object(
                    "die",
                    "cube",
                    fixtures::cube(0.045),
                    (0.035, 0.11, 0.3),
                    true,
                ),
            ],
        },
    ]
}

/// Writes ground-truth meshes, `model` reconstructions and one manifest per
/// scene under `dir`; returns the manifest paths in scene order.
///
/// Reconstructions are stored in the object frame and carry the true scene
/// placement as `recon_pose`.
pub fn write_dataset(
    scenes: &[SyntheticScene],
    model: DebugModel,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for scene in scenes {
        let scene_dir = dir.join(&scene.scene_id);
        std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
        let mut objects = Vec::new();
        for (k, o) in scene.objects.iter().enumerate() {
            let gt_name = format!("{}_gt.obj", o.object_id);
            let recon_name = format!("{}_recon.obj", o.object_id);
            save_obj(&o.mesh, &scene_dir.join(&gt_name))?;
            let recon = model.reconstruct(&o.mesh, seed.wrapping_mul(1000).wrapping_add(k as u64));
            save_obj(&recon, &scene_dir.join(&recon_name))?;
            objects.push(ObjectEntry {
                object_id: o.object_id.clone(),
                label: o.label.clone(),
                gt_mesh_path: gt_name.into(),
                recon_mesh_path: recon_name.into(),
                gt_pose: o.pose,
                recon_pose: Some(o.pose),
                occluded: o.occluded,
                symmetry: o.symmetry.clone(),
                recon_time_s: Some(model.recon_time_s()),
                peak_mem_bytes: Some(1 << 20),
                mask_path: None,
            });
        }
        let manifest = SceneManifest {
            scene_id: scene.scene_id.clone(),
            unit_scale: 1.0,
            camera: scene.camera.clone(),
            objects,
        };
        let path = scene_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Symmetric Chamfer distance of a reconstruction at the true pose: the
/// error a perfect alignment would leave.
pub fn noise_floor_cd(
    gt: &TriangleMesh,
    recon: &TriangleMesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let a = sample_surface(recon, n_samples, seed)?;
    let b = sample_surface(gt, n_samples, seed.wrapping_add(1))?;
    Ok(chamfer_distance(&a, &b)?.symmetric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::scene_collision_report;
    use crate::harness::manifest::load_manifest;
    use crate::mesh::sample_surface;
    use crate::visibility::{classify_visibility, render_depth};

    #[test]
    fn camera_looks_at_the_target() {
        let cam = scene_camera();
        let target = Point3::new(0.0, 0.05, 0.04);
        let p = cam.camera_from_world().apply(&target);
        let (u, v, z) = cam.project_camera_point(&p).unwrap();
        assert!((u - 320.0).abs() < 1e-9 && (v - 240.0).abs() < 1e-9 && z > 0.0);
        // world up appears towards the top of the image
        let above = cam
            .camera_from_world()
            .apply(&(target + Vector3::new(0.0, 0.0, 0.05)));
        assert!(cam.project_camera_point(&above).unwrap().1 < 240.0);
    }

    #[test]
    fn scenes_are_separated_resting_and_partly_occluded() {
        for scene in mini_dataset() {
            let posed: Vec<(&TriangleMesh, SimilarityTransform)> =
                scene.objects.iter().map(|o| (&o.mesh, o.pose)).collect();
            let report = scene_collision_report(&posed, 1e-6).unwrap();
            assert_eq!(report.n_colliding_pairs, 0, "{}", scene.scene_id);
            let depth = render_depth(&posed, &scene.camera, 1.0);
            for o in &scene.objects {
                let world = o.mesh.transformed(&o.pose);
                assert!(world.aabb().min.z.abs() < 1e-12);
                let cloud = sample_surface(&world, 4000, 1).unwrap();
                let alone = render_depth(&[(&o.mesh, o.pose)], &scene.camera, 1.0);
                let own = classify_visibility(&cloud, &scene.camera, &alone, 0.002).n_visible();
                let shared = classify_visibility(&cloud, &scene.camera, &depth, 0.002).n_visible();
                assert!(own > 0, "{} invisible", o.object_id);
                if o.occluded {
                    assert!(
                        shared * 10 < own * 9 && shared * 10 > own,
                        "{}: {shared} of {own} visible",
                        o.object_id
                    );
                } else {
                    assert_eq!(shared, own, "{}", o.object_id);
                }
            }
        }
    }

    #[test]
    fn written_dataset_loads() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(&mini_dataset(), DebugModel::Identity, 0, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        for p in &paths {
            let m = load_manifest(p).unwrap();
            assert_eq!(m.objects.len(), 3);
            let o = &m.objects[0];
            let gt = o.load_gt(1.0).unwrap();
            assert_eq!(gt, o.load_recon(1.0).unwrap());
        }
    }
}
