use std::collections::BTreeMap;

use nalgebra::{Point3, UnitQuaternion, Vector3};

use super::synthetic::{
    look_at_camera, write_dataset, DebugModel, SyntheticObject, SyntheticScene,
};
use super::*;
use crate::alignment::SymmetrySpec;
use crate::fixtures;
use crate::grasping::GraspParams;
use crate::mesh::{sample_surface, PointCloud};
use crate::stability::{SimParams, StabilityParams};
use crate::transform::SimilarityTransform;

/// Chamfer distance between two independent samplings of the test cube: the
/// best any reconstruction can score at the quick sample count.
fn cube_floor() -> f64 {
    let cube = fixtures::cube(0.05);
    synthetic::noise_floor_cd(&cube, &cube, quick_config().n_samples, 99).unwrap()
}

fn quick_config() -> HarnessConfig {
    HarnessConfig {
        n_samples: 3000,
        stability: StabilityParams {
            sim: SimParams {
                duration: 2.0,
                ..SimParams::default()
            },
            ..StabilityParams::default()
        },
        grasping: GraspParams {
            n_grasps: 20,
            ..GraspParams::default()
        },
        ..HarnessConfig::default()
    }
}

fn single_cube_scene(dir: &std::path::Path, model: DebugModel) -> SceneManifest {
    let cube = fixtures::cube(0.05);
    let scene = SyntheticScene {
        scene_id: "cube".into(),
        camera: look_at_camera(
            Point3::new(0.0, -0.5, 0.3),
            Point3::new(0.0, 0.0, 0.025),
            320,
            240,
            300.0,
        ),
        objects: vec![
            SyntheticObject {
                object_id: "a".into(),
                label: "cube".into(),
                mesh: cube.clone(),
                pose: SimilarityTransform::from_translation(Vector3::new(0.0, 0.0, 0.025)),
                occluded: false,
                symmetry: SymmetrySpec::default(),
            },
            SyntheticObject {
                object_id: "b".into(),
                label: "cube".into(),
                mesh: cube,
                pose: SimilarityTransform::from_translation(Vector3::new(0.15, 0.0, 0.025)),
                occluded: false,
                symmetry: SymmetrySpec::default(),
            },
        ],
    };
    let paths = write_dataset(&[scene], model, 1, dir).unwrap();
    load_manifest(&paths[0]).unwrap()
}

#[test]
fn perfect_reconstruction_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let m = single_cube_scene(dir.path(), DebugModel::Identity);
    let r = evaluate_object(&m, "a", &quick_config()).unwrap();
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert!(r.symmetric_cd().unwrap() < 1.2 * cube_floor());
    let s = r.stability.unwrap();
    assert!(s.stable && s.tilt_deg.unwrap() < 1.0);
    assert_eq!(r.grasp_transfer.unwrap().rate, 1.0);
    assert!(r.occlusion.is_none());
}

#[test]
fn missing_reconstruction_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let m = single_cube_scene(dir.path(), DebugModel::Identity);
    let config = HarnessConfig {
        stages: Stages {
            stability: false,
            grasping: false,
        },
        ..quick_config()
    };
    let before = evaluate_scene(&m, &config).unwrap().metrics;
    std::fs::remove_file(&m.objects[0].recon_mesh_path).unwrap();
    let after = evaluate_scene(&m, &config).unwrap().metrics;

    let a = &after.objects[0];
    assert!(a.errors["load_recon"].contains("does not exist"));
    assert!(a.chamfer.is_none() && a.alignment.is_none());
    assert_eq!(after.objects[1], before.objects[1]);
    assert!(after.errors.contains_key("placement"));

    let gate = desiderata_gate(&after, &config.thresholds);
    assert_eq!(gate.d1_accuracy.status, GateStatus::NotEvaluable);
    assert_eq!(gate.d2_collision.status, GateStatus::NotEvaluable);
    assert_eq!(gate.d5_latency.status, GateStatus::Pass);
}

#[test]
fn identical_scene_has_no_scene_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = single_cube_scene(dir.path(), DebugModel::Identity);
    for mode in [SceneMode::PerObject, SceneMode::Whole] {
        let config = HarnessConfig {
            scene_mode: mode,
            stages: Stages {
                stability: false,
                grasping: false,
            },
            ..quick_config()
        };
        let s = evaluate_scene(&m, &config).unwrap().metrics;
        assert!(
            s.scene_chamfer.as_ref().unwrap().symmetric < 1.2 * scene_floor(&m),
            "{mode:?}"
        );
        assert_eq!(s.relative_distance_errors.len(), 1);
        let e = s.relative_distance_errors[0].error;
        assert!(e.abs() < 0.5 * cube_floor(), "{mode:?}: {e}");
        assert_eq!(s.colliding_pairs(), Some(0));
        assert_eq!(s.total_recon_time_s, Some(0.2));
        assert_eq!(s.scene_alignment.is_some(), mode == SceneMode::Whole);
    }
}

/// Sampling floor of the merged ground-truth scene.
fn scene_floor(m: &SceneManifest) -> f64 {
    let meshes: Vec<_> = m
        .objects
        .iter()
        .map(|o| o.load_gt(1.0).unwrap().transformed(&o.gt_pose))
        .collect();
    let scene = crate::mesh::TriangleMesh::merge(&meshes).unwrap();
    synthetic::noise_floor_cd(&scene, &scene, quick_config().n_samples, 7).unwrap()
}

/// Mean nearest-neighbour distance by exhaustive search.
fn brute_symmetric_cd(a: &PointCloud, b: &PointCloud) -> f64 {
    let directed = |x: &PointCloud, y: &PointCloud| {
        x.points
            .iter()
            .map(|p| {
                y.points
                    .iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}

#[test]
fn displaced_object_shifts_its_relative_error() {
    let cube = fixtures::cube(0.05);
    let at = |x: f64| SimilarityTransform::from_translation(Vector3::new(x, 0.0, 0.0));
    let sample =
        |t: SimilarityTransform, seed| sample_surface(&cube.transformed(&t), 800, seed).unwrap();
    let gt: BTreeMap<String, PointCloud> = [
        ("a".to_string(), sample(at(0.0), 1)),
        ("b".to_string(), sample(at(0.2), 2)),
    ]
    .into();
    let recon: BTreeMap<String, PointCloud> = [
        ("a".to_string(), sample(at(0.0), 3)),
        ("b".to_string(), sample(at(0.3), 4)),
    ]
    .into();
    let errs = relative_errors_from_clouds(&recon, &gt);
    assert_eq!(errs.len(), 1);
    let e = &errs[0];
    assert!((e.recon_cd - brute_symmetric_cd(&recon["a"], &recon["b"])).abs() < 1e-12);
    assert!((e.gt_cd - brute_symmetric_cd(&gt["a"], &gt["b"])).abs() < 1e-12);
    // pushed apart along the line between them: the error is the displacement
    assert!((e.error - 0.10).abs() < 0.005, "{}", e.error);
}

#[test]
fn whole_scene_mode_uses_model_placements() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = single_cube_scene(dir.path(), DebugModel::Identity);
    // the model placed object b 3 cm too far along x
    m.objects[1].recon_pose.as_mut().unwrap().translation.x += 0.03;
    let config = HarnessConfig {
        scene_mode: SceneMode::Whole,
        stages: Stages {
            stability: false,
            grasping: false,
        },
        ..quick_config()
    };
    let s = evaluate_scene(&m, &config).unwrap().metrics;
    let e = &s.relative_distance_errors[0];
    assert!(e.error > 0.02, "{e:?}");
    // per-object mode aligns each cube onto its own ground truth instead
    let config = HarnessConfig {
        scene_mode: SceneMode::PerObject,
        ..config
    };
    let s = evaluate_scene(&m, &config).unwrap().metrics;
    assert!(s.relative_distance_errors[0].error.abs() < 0.5 * cube_floor());
}

#[test]
fn rotated_reconstruction_is_realigned() {
    let dir = tempfile::tempdir().unwrap();
    let m = single_cube_scene(dir.path(), DebugModel::Identity);
    let recon = fixtures::l_solid(0.03);
    let t = SimilarityTransform::new(
        1.7,
        UnitQuaternion::from_euler_angles(0.4, 1.1, -0.3),
        Vector3::new(0.3, 0.1, -0.2),
    );
    crate::mesh::save_obj(&recon.transformed(&t), &m.objects[0].recon_mesh_path).unwrap();
    crate::mesh::save_obj(&recon, &m.objects[0].gt_mesh_path).unwrap();
    let config = HarnessConfig {
        stages: Stages {
            stability: false,
            grasping: false,
        },
        ..quick_config()
    };
    let r = evaluate_object(&m, "a", &config).unwrap();
    let floor = synthetic::noise_floor_cd(&recon, &recon, config.n_samples, 5).unwrap();
    assert!(
        r.symmetric_cd().unwrap() < 1.2 * floor,
        "{} vs {floor}",
        r.symmetric_cd().unwrap()
    );
    assert!((r.alignment.unwrap().transform.scale * 1.7 - 1.0).abs() < 0.01);
}

#[test]
fn stage_timers_cover_the_object_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let m = single_cube_scene(dir.path(), DebugModel::Identity);
    let e = evaluate_scene(&m, &quick_config()).unwrap();
    for (id, t) in &e.timings.objects {
        let sum = t.stage_sum();
        assert!(
            sum <= t.total_s * 1.0001 && sum >= 0.95 * t.total_s,
            "{id}: {sum} of {}",
            t.total_s
        );
    }
}

#[test]
fn run_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let m = single_cube_scene(&data, DebugModel::Identity);
    let out = dir.path().join("out");
    let config = HarnessConfig {
        workers: Some(1),
        ..quick_config()
    };
    let manifests = collect_manifests(std::slice::from_ref(&data)).unwrap();
    assert_eq!(manifests.len(), 1);
    let outcome = run(&manifests, &config, &out).unwrap();
    assert!(!outcome.any_gate_failed());
    for f in [
        "objects.csv",
        "scenes.csv",
        "long.csv",
        "summary.json",
        RESOLVED_CONFIG_FILE,
        TIMINGS_FILE,
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(out.join(format!("scenes/{}.json", m.scene_id)).is_file());
    assert_eq!(load_resolved_config(&out).unwrap(), config);
    assert_eq!(load_results(&out).unwrap(), outcome.results);
}
