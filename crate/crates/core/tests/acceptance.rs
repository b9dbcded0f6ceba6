//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinbench_core::alignment::{masked_icp, multistart_align, AlignmentParams};
use twinbench_core::collision::{
    scene_collision_report, triangles_intersect, SceneCollisionReport,
};
use twinbench_core::fixtures;
use twinbench_core::grasping::{grasp_transfer_rate, wilson_interval, GraspParams};
use twinbench_core::harness::synthetic::{
    look_at_camera, mini_dataset, noise_floor_cd, write_dataset, DebugModel,
};
use twinbench_core::harness::{
    collect_manifests, desiderata_gate, load_manifest, run, GateStatus, HarnessConfig,
    MetricsRecord, SceneCollision, SceneMetrics, StabilitySummary, Thresholds,
};
use twinbench_core::mesh::{chamfer_distance, sample_surface};
use twinbench_core::stability::{stability_verdict, StabilityParams};
use twinbench_core::visibility::{
    occlusion_split_chamfer, render_depth, CameraModel, DepthMap, OcclusionSplit,
};
use twinbench_core::{
    ChamferResult, Error, Point3, PointCloud, SimilarityTransform, TriangleMesh, UnitQuaternion,
    Vector3,
};

/// Prints the verdict line, then fails the test if the criterion did not hold.
fn verdict(name: &str, ok: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    // bypass the test harness capture so the line is always shown
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "{name}: {detail}");
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let centre = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    PointCloud::from_points(
        (0..n)
            .map(|_| {
                Point3::from(
                    centre
                        + Vector3::new(
                            rng.random::<f64>(),
                            rng.random::<f64>(),
                            rng.random::<f64>(),
                        ),
                )
            })
            .collect(),
    )
}

fn brute_directed(from: &PointCloud, to: &PointCloud) -> f64 {
    from.points
        .iter()
        .map(|p| {
            to.points
                .iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum::<f64>()
        / from.len() as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn chamfer_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let (n, m) = (rng.random_range(1..=500), rng.random_range(1..=500));
        let recon = random_cloud(&mut rng, n);
        let gt = random_cloud(&mut rng, m);
        let c = chamfer_distance(&recon, &gt).unwrap();
        let fwd = brute_directed(&recon, &gt);
        let bwd = brute_directed(&gt, &recon);
        worst = worst
            .max(rel_err(c.mean_recon_to_gt, fwd))
            .max(rel_err(c.mean_gt_to_recon, bwd))
            .max(rel_err(c.symmetric, 0.5 * (fwd + bwd)));
    }
    let elapsed = start.elapsed();
    verdict(
        "chamfer oracle equivalence",
        worst <= 1e-12 && elapsed < Duration::from_secs(10),
        format!(
            "60 pairs, worst relative error {worst:.1e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn alignment_recovers_random_similarities() {
    let start = Instant::now();
    let meshes = [
        ("cube", fixtures::cube(0.1)),
        ("box", fixtures::cuboid(0.2, 0.1, 0.05)),
        ("l_solid", fixtures::l_solid(0.05)),
        ("icosphere", fixtures::icosphere(0.05, 0)),
        ("mug", fixtures::mug()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = AlignmentParams::default();
    let mut recovered = 0;
    let mut cases = 0;
    let mut worst = Vec::new();
    for (k, (name, mesh)) in meshes.iter().enumerate() {
        let gt = sample_surface(mesh, 10_000, k as u64).unwrap();
        let mut worst_rmse = 0.0f64;
        for _ in 0..4 {
            let rotation = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let t = SimilarityTransform::new(
                rng.random_range(0.5..=2.0),
                rotation,
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ),
            );
            let recon = gt.transformed(&t);
            let r = multistart_align(&recon, &gt, &params).unwrap();
            cases += 1;
            if r.rmse < 1e-4 {
                recovered += 1;
            }
            worst_rmse = worst_rmse.max(r.rmse);
        }
        worst.push(format!("{name} {worst_rmse:.1e}"));
    }
    let elapsed = start.elapsed();
    verdict(
        "alignment recovery",
        recovered * 20 >= 19 * cases && elapsed < Duration::from_secs(300),
        format!(
            "{recovered}/{cases} below 1e-4 m (worst: {}), {:.0} s",
            worst.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

/// Camera looking at the origin from the front and above, with a wall that
/// hides everything at x < 0.
fn half_hidden_scene() -> (CameraModel, TriangleMesh, SimilarityTransform) {
    let camera = look_at_camera(
        Point3::new(0.0, -0.6, 0.3),
        Point3::new(0.0, 0.0, 0.05),
        640,
        480,
        600.0,
    );
    let wall = fixtures::cuboid(0.6, 0.01, 0.6);
    let wall_pose = SimilarityTransform::from_translation(Vector3::new(-0.3, -0.25, 0.1));
    (camera, wall, wall_pose)
}

fn depth_with_wall(
    camera: &CameraModel,
    object: &TriangleMesh,
    pose: SimilarityTransform,
) -> DepthMap {
    let (_, wall, wall_pose) = half_hidden_scene();
    render_depth(&[(object, pose), (&wall, wall_pose)], camera, 1.0)
}

#[test]
fn masked_icp_ignores_hallucinated_hidden_half() {
    let (camera, _, _) = half_hidden_scene();
    let cube = fixtures::cube(0.1);
    let truth = SimilarityTransform::rigid(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.2),
        Vector3::new(0.0, 0.0, 0.05),
    );
    let gt = sample_surface(&cube.transformed(&truth), 10_000, 1).unwrap();
    let depth = depth_with_wall(&camera, &cube, truth);
    // the reconstruction gets the visible half right and invents a hidden half
    // twice as long: a 0.2 m bar whose +x end is the true cube
    let bar = fixtures::cuboid(0.2, 0.1, 0.1).transformed(&SimilarityTransform::from_translation(
        Vector3::new(-0.05, 0.0, 0.0),
    ));
    let recon = sample_surface(&bar, 10_000, 2).unwrap();

    // the bar is symmetric under a half turn about its long axis
    let flip = SimilarityTransform::rigid(
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI),
        Vector3::zeros(),
    );
    let error = |t: &SimilarityTransform| {
        let rot = [truth, truth.compose(&flip)]
            .iter()
            .map(|c| t.rotation_angle_to(c).to_degrees())
            .fold(f64::INFINITY, f64::min);
        let trans = (t.apply(&Point3::origin()) - truth.apply(&Point3::origin())).norm();
        (rot, trans)
    };
    let params = AlignmentParams::default();
    let masked = masked_icp(&recon, &gt, &camera, &depth, &params).unwrap();
    let plain = multistart_align(&recon, &gt, &params).unwrap();
    let (m_rot, m_trans) = error(&masked.transform);
    let (p_rot, p_trans) = error(&plain.transform);
    verdict(
        "masked ICP occlusion fixture",
        m_rot <= 2.0 && m_trans <= 0.002 && (p_rot > 20.0 || p_trans > 0.02),
        format!(
            "masked {m_rot:.3}° / {:.3} mm, unmasked {p_rot:.2}° / {:.1} mm",
            1e3 * m_trans,
            1e3 * p_trans
        ),
    );
}

fn split_of(
    gt_mesh: &TriangleMesh,
    recon_mesh: &TriangleMesh,
    pose: SimilarityTransform,
) -> (OcclusionSplit, ChamferResult) {
    let (camera, _, _) = half_hidden_scene();
    let depth = depth_with_wall(&camera, gt_mesh, pose);
    let gt = sample_surface(&gt_mesh.transformed(&pose), 6000, 3).unwrap();
    let recon = sample_surface(recon_mesh, 6000, 4).unwrap();
    let split = occlusion_split_chamfer(&recon, &gt, &pose, &camera, &depth, 0.002, 1e-5).unwrap();
    let cd = chamfer_distance(&recon.transformed(&pose), &gt).unwrap();
    (split, cd)
}

fn scene_with_ratio(split: OcclusionSplit) -> SceneMetrics {
    SceneMetrics {
        scene_id: "boundary".into(),
        objects: vec![MetricsRecord {
            object_id: "a".into(),
            occluded: true,
            occlusion: Some(split),
            ..MetricsRecord::default()
        }],
        ..SceneMetrics::default()
    }
}

#[test]
fn occlusion_split_recomposes_and_gates() {
    let pose = SimilarityTransform::rigid(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.3),
        Vector3::new(0.0, 0.0, 0.05),
    );
    let mut worst = 0.0f64;
    let mut n_fixtures = 0;
    for (k, mesh) in [
        fixtures::cube(0.1),
        fixtures::cuboid(0.12, 0.08, 0.05),
        fixtures::l_solid(0.05),
        fixtures::icosphere(0.05, 2),
        fixtures::mug(),
        fixtures::cylinder(0.04, 0.1, 32),
    ]
    .iter()
    .enumerate()
    {
        let recon = fixtures::noisy_copy(mesh, 0.001, 0.01, k as u64);
        let (s, cd) = split_of(mesh, &recon, pose);
        let n = (s.n_visible + s.n_occluded) as f64;
        let mean = (s.n_visible as f64 * s.visible_cd.unwrap()
            + s.n_occluded as f64 * s.occluded_cd.unwrap())
            / n;
        worst = worst.max((mean - cd.mean_gt_to_recon).abs());
        n_fixtures += 1;
    }

    // every vertex on the hidden side pushed 5 mm outwards
    let cube = fixtures::cube(0.1);
    let fine = fixtures::subdivide(&cube, 3);
    let pushed = fine
        .vertices()
        .iter()
        .map(|v| {
            if pose.apply(v).x < -0.01 {
                v + v.coords.normalize() * 0.005
            } else {
                *v
            }
        })
        .collect();
    let degraded = TriangleMesh::new(pushed, fine.faces().to_vec()).unwrap();
    let (s, _) = split_of(&cube, &degraded, pose);
    let degraded_ratio = s.ratio.unwrap();

    let unit = 2f64.powi(-10);
    let at_boundary = OcclusionSplit {
        visible_cd: Some(10.0 * unit),
        occluded_cd: Some(11.0 * unit),
        ratio: twinbench_core::visibility::occlusion_ratio(10.0 * unit, 11.0 * unit, 1e-5),
        n_visible: 10,
        n_occluded: 10,
        n_outside_view: 0,
        empty_partition: None,
    };
    let above = OcclusionSplit {
        ratio: Some(f64::from_bits(0.1f64.to_bits() + 1)),
        ..at_boundary.clone()
    };
    let t = Thresholds::default();
    let at = desiderata_gate(&scene_with_ratio(at_boundary.clone()), &t)
        .d4_occlusion
        .status;
    let over = desiderata_gate(&scene_with_ratio(above), &t)
        .d4_occlusion
        .status;
    let degraded_gate = desiderata_gate(&scene_with_ratio(s), &t)
        .d4_occlusion
        .status;

    verdict(
        "occlusion split recomposition",
        worst <= 1e-9
            && degraded_ratio > 0.10
            && degraded_gate == GateStatus::Fail
            && at_boundary.ratio == Some(0.10)
            && at == GateStatus::Pass
            && over == GateStatus::Fail,
        format!(
            "{n_fixtures} fixtures, worst recomposition gap {worst:.1e}; 5 mm degraded ratio {degraded_ratio:.3} ({}); ratio 0.10 {}, next float up {}",
            degraded_gate.as_str(),
            at.as_str(),
            over.as_str()
        ),
    );
}

fn brute_report(objects: &[(&TriangleMesh, SimilarityTransform)], eps: f64) -> Vec<Vec<usize>> {
    let tris: Vec<Vec<[Point3<f64>; 3]>> = objects
        .iter()
        .map(|(m, pose)| {
            let w = m.transformed(pose);
            (0..w.faces().len()).map(|f| w.triangle(f)).collect()
        })
        .collect();
    let n = objects.len();
    let mut counts = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = tris[i]
                .iter()
                .map(|a| {
                    tris[j]
                        .iter()
                        .filter(|b| triangles_intersect(a, b, eps).is_some())
                        .count()
                })
                .sum();
            counts[i][j] = c;
            counts[j][i] = c;
        }
    }
    counts
}

#[test]
#[allow(clippy::needless_range_loop)]
fn collision_pipeline_matches_exhaustive_triangle_tests() {
    let start = Instant::now();
    let meshes = [
        fixtures::cube(0.1),
        fixtures::cuboid(0.15, 0.06, 0.04),
        fixtures::l_solid(0.04),
        fixtures::cylinder(0.04, 0.1, 12),
        fixtures::icosphere(0.05, 1),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut disagreements, mut colliding, mut pairs) = (0, 0, 0);
    for _ in 0..100 {
        let objects: Vec<(&TriangleMesh, SimilarityTransform)> = (0..10)
            .map(|_| {
                let m = &meshes[rng.random_range(0..meshes.len())];
                let q = UnitQuaternion::from_euler_angles(
                    rng.random_range(-3.1..3.1),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-3.1..3.1),
                );
                let t = Vector3::new(
                    rng.random_range(0.0..0.4),
                    rng.random_range(0.0..0.4),
                    rng.random_range(0.0..0.1),
                );
                (m, SimilarityTransform::rigid(q, t))
            })
            .collect();
        let report: SceneCollisionReport = scene_collision_report(&objects, 1e-6).unwrap();
        let oracle = brute_report(&objects, 1e-6);
        for i in 0..10 {
            for j in i + 1..10 {
                pairs += 1;
                let r = &report.pairs[i][j];
                if r.in_collision != (oracle[i][j] > 0)
                    || r.intersecting_triangle_pairs != oracle[i][j]
                {
                    disagreements += 1;
                }
                colliding += usize::from(oracle[i][j] > 0);
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "collision oracle equivalence",
        disagreements == 0 && elapsed < Duration::from_secs(120),
        format!(
            "{disagreements} disagreements over {pairs} pairs ({colliding} colliding), {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn stability_agrees_with_quasi_static_tipping() {
    let mut checked = Vec::new();
    let mut wrong = Vec::new();
    for critical in [2.0f64, 10.0, 30.0, 44.0, 60.0] {
        let hh = 0.05;
        let hw = hh * critical.to_radians().tan();
        let mesh = fixtures::cuboid(2.0 * hw, 2.0 * hw, 2.0 * hh);
        for tilt in [5.0f64, 20.0, 40.0] {
            if (tilt - critical).abs() <= 1.0 {
                continue;
            }
            // every direction must recover, so the edge-on tip decides
            let params = StabilityParams {
                perturb_angle: tilt,
                require_all: true,
                ..StabilityParams::default()
            };
            let v = stability_verdict(&mesh, &UnitQuaternion::identity(), &params).unwrap();
            let expected = tilt < critical;
            checked.push(format!("{critical}°@{tilt}°"));
            if v.has_stable_pose_near_scene != expected {
                wrong.push(format!(
                    "critical {critical}° tilt {tilt}°: got {}",
                    v.has_stable_pose_near_scene
                ));
            }
        }
    }
    let cube = stability_verdict(
        &fixtures::cube(0.1),
        &UnitQuaternion::identity(),
        &StabilityParams::default(),
    )
    .unwrap();
    verdict(
        "stability vs quasi-static oracle",
        wrong.is_empty() && cube.perturbations_reverted == 8 && cube.n_perturbations == 8,
        format!(
            "{} box/tilt cases, mismatches {:?}; cube reverted {}/{} at 5°",
            checked.len(),
            wrong,
            cube.perturbations_reverted,
            cube.n_perturbations
        ),
    );
}

#[test]
fn grasp_self_transfer_and_interval() {
    let params = GraspParams::default();
    let mut rates = Vec::new();
    for (name, mesh) in [
        ("cube", fixtures::cube(0.05)),
        ("box", fixtures::cuboid(0.06, 0.04, 0.1)),
        ("l_solid", fixtures::l_solid(0.03)),
        ("cylinder", fixtures::cylinder(0.03, 0.1, 24)),
        ("icosphere", fixtures::icosphere(0.03, 2)),
        ("mug", fixtures::mug()),
    ] {
        let r = grasp_transfer_rate(&mesh, &mesh, &SimilarityTransform::identity(), &params, 3)
            .unwrap();
        rates.push((name, r.rate));
    }
    let sphere = fixtures::icosphere(0.1, 2);
    let none = grasp_transfer_rate(
        &sphere,
        &sphere,
        &SimilarityTransform::identity(),
        &params,
        3,
    );
    let w = wilson_interval(5, 10, 1.96).unwrap();
    verdict(
        "grasp self-transfer",
        rates.iter().all(|(_, r)| *r == 1.0)
            && matches!(none, Err(Error::NoGraspsFound { .. }))
            && (w.low - 0.2366).abs() <= 1e-4
            && (w.high - 0.7634).abs() <= 1e-4,
        format!(
            "rates {rates:?}; oversized sphere {}; Wilson(5/10) [{:.4}, {:.4}]",
            match &none {
                Err(e) => e.to_string(),
                Ok(r) => format!("rate {}", r.rate),
            },
            w.low,
            w.high
        ),
    );
}

/// Scene whose five gate inputs sit just inside (`true`) or just outside each threshold.
fn straddling_scene(pass: [bool; 5], t: &Thresholds) -> SceneMetrics {
    let cd = if pass[0] {
        t.accuracy_m * 0.99
    } else {
        t.accuracy_m * 1.01
    };
    let tilt = if pass[2] {
        t.stability_tilt_deg - 0.1
    } else {
        t.stability_tilt_deg + 0.1
    };
    let ratio = if pass[3] {
        t.occlusion_ratio - 0.001
    } else {
        t.occlusion_ratio + 0.001
    };
    let time = if pass[4] {
        t.latency_s - 0.01
    } else {
        t.latency_s + 0.01
    };
    let colliding = if pass[1] {
        t.max_colliding_pairs
    } else {
        t.max_colliding_pairs + 1
    };
    let objects: Vec<MetricsRecord> = ["a", "b"]
        .iter()
        .map(|id| MetricsRecord {
            object_id: id.to_string(),
            occluded: true,
            chamfer: Some(ChamferResult {
                mean_recon_to_gt: cd,
                mean_gt_to_recon: cd,
                symmetric: cd,
                per_point_recon_to_gt: Vec::new(),
            }),
            occlusion: Some(OcclusionSplit {
                visible_cd: Some(0.001),
                occluded_cd: Some(0.001 * (1.0 + ratio)),
                ratio: Some(ratio),
                n_visible: 1,
                n_occluded: 1,
                n_outside_view: 0,
                empty_partition: None,
            }),
            stability: Some(StabilitySummary {
                stable: true,
                tilt_deg: Some(tilt),
                perturbations_reverted: 8,
                n_perturbations: 8,
            }),
            recon_time_s: Some(time / 2.0),
            ..MetricsRecord::default()
        })
        .collect();
    let hit = twinbench_core::collision::CollisionResult {
        in_collision: colliding > 0,
        intersecting_triangle_pairs: colliding,
        max_penetration_estimate: (colliding > 0).then_some(0.001),
    };
    SceneMetrics {
        scene_id: "truth_table".into(),
        objects,
        collision: Some(SceneCollision {
            object_ids: vec!["a".into(), "b".into()],
            report: SceneCollisionReport {
                pairs: vec![vec![Default::default(), hit], vec![hit, Default::default()]],
                object_in_collision: vec![colliding > 0; 2],
                n_objects_in_collision: if colliding > 0 { 2 } else { 0 },
                n_objects_total: 2,
                n_colliding_pairs: colliding,
            },
        }),
        total_recon_time_s: Some(time),
        mean_recon_time_s: Some(time / 2.0),
        ..SceneMetrics::default()
    }
}

#[test]
fn desiderata_truth_table() {
    let t = Thresholds::default();
    let mut correct = 0;
    for bits in 0u32..32 {
        let pass: [bool; 5] = std::array::from_fn(|k| bits & (1 << k) != 0);
        let report = desiderata_gate(&straddling_scene(pass, &t), &t);
        let expected = pass.map(|p| {
            if p {
                GateStatus::Pass
            } else {
                GateStatus::Fail
            }
        });
        if report.statuses() == expected && report.all_pass() == (bits == 31) {
            correct += 1;
        }
    }
    verdict(
        "desiderata gate truth table",
        correct == 32,
        format!("{correct}/32 combinations"),
    );
}

fn read_reports(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for name in [
        "objects.csv",
        "scenes.csv",
        "long.csv",
        "summary.json",
        "config.resolved.json",
    ] {
        out.insert(name.to_string(), std::fs::read(dir.join(name)).unwrap());
    }
    for e in std::fs::read_dir(dir.join("scenes")).unwrap() {
        let p = e.unwrap().path();
        out.insert(
            format!("scenes/{}", p.file_name().unwrap().to_string_lossy()),
            std::fs::read(&p).unwrap(),
        );
    }
    out
}

#[test]
fn loopback_on_synthetic_mini_dataset() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = HarnessConfig::default();

    let clean = dir.path().join("identity");
    write_dataset(&mini_dataset(), DebugModel::Identity, 0, &clean).unwrap();
    let identity = run(
        &collect_manifests(&[clean]).unwrap(),
        &config,
        &dir.path().join("out_identity"),
    )
    .unwrap();
    let identity_ok =
        identity.results.len() == 3 && identity.results.iter().all(|r| r.desiderata.all_pass());

    let noisy_dir = dir.path().join("noisy");
    let paths = write_dataset(&mini_dataset(), DebugModel::NOISY_5MM, 0, &noisy_dir).unwrap();
    let noisy = run(&paths, &config, &dir.path().join("out_noisy")).unwrap();
    let mut details = Vec::new();
    let mut noisy_ok = noisy.results.len() == 3;
    for (r, path) in noisy.results.iter().zip(&paths) {
        let m = load_manifest(path).unwrap();
        let mut floors: Vec<f64> = m
            .objects
            .iter()
            .enumerate()
            .map(|(k, o)| {
                noise_floor_cd(
                    &o.load_gt(1.0).unwrap(),
                    &o.load_recon(1.0).unwrap(),
                    config.n_samples,
                    100 + k as u64,
                )
                .unwrap()
            })
            .collect();
        floors.sort_by(f64::total_cmp);
        let floor = floors[floors.len() / 2];
        let median = r.desiderata.d1_accuracy.median_cd_m.unwrap_or(f64::NAN);
        let off = (median - floor).abs() / floor;
        noisy_ok &= r.desiderata.d1_accuracy.status == GateStatus::Fail && off <= 0.20;
        details.push(format!(
            "{} median {:.2} mm vs floor {:.2} mm",
            r.scene.scene_id,
            1e3 * median,
            1e3 * floor
        ));
    }
    let elapsed = start.elapsed();
    verdict(
        "end-to-end loopback",
        identity_ok && noisy_ok && elapsed < Duration::from_secs(600),
        format!(
            "identity all pass: {identity_ok}; 5 mm noise D1 fails with {}; {:.0} s",
            details.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn identical_runs_write_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let paths = write_dataset(&mini_dataset(), DebugModel::NOISY_5MM, 9, &data).unwrap();
    let config = HarnessConfig {
        seed: 9,
        ..HarnessConfig::default()
    };
    run(&paths, &config, &dir.path().join("a")).unwrap();
    run(&paths, &config, &dir.path().join("b")).unwrap();
    let a = read_reports(&dir.path().join("a"));
    let b = read_reports(&dir.path().join("b"));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    verdict(
        "determinism",
        a.len() == b.len() && differing.is_empty(),
        format!(
            "{} report files compared, differing: {differing:?}",
            a.len()
        ),
    );
}
