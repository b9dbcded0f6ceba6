use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{HarnessConfig, SceneMode};
use super::manifest::{ObjectEntry, SceneManifest};
use super::records::{
    recon_time_totals, GraspSummary, MetricsRecord, RelativeDistanceError, SceneCollision,
    SceneMetrics, SceneTimings, StabilitySummary, StageTimings,
};
use crate::alignment::{
    icp_refine, masked_icp, multistart_align, symmetry_flip_correction, AlignmentResult, IcpParams,
};
use crate::collision::scene_collision_report;
use crate::error::{Error, Result};
use crate::grasping::grasp_transfer_rate;
use crate::mesh::{chamfer_distance, sample_surface, NnIndex, PointCloud, TriangleMesh};
use crate::stability::stability_verdict;
use crate::transform::SimilarityTransform;
use crate::visibility::{
    classify_with_mask, occlusion_split_chamfer, occlusion_split_with_mask, render_depth, DepthMap,
    ObjectMask,
};

/// Metrics and harness timings of one scene.
#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub metrics: SceneMetrics,
    pub timings: SceneTimings,
}

/// Shared, read-only inputs of a scene.
struct SceneContext<'a> {
    manifest: &'a SceneManifest,
    config: &'a HarnessConfig,
    /// Ground-truth meshes in world coordinates, manifest order.
    gt_world: Vec<std::result::Result<TriangleMesh, String>>,
    /// Camera depth of every loadable ground-truth mesh.
    depth: Option<DepthMap>,
}

impl<'a> SceneContext<'a> {
    fn new(
        manifest: &'a SceneManifest,
        config: &'a HarnessConfig,
        timings: &mut StageTimings,
    ) -> Self {
        let gt_world: Vec<_> = timings.time("load_gt", || {
            manifest
                .objects
                .par_iter()
                .map(|o| {
                    o.load_gt(manifest.unit_scale)
                        .map(|m| m.transformed(&o.gt_pose))
                        .map_err(|e| e.to_string())
                })
                .collect()
        });
        let depth = manifest.objects.iter().any(|o| o.occluded).then(|| {
            timings.time("render_depth", || {
                let scene: Vec<(&TriangleMesh, SimilarityTransform)> = gt_world
                    .iter()
                    .flatten()
                    .map(|m| (m, SimilarityTransform::identity()))
                    .collect();
                render_depth(&scene, &manifest.camera, config.render_scale)
            })
        });
        Self {
            manifest,
            config,
            gt_world,
            depth,
        }
    }

    fn seed(&self, object_id: &str, stage: &str) -> u64 {
        self.config
            .stage_seed(&self.manifest.scene_id, object_id, stage)
    }
}

/// Per-object state carried between the alignment and metric phases.
struct ObjectWork<'a> {
    entry: &'a ObjectEntry,
    record: MetricsRecord,
    timings: StageTimings,
    gt: Option<TriangleMesh>,
    gt_cloud: Option<PointCloud>,
    recon: Option<TriangleMesh>,
    recon_cloud: Option<PointCloud>,
    /// Reconstruction-to-world transform once known.
    transform: Option<SimilarityTransform>,
    /// Placed by the model and aligned with the whole scene.
    scene_placed: bool,
}

impl ObjectWork<'_> {
    fn fail(&mut self, stage: &str, e: impl ToString) {
        self.record.errors.insert(stage.to_string(), e.to_string());
    }

    fn placed_cloud(&self) -> Option<PointCloud> {
        Some(
            self.recon_cloud
                .as_ref()?
                .transformed(self.transform.as_ref()?),
        )
    }
}

/// Loads, samples and aligns one object.
fn prepare_object<'a>(ctx: &SceneContext<'a>, index: usize) -> ObjectWork<'a> {
    let entry = &ctx.manifest.objects[index];
    let config = ctx.config;
    let start = Instant::now();
    let mut w = ObjectWork {
        entry,
        record: MetricsRecord {
            object_id: entry.object_id.clone(),
            label: entry.label.clone(),
            occluded: entry.occluded,
            recon_time_s: entry.recon_time_s,
            peak_mem_bytes: entry.peak_mem_bytes,
            ..MetricsRecord::default()
        },
        timings: StageTimings::default(),
        gt: None,
        gt_cloud: None,
        recon: None,
        recon_cloud: None,
        transform: None,
        scene_placed: false,
    };
    match &ctx.gt_world[index] {
        Ok(m) => w.gt = Some(m.clone()),
        Err(e) => w.fail("load_gt", e),
    }
    match w
        .timings
        .time("load_recon", || entry.load_recon(ctx.manifest.unit_scale))
    {
        Ok(m) => w.recon = Some(m),
        Err(e) => w.fail("load_recon", e),
    }
    let n = config.n_samples;
    if let Some(gt) = &w.gt {
        match w.timings.time("sample_gt", || {
            sample_surface(gt, n, ctx.seed(&entry.object_id, "gt"))
        }) {
            Ok(c) => w.gt_cloud = Some(c),
            Err(e) => w.fail("sample_gt", e),
        }
    }
    if let Some(recon) = &w.recon {
        match w.timings.time("sample_recon", || {
            sample_surface(recon, n, ctx.seed(&entry.object_id, "recon"))
        }) {
            Ok(c) => w.recon_cloud = Some(c),
            Err(e) => w.fail("sample_recon", e),
        }
    }
    if let (Some(recon_cloud), Some(gt_cloud)) = (&w.recon_cloud, &w.gt_cloud) {
        if config.scene_mode == SceneMode::Whole && entry.recon_pose.is_some() {
            w.transform = entry.recon_pose;
            w.scene_placed = true;
        } else {
            let aligned = w.timings.time("alignment", || {
                align_object(ctx, entry, recon_cloud, gt_cloud)
            });
            match aligned {
                Ok(a) => {
                    let a = if config.symmetry_flip && !entry.symmetry.is_empty() {
                        let spec = entry.symmetry.rotated(&entry.gt_pose.rotation);
                        match w.timings.time("symmetry_flip", || {
                            symmetry_flip_correction(&a, recon_cloud, gt_cloud, &spec)
                        }) {
                            Ok(f) => f,
                            Err(e) => {
                                w.fail("symmetry_flip", e);
                                a
                            }
                        }
                    } else {
                        a
                    };
                    w.transform = Some(a.transform);
                    w.record.alignment = Some(a);
                }
                Err(e) => w.fail("alignment", e),
            }
        }
    }
    w.timings.total_s = start.elapsed().as_secs_f64();
    w
}

fn align_object(
    ctx: &SceneContext,
    entry: &ObjectEntry,
    recon: &PointCloud,
    gt: &PointCloud,
) -> Result<AlignmentResult> {
    let params = &ctx.config.alignment;
    match (&ctx.depth, entry.occluded && ctx.config.masked_alignment) {
        (Some(depth), true) => masked_icp(recon, gt, &ctx.manifest.camera, depth, params),
        _ => multistart_align(recon, gt, params),
    }
}

/// Chamfer, occlusion split, stability and grasp transfer of an aligned object.
fn measure_object(ctx: &SceneContext, w: &mut ObjectWork) {
    let start = Instant::now();
    let (Some(t), Some(recon), Some(recon_cloud), Some(gt), Some(gt_cloud)) = (
        w.transform,
        w.recon.clone(),
        w.recon_cloud.clone(),
        w.gt.clone(),
        w.gt_cloud.clone(),
    ) else {
        return;
    };
    let config = ctx.config;
    let entry = w.entry;
    let aligned_cloud = recon_cloud.transformed(&t);

    match w
        .timings
        .time("chamfer", || chamfer_distance(&aligned_cloud, &gt_cloud))
    {
        Ok(mut c) => {
            c.per_point_recon_to_gt = Vec::new();
            w.record.chamfer = Some(c);
        }
        Err(e) => w.fail("chamfer", e),
    }

    if entry.occluded {
        let split = w.timings.time("occlusion", || -> Result<_> {
            let occ = &config.occlusion;
            let camera = &ctx.manifest.camera;
            match &entry.mask_path {
                Some(path) => {
                    let mask = ObjectMask::load_png(path)?;
                    let own = render_depth(
                        &[(&gt, SimilarityTransform::identity())],
                        camera,
                        config.render_scale,
                    );
                    let vis = classify_with_mask(&gt_cloud, camera, &own, &mask, occ.epsilon)?;
                    occlusion_split_with_mask(&aligned_cloud, &gt_cloud, &vis, occ.cd_floor)
                }
                None => {
                    let depth = ctx
                        .depth
                        .as_ref()
                        .expect("depth is rendered when any object is occluded");
                    occlusion_split_chamfer(
                        &recon_cloud,
                        &gt_cloud,
                        &t,
                        camera,
                        depth,
                        occ.epsilon,
                        occ.cd_floor,
                    )
                }
            }
        });
        match split {
            Ok(s) => w.record.occlusion = Some(s),
            Err(e) => w.fail("occlusion", e),
        }
    }

    if config.stages.stability {
        let body = recon.scaled(t.scale);
        match w.timings.time("stability", || {
            stability_verdict(&body, &t.rotation, &config.stability)
        }) {
            Ok(v) => {
                w.record.stability = Some(StabilitySummary::from(&v));
                w.record.stability_trace = Some(v);
            }
            Err(e) => w.fail("stability", e),
        }
    }

    if config.stages.grasping {
        let seed = ctx.seed(&entry.object_id, "grasp");
        match w.timings.time("grasping", || {
            grasp_transfer_rate(&recon, &gt, &t, &config.grasping, seed)
        }) {
            Ok(r) => w.record.grasp_transfer = Some(GraspSummary::from(&r)),
            Err(e) => w.fail("grasping", e),
        }
    }
    w.timings.total_s += start.elapsed().as_secs_f64();
}

/// Runs the per-object pipeline for a single object, independently of the
/// rest of the scene. In whole-scene mode a model-supplied placement is used
/// as is.
pub fn evaluate_object(
    manifest: &SceneManifest,
    object_id: &str,
    config: &HarnessConfig,
) -> Result<MetricsRecord> {
    config.validate()?;
    let index = manifest
        .objects
        .iter()
        .position(|o| o.object_id == object_id)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no object {object_id:?} in scene {}",
                manifest.scene_id
            ))
        })?;
    let mut timings = StageTimings::default();
    let ctx = SceneContext::new(manifest, config, &mut timings);
    let mut w = prepare_object(&ctx, index);
    measure_object(&ctx, &mut w);
    Ok(w.record)
}

/// Evaluates every object of a scene plus the scene-level metrics.
pub fn evaluate_scene(manifest: &SceneManifest, config: &HarnessConfig) -> Result<SceneEvaluation> {
    config.validate()?;
    let start = Instant::now();
    let mut scene_timings = StageTimings::default();
    let ctx = SceneContext::new(manifest, config, &mut scene_timings);

    let mut order: Vec<usize> = (0..manifest.objects.len()).collect();
    order.sort_by(|&a, &b| {
        manifest.objects[a]
            .object_id
            .cmp(&manifest.objects[b].object_id)
    });
    let mut work: Vec<ObjectWork> = order.par_iter().map(|&i| prepare_object(&ctx, i)).collect();

    let mut metrics = SceneMetrics {
        scene_id: manifest.scene_id.clone(),
        scene_mode: config.scene_mode,
        ..SceneMetrics::default()
    };

    let unplaced: Vec<&str> = work
        .iter()
        .filter(|w| w.transform.is_none())
        .map(|w| w.entry.object_id.as_str())
        .collect();
    if !unplaced.is_empty() {
        metrics.errors.insert(
            "placement".into(),
            format!("objects without a placement: {}", unplaced.join(", ")),
        );
    }

    match scene_timings.time("scene_alignment", || scene_alignment(&ctx, &mut work)) {
        Ok((chamfer, alignment)) => {
            metrics.scene_chamfer = Some(chamfer);
            metrics.scene_alignment = alignment;
        }
        Err(e) => {
            metrics.errors.insert("scene_chamfer".into(), e.to_string());
        }
    }

    work.par_iter_mut().for_each(|w| measure_object(&ctx, w));

    metrics.relative_distance_errors =
        scene_timings.time("relative_distance", || relative_distance_errors(&work));

    let placed: Vec<usize> = (0..work.len())
        .filter(|&i| work[i].transform.is_some())
        .collect();
    let objects: Vec<(&TriangleMesh, SimilarityTransform)> = placed
        .iter()
        .map(|&i| {
            (
                work[i].recon.as_ref().expect("placed objects are loaded"),
                work[i].transform.expect("placed"),
            )
        })
        .collect();
    match scene_timings.time("collision", || {
        scene_collision_report(&objects, config.collision.contact_epsilon)
    }) {
        Ok(report) => {
            let ids: Vec<String> = placed
                .iter()
                .map(|&i| work[i].entry.object_id.clone())
                .collect();
            for (k, &i) in placed.iter().enumerate() {
                let w = &mut work[i];
                w.record.in_collision = Some(report.object_in_collision[k]);
                w.record.colliding_partners = (0..ids.len())
                    .filter(|&j| report.pairs[k][j].in_collision)
                    .map(|j| ids[j].clone())
                    .collect();
            }
            metrics.collision = Some(SceneCollision {
                object_ids: ids,
                report,
            });
        }
        Err(e) => {
            metrics.errors.insert("collision".into(), e.to_string());
        }
    }

    let times: Vec<Option<f64>> = work.iter().map(|w| w.record.recon_time_s).collect();
    (metrics.total_recon_time_s, metrics.mean_recon_time_s) = recon_time_totals(&times);

    let mut timings = SceneTimings {
        scene_id: manifest.scene_id.clone(),
        ..SceneTimings::default()
    };
    for w in work {
        timings.objects.insert(w.entry.object_id.clone(), w.timings);
        metrics.objects.push(w.record);
    }
    timings.scene = scene_timings;
    timings.total_s = start.elapsed().as_secs_f64();
    Ok(SceneEvaluation { metrics, timings })
}

/// Whole-scene Chamfer distance between clouds sampled from the merged
/// placed reconstructions and the merged ground truth. In whole-scene mode
/// the reconstruction is first aligned as one rigid body and model-placed
/// objects inherit that alignment.
fn scene_alignment(
    ctx: &SceneContext,
    work: &mut [ObjectWork],
) -> Result<(crate::mesh::ChamferResult, Option<AlignmentResult>)> {
    let placed: Vec<usize> = (0..work.len())
        .filter(|&i| work[i].transform.is_some())
        .collect();
    if placed.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let recon_meshes: Vec<TriangleMesh> = placed
        .iter()
        .map(|&i| {
            let w = &work[i];
            w.recon
                .as_ref()
                .expect("placed objects are loaded")
                .transformed(&w.transform.expect("placed"))
        })
        .collect();
    let recon_scene = TriangleMesh::merge(&recon_meshes)?;
    let gt_scene = TriangleMesh::merge(
        placed
            .iter()
            .map(|&i| work[i].gt.as_ref().expect("placed objects are loaded")),
    )?;
    let n = ctx.config.n_samples;
    let recon_cloud = sample_surface(&recon_scene, n, ctx.seed("", "scene_recon"))?;
    let gt_cloud = sample_surface(&gt_scene, n, ctx.seed("", "scene_gt"))?;

    if ctx.config.scene_mode == SceneMode::PerObject {
        let mut chamfer = chamfer_distance(&recon_cloud, &gt_cloud)?;
        chamfer.per_point_recon_to_gt = Vec::new();
        return Ok((chamfer, None));
    }
    let index = NnIndex::build(&gt_cloud)?;
    let icp = IcpParams {
        max_iter: ctx.config.alignment.max_iter,
        convergence_tol: ctx.config.alignment.convergence_tol,
    };
    let scene = icp_refine(&recon_cloud, &index, &SimilarityTransform::identity(), &icp)?;
    for w in work.iter_mut().filter(|w| w.scene_placed) {
        let t = scene.transform.compose(&w.transform.expect("placed"));
        w.transform = Some(t);
        if let (Some(rc), Some(gc)) = (&w.recon_cloud, &w.gt_cloud) {
            w.record.alignment = Some(fixed_alignment(&t, rc, gc, &scene)?);
        }
    }
    let mut chamfer = chamfer_distance(&recon_cloud.transformed(&scene.transform), &gt_cloud)?;
    chamfer.per_point_recon_to_gt = Vec::new();
    Ok((chamfer, Some(scene)))
}

/// Alignment record for an object placed by the whole-scene alignment.
fn fixed_alignment(
    t: &SimilarityTransform,
    recon: &PointCloud,
    gt: &PointCloud,
    scene: &AlignmentResult,
) -> Result<AlignmentResult> {
    let index = NnIndex::build(gt)?;
    let sq: f64 = recon
        .points
        .iter()
        .map(|p| index.nearest(&t.apply(p)).1)
        .sum();
    let rmse = (sq / recon.len() as f64).sqrt();
    Ok(AlignmentResult::new(
        *t,
        rmse,
        scene.n_iterations,
        0,
        scene.converged,
        recon.len(),
    ))
}

/// Pairwise symmetric Chamfer distance between placed reconstructions minus
/// the same between the ground-truth objects.
fn relative_distance_errors(work: &[ObjectWork]) -> Vec<RelativeDistanceError> {
    let placed: Vec<(&str, PointCloud, &PointCloud)> = work
        .iter()
        .filter_map(|w| {
            Some((
                w.entry.object_id.as_str(),
                w.placed_cloud()?,
                w.gt_cloud.as_ref()?,
            ))
        })
        .collect();
    let items: Vec<(&str, &PointCloud, &PointCloud)> =
        placed.iter().map(|(id, r, g)| (*id, r, *g)).collect();
    pairwise_errors(&items)
}

/// Relative distance errors for clouds already placed in the world, keyed by
/// object id. Ids present in only one map are ignored.
pub fn relative_errors_from_clouds(
    recon: &BTreeMap<String, PointCloud>,
    gt: &BTreeMap<String, PointCloud>,
) -> Vec<RelativeDistanceError> {
    let items: Vec<(&str, &PointCloud, &PointCloud)> = recon
        .iter()
        .filter_map(|(id, r)| Some((id.as_str(), r, gt.get(id)?)))
        .collect();
    pairwise_errors(&items)
}

fn pairwise_errors(items: &[(&str, &PointCloud, &PointCloud)]) -> Vec<RelativeDistanceError> {
    let pairs: Vec<(usize, usize)> = (0..items.len())
        .flat_map(|i| (i + 1..items.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let recon_cd = chamfer_distance(items[i].1, items[j].1).ok()?.symmetric;
            let gt_cd = chamfer_distance(items[i].2, items[j].2).ok()?.symmetric;
            Some(RelativeDistanceError {
                object_a: items[i].0.to_string(),
                object_b: items[j].0.to_string(),
                recon_cd,
                gt_cd,
                error: recon_cd - gt_cd,
            })
        })
        .collect()
}
