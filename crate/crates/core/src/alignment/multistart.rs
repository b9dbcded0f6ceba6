use std::borrow::Cow;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::icp::{estimate_normals, run_icp, run_symmetric_icp, IcpParams};

/// Neighbours used to fit the tangent plane at each ground-truth point.
const NORMAL_NEIGHBOURS: usize = 12;
use super::{estimate_scale, sample_unit_quaternions, AlignmentResult};
use crate::error::{Error, Result};
use crate::mesh::{NnIndex, PointCloud};
use crate::transform::SimilarityTransform;
use crate::visibility::{classify_visibility, CameraModel, DepthMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentParams {
    pub n_starts: usize,
    pub max_iter: usize,
    pub convergence_tol: f64,
    /// Every start first runs on at most this many reconstruction points
    /// (0 runs all starts on the full cloud).
    pub coarse_points: usize,
    /// Number of best coarse starts refined on the full cloud (at least one
    /// for masked alignment).
    pub refine_top_k: usize,
    /// Depth slack for masked alignment (m).
    pub occlusion_epsilon: f64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self {
            n_starts: 512,
            max_iter: 100,
            convergence_tol: 1e-7,
            coarse_points: 250,
            refine_top_k: 4,
            occlusion_epsilon: crate::visibility::DEFAULT_EPSILON,
        }
    }
}

impl AlignmentParams {
    pub fn icp(&self) -> IcpParams {
        IcpParams {
            max_iter: self.max_iter,
            convergence_tol: self.convergence_tol,
        }
    }

    /// All starts refined on the full cloud.
    pub fn exhaustive(mut self) -> Self {
        self.coarse_points = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument(
                "alignment.n_starts must be at least 1".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "alignment.max_iter must be at least 1".into(),
            ));
        }
        if !(self.convergence_tol >= 0.0) || !(self.occlusion_epsilon >= 0.0) {
            return Err(Error::InvalidArgument(
                "alignment tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one ICP start, for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start_index: usize,
    /// Final RMSE; on the coarse subset unless `refined`. Infinite if the start failed.
    pub rmse: f64,
    pub refined: bool,
}

/// Multi-start similarity alignment of `recon` onto `gt`; returns the start
/// with the lowest RMSE (ties to the lowest start index).
pub fn multistart_align(
    recon: &PointCloud,
    gt: &PointCloud,
    params: &AlignmentParams,
) -> Result<AlignmentResult> {
    multistart_align_traced(recon, gt, params).map(|(best, _)| best)
}

pub fn multistart_align_traced(
    recon: &PointCloud,
    gt: &PointCloud,
    params: &AlignmentParams,
) -> Result<(AlignmentResult, Vec<StartRecord>)> {
    params.validate()?;
    let scale = estimate_scale(gt, recon)?;
    let index = NnIndex::build(gt)?;
    search(recon, &index, &gt.centroid(), scale, params, None)
}

/// Multi-start alignment that ignores occluded points of both clouds.
///
/// Ground-truth visibility is fixed by the scene; reconstruction visibility is
/// recomputed under the current transform at every ICP iteration. Starts are
/// screened at a fixed scale; the best are refined with scale free, matching
/// visible points in both directions. The reported RMSE covers those matches.
pub fn masked_icp(
    recon: &PointCloud,
    gt: &PointCloud,
    camera: &CameraModel,
    scene_depth: &DepthMap,
    params: &AlignmentParams,
) -> Result<AlignmentResult> {
    params.validate()?;
    if recon.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let gt_mask = classify_visibility(gt, camera, scene_depth, params.occlusion_epsilon);
    let gt_visible = gt.select(&gt_mask.visible);
    if gt_visible.is_empty() {
        return Err(Error::AllPointsOccluded("ground truth"));
    }
    let index = NnIndex::build(&gt_visible)?;
    let ctx = MaskContext {
        camera,
        depth: scene_depth,
        epsilon: params.occlusion_epsilon,
    };
    let scale = estimate_scale(&gt_visible, recon)?;
    let icp = params.icp();
    let align = |src: &PointCloud,
                 dst: &PointCloud,
                 dst_index: &NnIndex,
                 normals: Option<&[Vector3<f64>]>,
                 init: &SimilarityTransform| {
        run_symmetric_icp(
            &src.points,
            &dst.points,
            dst_index,
            normals,
            init,
            &icp,
            &|t| ctx.visible(&src.points, t),
        )
    };

    let staged = params.coarse_points > 0 && params.refine_top_k > 0;
    let (recon_sub, gt_sub) = if staged {
        (
            recon.strided(params.coarse_points),
            gt_visible.strided(params.coarse_points),
        )
    } else {
        (recon.clone(), gt_visible.clone())
    };
    let sub_index = NnIndex::build(&gt_sub)?;
    let c_r = recon_sub.centroid().coords;
    let target = gt_sub.centroid().coords;
    let starts = sample_unit_quaternions(params.n_starts);
    let first: Vec<Result<AlignmentResult>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, q)| {
            let init = SimilarityTransform::new(scale, *q, target - scale * (q * c_r));
            align(&recon_sub, &gt_sub, &sub_index, None, &init).map(|mut r| {
                r.start_index = k;
                r
            })
        })
        .collect();
    if !staged {
        return pick_best(first);
    }
    let mut ranked: Vec<&AlignmentResult> = first.iter().filter_map(|r| r.as_ref().ok()).collect();
    ranked.sort_by(|a, b| {
        a.rmse
            .total_cmp(&b.rmse)
            .then(a.start_index.cmp(&b.start_index))
    });
    ranked.truncate(params.refine_top_k);
    if ranked.is_empty() {
        return pick_best(first);
    }
    let normals = estimate_normals(&gt_visible.points, &index, NORMAL_NEIGHBOURS);
    let refined: Vec<Result<AlignmentResult>> = ranked
        .par_iter()
        .map(|coarse| {
            align(
                recon,
                &gt_visible,
                &index,
                Some(&normals),
                &coarse.transform,
            )
            .map(|mut r| {
                r.start_index = coarse.start_index;
                r.n_iterations += coarse.n_iterations;
                r
            })
        })
        .collect();
    pick_best(refined)
}

struct MaskContext<'a> {
    camera: &'a CameraModel,
    depth: &'a DepthMap,
    epsilon: f64,
}

impl MaskContext<'_> {
    fn visible(&self, points: &[Point3<f64>], t: &SimilarityTransform) -> Vec<bool> {
        let moved = PointCloud::from_points(points.iter().map(|p| t.apply(p)).collect());
        classify_visibility(&moved, self.camera, self.depth, self.epsilon).visible
    }
}

fn run_start(
    points: &[Point3<f64>],
    index: &NnIndex,
    init: &SimilarityTransform,
    icp: &IcpParams,
    mask: Option<&MaskContext>,
) -> Result<AlignmentResult> {
    match mask {
        None => run_icp(points, index, init, icp, &mut |_| None),
        Some(ctx) => run_icp(points, index, init, icp, &mut |t| {
            Some(ctx.visible(points, t))
        }),
    }
}

fn better(a: &AlignmentResult, b: &AlignmentResult) -> bool {
    a.rmse
        .total_cmp(&b.rmse)
        .then(a.start_index.cmp(&b.start_index))
        .is_lt()
}

fn search(
    recon: &PointCloud,
    index: &NnIndex,
    target_centroid: &Point3<f64>,
    scale: f64,
    params: &AlignmentParams,
    mask: Option<&MaskContext>,
) -> Result<(AlignmentResult, Vec<StartRecord>)> {
    let starts = sample_unit_quaternions(params.n_starts);
    let c_r = recon.centroid().coords;
    let init = |q: &UnitQuaternion<f64>| {
        SimilarityTransform::new(scale, *q, target_centroid.coords - scale * (q * c_r))
    };
    let icp = params.icp();
    let staged =
        params.coarse_points > 0 && params.refine_top_k > 0 && recon.len() > params.coarse_points;
    let first_src: Cow<PointCloud> = if staged {
        Cow::Owned(recon.strided(params.coarse_points))
    } else {
        Cow::Borrowed(recon)
    };

    let first: Vec<Result<AlignmentResult>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, q)| {
            run_start(&first_src.points, index, &init(q), &icp, mask).map(|mut r| {
                r.start_index = k;
                r
            })
        })
        .collect();
    let mut records: Vec<StartRecord> = first
        .iter()
        .enumerate()
        .map(|(k, r)| StartRecord {
            start_index: k,
            rmse: r.as_ref().map_or(f64::INFINITY, |r| r.rmse),
            refined: !staged,
        })
        .collect();

    let finals: Vec<Result<AlignmentResult>> = if staged {
        let mut ranked: Vec<&AlignmentResult> =
            first.iter().filter_map(|r| r.as_ref().ok()).collect();
        ranked.sort_by(|a, b| {
            a.rmse
                .total_cmp(&b.rmse)
                .then(a.start_index.cmp(&b.start_index))
        });
        ranked.truncate(params.refine_top_k);
        let refined: Vec<Result<AlignmentResult>> = ranked
            .par_iter()
            .map(|coarse| {
                run_start(&recon.points, index, &coarse.transform, &icp, mask).map(|mut r| {
                    r.start_index = coarse.start_index;
                    r.n_iterations += coarse.n_iterations;
                    r
                })
            })
            .collect();
        for (coarse, r) in ranked.iter().zip(&refined) {
            records[coarse.start_index] = StartRecord {
                start_index: coarse.start_index,
                rmse: r.as_ref().map_or(f64::INFINITY, |r| r.rmse),
                refined: true,
            };
        }
        if refined.is_empty() {
            first
        } else {
            refined
        }
    } else {
        first
    };

    pick_best(finals).map(|b| (b, records))
}

/// Lowest RMSE, ties to the lowest start index; the first error if every start failed.
fn pick_best(results: Vec<Result<AlignmentResult>>) -> Result<AlignmentResult> {
    let mut best: Option<AlignmentResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| better(&r, b)) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::EmptyCloud))
}
