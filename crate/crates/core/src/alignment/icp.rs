use nalgebra::{Matrix3, Point3, Rotation3, SMatrix, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::AlignmentResult;
use crate::error::{Error, Result};
use crate::mesh::{NnIndex, PointCloud};
use crate::transform::SimilarityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Stop once the RMSE (m) drops below this or improves by less than it.
    pub convergence_tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            convergence_tol: 1e-7,
        }
    }
}

/// Point-to-point ICP with the scale of `init` held fixed.
///
/// Correspondences run from each source point to its nearest target point.
pub fn icp_refine(
    source: &PointCloud,
    target: &NnIndex,
    init: &SimilarityTransform,
    params: &IcpParams,
) -> Result<AlignmentResult> {
    run_icp(&source.points, target, init, params, &mut |_| None)
}

/// ICP core. `active` may return a per-point mask of source points to use
/// under the current transform (`None` = all).
pub(crate) fn run_icp(
    source: &[Point3<f64>],
    target: &NnIndex,
    init: &SimilarityTransform,
    params: &IcpParams,
    active: &mut dyn FnMut(&SimilarityTransform) -> Option<Vec<bool>>,
) -> Result<AlignmentResult> {
    if source.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut current = *init;
    let mut best: Option<(SimilarityTransform, f64, usize)> = None;
    let mut keep_best = |t: SimilarityTransform, step: &Step| {
        if best.is_none_or(|(_, r, _)| step.rmse < r) {
            best = Some((t, step.rmse, step.count));
        }
    };
    let mut prev = f64::INFINITY;
    let max_iter = params.max_iter.max(1);
    let mut converged = false;
    let mut iterations = max_iter;
    for iteration in 1..=max_iter {
        let mask = active(&current);
        let step = correspond(source, target, &current, mask.as_deref())?;
        keep_best(current, &step);
        if step.rmse <= params.convergence_tol || prev - step.rmse < params.convergence_tol {
            converged = true;
            iterations = iteration;
            break;
        }
        prev = step.rmse;
        current = kabsch(&step, current.scale)?;
        if iteration == max_iter {
            // evaluate the last update
            let mask = active(&current);
            keep_best(
                current,
                &correspond(source, target, &current, mask.as_deref())?,
            );
        }
    }
    let (transform, rmse, count) = best.expect("at least one iteration ran");
    Ok(AlignmentResult::new(
        transform, rmse, iterations, 0, converged, count,
    ))
}

/// Sums for the closed-form update, accumulated over matched pairs.
struct Step {
    rmse: f64,
    count: usize,
    /// Mean of the scaled source points `s·p` and of their matches.
    src_mean: Vector3<f64>,
    tgt_mean: Vector3<f64>,
    /// Cross-covariance of the matched pairs.
    cross: Matrix3<f64>,
}

fn correspond(
    source: &[Point3<f64>],
    target: &NnIndex,
    t: &SimilarityTransform,
    mask: Option<&[bool]>,
) -> Result<Step> {
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let mut src_sum = Vector3::zeros();
    let mut tgt_sum = Vector3::zeros();
    let mut cross = Matrix3::zeros();
    // sums are taken relative to the first pair to limit cancellation
    let mut origin: Option<(Vector3<f64>, Vector3<f64>)> = None;
    for (i, p) in source.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let moved = t.apply(p);
        let (q, d2) = target.nearest_point(&moved);
        sum_sq += d2;
        count += 1;
        let sp = p.coords * t.scale;
        let (o_s, o_t) = *origin.get_or_insert((sp, q.coords));
        let a = sp - o_s;
        let b = q.coords - o_t;
        src_sum += a;
        tgt_sum += b;
        cross += a * b.transpose();
    }
    let Some((o_s, o_t)) = origin else {
        return Err(Error::AllPointsOccluded("reconstruction"));
    };
    let n = count as f64;
    let src_rel = src_sum / n;
    let tgt_rel = tgt_sum / n;
    Ok(Step {
        rmse: (sum_sq / n).sqrt(),
        count,
        src_mean: src_rel + o_s,
        tgt_mean: tgt_rel + o_t,
        cross: cross / n - src_rel * tgt_rel.transpose(),
    })
}

/// Least-squares rotation and translation for the matched pairs at fixed scale.
fn kabsch(step: &Step, scale: f64) -> Result<SimilarityTransform> {
    let svd = step.cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NonFiniteUpdate);
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteUpdate);
    }
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = step.tgt_mean - rotation * step.src_mean;
    if !translation.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteUpdate);
    }
    Ok(SimilarityTransform::new(scale, rotation, translation))
}

/// Similarity ICP between the visible parts of two clouds.
///
/// Pairs run both ways: each visible source point to its nearest target point
/// and each target point to its nearest visible source point, so the source
/// cannot shrink onto a patch of the target. Scale is re-estimated at every
/// step. With `target_normals` the update minimises point-to-plane distances.
/// The reported RMSE is point-to-point over both directions.
pub(crate) fn run_symmetric_icp(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    target_index: &NnIndex,
    target_normals: Option<&[Vector3<f64>]>,
    init: &SimilarityTransform,
    params: &IcpParams,
    visible: &dyn Fn(&SimilarityTransform) -> Vec<bool>,
) -> Result<AlignmentResult> {
    let mut current = *init;
    let mut best: Option<(SimilarityTransform, f64, usize)> = None;
    let centre = Point3::from(
        source.iter().map(|p| p.coords).sum::<Vector3<f64>>() / source.len().max(1) as f64,
    );
    let extent = source
        .iter()
        .map(|p| (p - centre).norm())
        .fold(0.0, f64::max);
    let max_iter = params.max_iter.max(1);
    let mut converged = false;
    let mut iterations = max_iter;
    for iteration in 1..=max_iter + 1 {
        let mask = visible(&current);
        let kept: Vec<usize> = (0..source.len()).filter(|&i| mask[i]).collect();
        if kept.is_empty() {
            return Err(Error::AllPointsOccluded("reconstruction"));
        }
        let moved: Vec<Point3<f64>> = kept.iter().map(|&i| current.apply(&source[i])).collect();
        let moved_index = NnIndex::from_points(&moved)?;
        // (source index, target index)
        let mut pairs = Vec::with_capacity(kept.len() + target.len());
        let mut sum_sq = 0.0;
        for (&i, m) in kept.iter().zip(&moved) {
            let (j, d2) = target_index.nearest(m);
            sum_sq += d2;
            pairs.push((i, j));
        }
        for (j, q) in target.iter().enumerate() {
            let (k, d2) = moved_index.nearest(q);
            sum_sq += d2;
            pairs.push((kept[k], j));
        }
        let rmse = (sum_sq / pairs.len() as f64).sqrt();
        if best.is_none_or(|(_, r, _)| rmse < r) {
            best = Some((current, rmse, kept.len()));
        }
        if iteration > max_iter {
            break;
        }
        if rmse <= params.convergence_tol {
            converged = true;
            iterations = iteration;
            break;
        }
        // visibility changes with the transform, so the RMSE need not fall
        // monotonically; stop once the update itself settles
        let next = match target_normals {
            None => umeyama(
                &pairs
                    .iter()
                    .map(|&(i, j)| (source[i].coords, target[j].coords))
                    .collect::<Vec<_>>(),
            )?,
            Some(normals) => {
                let planes: Vec<_> = pairs
                    .iter()
                    .map(|&(i, j)| (current.apply(&source[i]), target[j], normals[j]))
                    .collect();
                plane_step(&planes)?.compose(&current)
            }
        };
        let radius = current.scale * extent;
        let moved_by = (next.apply(&centre) - current.apply(&centre)).norm()
            + (next.rotation.angle_to(&current.rotation)
                + (next.scale / current.scale - 1.0).abs())
                * radius;
        current = next;
        if moved_by < params.convergence_tol {
            converged = true;
            iterations = iteration;
            break;
        }
    }
    let (transform, rmse, count) = best.expect("at least one iteration ran");
    Ok(AlignmentResult::new(
        transform, rmse, iterations, 0, converged, count,
    ))
}

/// Linearised point-to-plane similarity update for (point, plane point,
/// plane normal) triples: rotation, scale about the points' centroid and
/// translation.
fn plane_step(planes: &[(Point3<f64>, Point3<f64>, Vector3<f64>)]) -> Result<SimilarityTransform> {
    let n = planes.len() as f64;
    let c = planes
        .iter()
        .map(|(x, _, _)| x.coords)
        .sum::<Vector3<f64>>()
        / n;
    let mut jtj = SMatrix::<f64, 7, 7>::zeros();
    let mut jtr = SVector::<f64, 7>::zeros();
    for (x, q, normal) in planes {
        let a = x.coords - c;
        let w = a.cross(normal);
        let row = SVector::<f64, 7>::from_column_slice(&[
            w.x,
            w.y,
            w.z,
            a.dot(normal),
            normal.x,
            normal.y,
            normal.z,
        ]);
        let r = (x - q).dot(normal);
        jtj += row * row.transpose();
        jtr += row * r;
    }
    // light damping keeps directions the visible surface does not constrain still
    let damping = 1e-9 * jtj.trace() / 7.0;
    for k in 0..7 {
        jtj[(k, k)] += damping;
    }
    let delta = jtj.cholesky().ok_or(Error::NonFiniteUpdate)?.solve(&(-jtr));
    if !delta.iter().all(|v| v.is_finite()) || delta[3] <= -1.0 {
        return Err(Error::NonFiniteUpdate);
    }
    let rotation = UnitQuaternion::from_scaled_axis(Vector3::new(delta[0], delta[1], delta[2]));
    let scale = 1.0 + delta[3];
    let shift = Vector3::new(delta[4], delta[5], delta[6]);
    Ok(SimilarityTransform::new(
        scale,
        rotation,
        c + shift - scale * (rotation * c),
    ))
}

/// Unit normal of the plane through the `k` nearest neighbours of each point.
pub(crate) fn estimate_normals(
    points: &[Point3<f64>],
    index: &NnIndex,
    k: usize,
) -> Vec<Vector3<f64>> {
    points
        .iter()
        .map(|p| {
            let near = index.k_nearest(p, k);
            let pts: Vec<Vector3<f64>> = near.iter().map(|&(i, _)| points[i].coords).collect();
            let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
            let cov = pts.iter().fold(Matrix3::zeros(), |acc, v| {
                acc + (v - mean) * (v - mean).transpose()
            });
            let eig = cov.symmetric_eigen();
            let smallest = eig.eigenvalues.imin();
            eig.eigenvectors.column(smallest).into_owned()
        })
        .collect()
}

/// Similarity taking the first point of each pair onto the second: the
/// least-squares rotation with the symmetric scale `sqrt(var_y / var_x)`,
/// which unlike the one-sided estimate is not pulled down by noise in `x`.
fn umeyama(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<SimilarityTransform> {
    let n = pairs.len() as f64;
    let mu_x = pairs.iter().map(|(x, _)| x).sum::<Vector3<f64>>() / n;
    let mu_y = pairs.iter().map(|(_, y)| y).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let (mut var_x, mut var_y) = (0.0, 0.0);
    for (x, y) in pairs {
        let a = x - mu_x;
        let b = y - mu_y;
        cov += b * a.transpose();
        var_x += a.norm_squared();
        var_y += b.norm_squared();
    }
    let svd = cov.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NonFiniteUpdate);
    };
    let d = (u * v_t).determinant().signum();
    let sign = Vector3::new(1.0, 1.0, d);
    let r = u * Matrix3::from_diagonal(&sign) * v_t;
    let scale = (var_y / var_x).sqrt();
    if !(scale > 0.0 && scale.is_finite()) || !r.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteUpdate);
    }
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = mu_y - scale * (rotation * mu_x);
    if !translation.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteUpdate);
    }
    Ok(SimilarityTransform::new(scale, rotation, translation))
}
