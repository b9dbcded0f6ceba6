use serde::{Deserialize, Serialize};

use super::{classify_visibility, CameraModel, DepthMap, VisibilityMask};
use crate::error::Result;
use crate::mesh::{NnIndex, PointCloud};
use crate::transform::SimilarityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyPartition {
    NoVisible,
    NoOccluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSplit {
    /// Mean distance from visible gt points to the aligned reconstruction (m).
    pub visible_cd: Option<f64>,
    pub occluded_cd: Option<f64>,
    /// Relative degradation of the occluded part; see [`occlusion_ratio`].
    pub ratio: Option<f64>,
    pub n_visible: usize,
    pub n_occluded: usize,
    pub n_outside_view: usize,
    pub empty_partition: Option<EmptyPartition>,
}

/// `(occluded − visible) / max(visible, floor)`.
///
/// With `floor = 0` this is `occluded/visible − 1`; the floor keeps the value
/// finite when the visible part is reconstructed (near) perfectly. Both zero
/// gives 0. Returns `None` only for a zero floor with a zero visible error and
/// a non-zero occluded error.
pub fn occlusion_ratio(visible_cd: f64, occluded_cd: f64, floor: f64) -> Option<f64> {
    if visible_cd == 0.0 && occluded_cd == 0.0 {
        return Some(0.0);
    }
    let denom = visible_cd.max(floor);
    (denom > 0.0).then(|| (occluded_cd - visible_cd) / denom)
}

/// Partitions `gt` (scene frame) by visibility from `camera` and measures the
/// gt→recon directed Chamfer on each part, with `recon` mapped by `alignment`.
pub fn occlusion_split_chamfer(
    recon: &PointCloud,
    gt: &PointCloud,
    alignment: &SimilarityTransform,
    camera: &CameraModel,
    scene_depth: &DepthMap,
    epsilon: f64,
    cd_floor: f64,
) -> Result<OcclusionSplit> {
    let mask = classify_visibility(gt, camera, scene_depth, epsilon);
    occlusion_split_with_mask(&recon.transformed(alignment), gt, &mask, cd_floor)
}

/// Same as [`occlusion_split_chamfer`] with an explicit mask and an already
/// aligned reconstruction.
pub fn occlusion_split_with_mask(
    recon_aligned: &PointCloud,
    gt: &PointCloud,
    mask: &VisibilityMask,
    cd_floor: f64,
) -> Result<OcclusionSplit> {
    assert_eq!(
        mask.len(),
        gt.len(),
        "mask cardinality must match the gt cloud"
    );
    let index = NnIndex::build(recon_aligned)?;
    let (mut sum_vis, mut sum_occ) = (0.0, 0.0);
    let (mut n_vis, mut n_occ) = (0usize, 0usize);
    for (p, &vis) in gt.points.iter().zip(&mask.visible) {
        let d = index.nearest_distance(p);
        if vis {
            sum_vis += d;
            n_vis += 1;
        } else {
            sum_occ += d;
            n_occ += 1;
        }
    }
    let visible_cd = (n_vis > 0).then(|| sum_vis / n_vis as f64);
    let occluded_cd = (n_occ > 0).then(|| sum_occ / n_occ as f64);
    let empty_partition = match (visible_cd, occluded_cd) {
        (None, _) => Some(EmptyPartition::NoVisible),
        (_, None) => Some(EmptyPartition::NoOccluded),
        _ => None,
    };
    let ratio = match (visible_cd, occluded_cd) {
        (Some(v), Some(o)) => occlusion_ratio(v, o, cd_floor),
        _ => None,
    };
    Ok(OcclusionSplit {
        visible_cd,
        occluded_cd,
        ratio,
        n_visible: n_vis,
        n_occluded: n_occ,
        n_outside_view: mask.outside_view,
        empty_partition,
    })
}
