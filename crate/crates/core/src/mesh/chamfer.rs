use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{NnIndex, PointCloud};
use crate::error::{Error, Result};

/// Directed and symmetric mean nearest-neighbour ℓ2 distances (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamferResult {
    pub mean_recon_to_gt: f64,
    pub mean_gt_to_recon: f64,
    /// `0.5 * (mean_recon_to_gt + mean_gt_to_recon)`
    pub symmetric: f64,
    #[serde(default, skip_serializing)]
    pub per_point_recon_to_gt: Vec<f64>,
}

/// Distance from every query point to its nearest neighbour in `index`.
pub fn directed_distances(queries: &[Point3<f64>], index: &NnIndex) -> Vec<f64> {
    queries.iter().map(|q| index.nearest_distance(q)).collect()
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn chamfer_distance(recon: &PointCloud, gt: &PointCloud) -> Result<ChamferResult> {
    if recon.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let gt_index = NnIndex::build(gt)?;
    let recon_index = NnIndex::build(recon)?;
    let per_point_recon_to_gt = directed_distances(&recon.points, &gt_index);
    let gt_to_recon = directed_distances(&gt.points, &recon_index);
    let mean_recon_to_gt = mean(&per_point_recon_to_gt);
    let mean_gt_to_recon = mean(&gt_to_recon);
    Ok(ChamferResult {
        mean_recon_to_gt,
        mean_gt_to_recon,
        symmetric: 0.5 * (mean_recon_to_gt + mean_gt_to_recon),
        per_point_recon_to_gt,
    })
}
