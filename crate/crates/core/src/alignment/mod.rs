//! Similarity registration of a reconstruction onto ground truth.

mod icp;
mod multistart;
mod rotations;
mod scale;
mod symmetry;

use serde::{Deserialize, Serialize};

use crate::transform::SimilarityTransform;

pub use icp::{icp_refine, IcpParams};
pub use multistart::{
    masked_icp, multistart_align, multistart_align_traced, AlignmentParams, StartRecord,
};
pub use rotations::{min_pairwise_angle, sample_unit_quaternions};
pub use scale::{estimate_scale, principal_stddevs};
pub use symmetry::{symmetry_flip_correction, SymmetryAxis, SymmetryFlip, SymmetrySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Maps reconstruction coordinates into the ground-truth frame.
    pub transform: SimilarityTransform,
    /// Root-mean-square nearest-neighbour distance (m) of the used points.
    pub rmse: f64,
    pub n_iterations: usize,
    pub start_index: usize,
    pub converged: bool,
    /// Reconstruction points the RMSE was computed over.
    pub n_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip: Option<SymmetryFlip>,
}

impl AlignmentResult {
    pub fn new(
        transform: SimilarityTransform,
        rmse: f64,
        n_iterations: usize,
        start_index: usize,
        converged: bool,
        n_points: usize,
    ) -> Self {
        Self {
            transform,
            rmse,
            n_iterations,
            start_index,
            converged,
            n_points,
            flip: None,
        }
    }
}
