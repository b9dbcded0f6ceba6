//! Pinhole camera, depth rasterization, and point visibility.

mod camera;
mod classify;
mod raster;
mod split;

pub use camera::CameraModel;
pub use classify::{classify_visibility, classify_with_mask, ObjectMask, VisibilityMask};
pub use raster::{render_depth, DepthMap};
pub use split::{
    occlusion_ratio, occlusion_split_chamfer, occlusion_split_with_mask, EmptyPartition,
    OcclusionSplit,
};

/// Default depth-test slack (m).
pub const DEFAULT_EPSILON: f64 = 0.002;
