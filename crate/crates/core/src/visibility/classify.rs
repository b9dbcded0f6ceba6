use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{CameraModel, DepthMap};
use crate::error::{Error, Result};
use crate::mesh::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMask {
    pub visible: Vec<bool>,
    pub epsilon: f64,
    /// Points behind the camera or projecting outside the image. They are
    /// counted as occluded in `visible`.
    pub outside_view: usize,
}

impl VisibilityMask {
    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn n_visible(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    /// Occluded points, including those outside the view.
    pub fn n_occluded(&self) -> usize {
        self.len() - self.n_visible()
    }

    pub fn occluded(&self) -> Vec<bool> {
        self.visible.iter().map(|v| !v).collect()
    }
}

/// Binary per-object image mask (true = object pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl ObjectMask {
    /// Reads a 0/255 PNG; any non-zero luma counts as set.
    pub fn load_png(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path).map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let luma = img.to_luma8();
        Ok(Self {
            width: luma.width(),
            height: luma.height(),
            data: luma.pixels().map(|p| p.0[0] > 0).collect(),
        })
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Camera depth and pixel of a world point on the grid of `camera`.
fn locate(
    camera_from_world: &crate::SimilarityTransform,
    camera: &CameraModel,
    p: &Point3<f64>,
) -> Option<(u32, u32, f64)> {
    let pc = camera_from_world.apply(p);
    let (u, v, z) = camera.project_camera_point(&pc)?;
    let (x, y) = camera.pixel_of(u, v)?;
    Some((x, y, z))
}

/// Visible iff in front of the camera, inside the image, and no deeper than
/// the rendered surface plus `epsilon`.
pub fn classify_visibility(
    points: &PointCloud,
    camera: &CameraModel,
    scene_depth: &DepthMap,
    epsilon: f64,
) -> VisibilityMask {
    let grid = camera.scaled(scene_depth.resolution_scale);
    debug_assert_eq!(
        (grid.width, grid.height),
        (scene_depth.width, scene_depth.height)
    );
    let camera_from_world = camera.camera_from_world();
    let mut outside_view = 0;
    let visible = points
        .points
        .iter()
        .map(|p| match locate(&camera_from_world, &grid, p) {
            Some((x, y, z)) => z <= scene_depth.at(x, y) + epsilon,
            None => {
                outside_view += 1;
                false
            }
        })
        .collect();
    VisibilityMask {
        visible,
        epsilon,
        outside_view,
    }
}

/// Dataset-mask variant: visible iff the point's pixel is set in `mask` and the
/// point passes the depth test against the object's own rendering (which
/// rejects its back side).
pub fn classify_with_mask(
    points: &PointCloud,
    camera: &CameraModel,
    object_depth: &DepthMap,
    mask: &ObjectMask,
    epsilon: f64,
) -> Result<VisibilityMask> {
    if (mask.width, mask.height) != (camera.width, camera.height) {
        return Err(Error::InvalidArgument(format!(
            "mask is {}x{}, camera is {}x{}",
            mask.width, mask.height, camera.width, camera.height
        )));
    }
    let by_depth = classify_visibility(points, camera, object_depth, epsilon);
    let camera_from_world = camera.camera_from_world();
    let visible = points
        .points
        .iter()
        .zip(&by_depth.visible)
        .map(|(p, &vis)| {
            vis && locate(&camera_from_world, camera, p).is_some_and(|(x, y, _)| mask.at(x, y))
        })
        .collect();
    Ok(VisibilityMask {
        visible,
        epsilon,
        outside_view: by_depth.outside_view,
    })
}
