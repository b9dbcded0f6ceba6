use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::SimilarityTransform;

/// Pinhole camera. Camera frame: z forward, x right, y down.
///
/// Pixel `(i, j)` covers `u ∈ [i, i+1)`, `v ∈ [j, j+1)`; its centre is `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub world_from_camera: SimilarityTransform,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        world_from_camera: SimilarityTransform,
    ) -> Result<Self> {
        let camera = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            world_from_camera,
        };
        camera.validate()?;
        Ok(camera)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("camera: {m}")));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if !(self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64)
        {
            return bad("principal point must lie inside the image");
        }
        if !self.world_from_camera.is_rigid() {
            return bad("world_from_camera must have unit scale");
        }
        Ok(())
    }

    /// Same optics sampled on a grid scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> CameraModel {
        let width = ((self.width as f64 * factor).round() as u32).max(1);
        let height = ((self.height as f64 * factor).round() as u32).max(1);
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        CameraModel {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            world_from_camera: self.world_from_camera,
        }
    }

    #[inline]
    pub fn camera_from_world(&self) -> SimilarityTransform {
        self.world_from_camera.inverse()
    }

    /// Image coordinates `(u, v)` and camera depth of a camera-frame point.
    /// `None` when the point is not in front of the camera.
    #[inline]
    pub fn project_camera_point(&self, p: &Point3<f64>) -> Option<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    #[inline]
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some((u as u32, v as u32))
        } else {
            None
        }
    }

    /// Camera-frame ray direction (z = 1) through image coordinates `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_intrinsics() {
        let id = SimilarityTransform::identity();
        assert!(CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480, id).is_ok());
        assert!(CameraModel::new(0.0, 500.0, 320.0, 240.0, 640, 480, id).is_err());
        assert!(CameraModel::new(500.0, 500.0, 640.0, 240.0, 640, 480, id).is_err());
        assert!(CameraModel::new(
            500.0,
            500.0,
            320.0,
            240.0,
            640,
            480,
            SimilarityTransform::from_scale(2.0)
        )
        .is_err());
    }

    #[test]
    fn projects_principal_axis_to_principal_point() {
        let cam = CameraModel::new(
            500.0,
            400.0,
            320.5,
            240.5,
            640,
            480,
            SimilarityTransform::identity(),
        )
        .unwrap();
        let (u, v, z) = cam
            .project_camera_point(&Point3::new(0.0, 0.0, 2.0))
            .unwrap();
        assert_eq!((u, v, z), (320.5, 240.5, 2.0));
        assert_eq!(cam.pixel_of(u, v), Some((320, 240)));
        assert!(cam
            .project_camera_point(&Point3::new(0.0, 0.0, -1.0))
            .is_none());
        let half = cam.scaled(0.5);
        assert_eq!((half.width, half.height), (320, 240));
        assert_eq!(half.fx, 250.0);
    }
}
