//! Z-buffer rasterization of posed triangle meshes into a depth map.

use nalgebra::Point3;

use super::CameraModel;
use crate::mesh::TriangleMesh;
use crate::transform::SimilarityTransform;

/// Triangles are clipped against this camera-frame depth (m).
const NEAR_PLANE: f64 = 1e-4;

/// Per-pixel camera depth (m); `f64::INFINITY` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    /// Grid scale relative to the camera the map was rendered for.
    pub resolution_scale: f64,
}

impl DepthMap {
    pub fn empty(width: u32, height: u32, resolution_scale: f64) -> Self {
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width as usize * height as usize],
            resolution_scale,
        }
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.depth[y as usize * self.width as usize + x as usize]
    }

    pub fn hit_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Renders the nearest-surface camera depth of every posed mesh.
///
/// Back faces are not culled. Depth is interpolated perspective-correctly at
/// pixel centres; edges are inclusive.
pub fn render_depth(
    scene: &[(&TriangleMesh, SimilarityTransform)],
    camera: &CameraModel,
    resolution_scale: f64,
) -> DepthMap {
    let cam = camera.scaled(resolution_scale);
    let mut map = DepthMap::empty(cam.width, cam.height, resolution_scale);
    let camera_from_world = cam.camera_from_world();
    for (mesh, pose) in scene {
        let to_camera = camera_from_world.compose(pose);
        let verts: Vec<Point3<f64>> = mesh.vertices().iter().map(|v| to_camera.apply(v)).collect();
        for face in mesh.faces() {
            let tri = face.map(|i| verts[i as usize]);
            for clipped in clip_near(&tri) {
                rasterize(&clipped, &cam, &mut map);
            }
        }
    }
    map
}

/// Sutherland–Hodgman against `z >= NEAR_PLANE`, fan-triangulated.
fn clip_near(tri: &[Point3<f64>; 3]) -> Vec<[Point3<f64>; 3]> {
    if tri.iter().all(|p| p.z >= NEAR_PLANE) {
        return vec![*tri];
    }
    if tri.iter().all(|p| p.z < NEAR_PLANE) {
        return Vec::new();
    }
    let mut poly: Vec<Point3<f64>> = Vec::with_capacity(4);
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            poly.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            poly.push(a + (b - a) * t);
        }
    }
    (1..poly.len().saturating_sub(1))
        .map(|k| [poly[0], poly[k], poly[k + 1]])
        .collect()
}

fn rasterize(tri: &[Point3<f64>; 3], cam: &CameraModel, map: &mut DepthMap) {
    let mut screen = [(0.0, 0.0); 3];
    let mut inv_z = [0.0; 3];
    for k in 0..3 {
        let p = &tri[k];
        screen[k] = (cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
        inv_z[k] = 1.0 / p.z;
    }
    let edge = |a: (f64, f64), b: (f64, f64), px: f64, py: f64| {
        (b.0 - a.0) * (py - a.1) - (b.1 - a.1) * (px - a.0)
    };
    let area = edge(screen[0], screen[1], screen[2].0, screen[2].1);
    if area.abs() < 1e-18 {
        return;
    }
    let min_u = screen.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_u = screen.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let min_v = screen.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let max_v = screen.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    // pixel i has its centre at i + 0.5
    let x0 = (min_u - 0.5).ceil().max(0.0);
    let x1 = (max_u - 0.5).floor().min(map.width as f64 - 1.0);
    let y0 = (min_v - 0.5).ceil().max(0.0);
    let y1 = (max_v - 0.5).floor().min(map.height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let inv_area = 1.0 / area;
    for y in y0 as u32..=y1 as u32 {
        let py = y as f64 + 0.5;
        for x in x0 as u32..=x1 as u32 {
            let px = x as f64 + 0.5;
            let l0 = edge(screen[1], screen[2], px, py) * inv_area;
            let l1 = edge(screen[2], screen[0], px, py) * inv_area;
            let l2 = edge(screen[0], screen[1], px, py) * inv_area;
            if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                continue;
            }
            let w = l0 * inv_z[0] + l1 * inv_z[1] + l2 * inv_z[2];
            if w <= 0.0 {
                continue;
            }
            let z = 1.0 / w;
            let slot = &mut map.depth[y as usize * map.width as usize + x as usize];
            if z < *slot {
                *slot = z;
            }
        }
    }
}
