//! Triangle meshes, point clouds and the measurements defined on them.

mod chamfer;
mod io;
mod mass;
mod nn;
mod sampling;

pub use chamfer::{chamfer_distance, directed_distances, ChamferResult};
pub use io::{load_mesh, save_obj, MeshFormat};
pub use mass::{center_of_mass, mass_properties, CenterOfMass, MassProperties};
pub use nn::NnIndex;
pub use sampling::{sample_surface, DEFAULT_SAMPLE_COUNT};

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::SimilarityTransform;

/// Faces with area below this (m²) are dropped on construction.
pub const DEGENERATE_FACE_AREA: f64 = 1e-12;

/// Indexed triangle surface. Lengths are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    normals: Option<Vec<Vector3<f64>>>,
    dropped_faces: usize,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        Self::with_normals(vertices, faces, None)
    }

    pub fn with_normals(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        normals: Option<Vec<Vector3<f64>>>,
    ) -> Result<Self> {
        let n_vertices = vertices.len();
        for (fi, face) in faces.iter().enumerate() {
            for &index in face {
                if index as usize >= n_vertices {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: index as usize,
                        n_vertices,
                    });
                }
            }
        }
        let normals = normals.filter(|n| n.len() == n_vertices);
        let total = faces.len();
        let faces: Vec<[u32; 3]> = faces
            .into_iter()
            .filter(|f| triangle_area(&vertices, f) >= DEGENERATE_FACE_AREA)
            .collect();
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let dropped_faces = total - faces.len();
        Ok(Self {
            vertices,
            faces,
            normals,
            dropped_faces,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    /// Number of faces removed as degenerate when the mesh was built.
    pub fn dropped_faces(&self) -> usize {
        self.dropped_faces
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        triangle_area(&self.vertices, &self.faces[face])
    }

    /// Unit normal following the face winding.
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(
            self.faces
                .iter()
                .flatten()
                .map(|&i| &self.vertices[i as usize]),
        )
    }

    /// Every undirected edge is shared by exactly two faces traversing it in
    /// opposite directions.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            faces: self.faces.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_direction(n)).collect()),
            dropped_faces: self.dropped_faces,
        }
    }

    /// Multiplies every coordinate by `factor` (unit conversion).
    pub fn scaled(&self, factor: f64) -> TriangleMesh {
        self.transformed(&SimilarityTransform::from_scale(factor))
    }

    /// Concatenates meshes into one surface; face indices are rebased.
    pub fn merge<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            faces.extend(
                m.faces
                    .iter()
                    .map(|f| [f[0] + base, f[1] + base, f[2] + base]),
            );
        }
        TriangleMesh::new(vertices, faces)
    }

    pub fn vertex_centroid(&self) -> Point3<f64> {
        centroid(&self.vertices)
    }
}

fn triangle_area(vertices: &[Point3<f64>], f: &[u32; 3]) -> f64 {
    let a = vertices[f[0] as usize];
    let b = vertices[f[1] as usize];
    let c = vertices[f[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Sampled surface points with optional unit normals and source faces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<Vector3<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_ids: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            normals: None,
            face_ids: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3<f64> {
        centroid(&self.points)
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_direction(n)).collect()),
            face_ids: self.face_ids.clone(),
        }
    }

    /// Keeps the points whose `keep` flag is set, preserving order.
    pub fn select(&self, keep: &[bool]) -> PointCloud {
        debug_assert_eq!(keep.len(), self.points.len());
        let pick = |i: usize| keep[i];
        PointCloud {
            points: (0..self.len())
                .filter(|&i| pick(i))
                .map(|i| self.points[i])
                .collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| (0..ns.len()).filter(|&i| pick(i)).map(|i| ns[i]).collect()),
            face_ids: self
                .face_ids
                .as_ref()
                .map(|fs| (0..fs.len()).filter(|&i| pick(i)).map(|i| fs[i]).collect()),
        }
    }

    /// Every `stride`-th point starting at 0, so that at most `max_points` remain.
    pub fn strided(&self, max_points: usize) -> PointCloud {
        if max_points == 0 || self.len() <= max_points {
            return self.clone();
        }
        let stride = self.len().div_ceil(max_points);
        let keep: Vec<bool> = (0..self.len()).map(|i| i % stride == 0).collect();
        self.select(&keep)
    }

    pub fn concat(clouds: &[&PointCloud]) -> PointCloud {
        PointCloud::from_points(
            clouds
                .iter()
                .flat_map(|c| c.points.iter().copied())
                .collect(),
        )
    }
}

pub(crate) fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    if points.is_empty() {
        return Point3::origin();
    }
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    #[inline]
    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    #[inline]
    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    #[inline]
    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
            && self.min.z <= other.max.z
            && other.min.z <= self.max.z
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    /// Slab test; returns the entry parameter if the ray hits within `[0, t_max]`.
    #[inline]
    pub fn ray_hit(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // f64::max/min ignore the NaN produced by 0 * inf (ray inside the slab plane).
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}
