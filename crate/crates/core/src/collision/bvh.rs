use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Aabb, TriangleMesh};
use crate::transform::SimilarityTransform;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    /// Leaf: range into `order`. Inner: children indices.
    kind: NodeKind,
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Leaf { start: u32, end: u32 },
    Inner { left: u32, right: u32 },
}

/// Bounding-volume hierarchy over the triangles of a mesh, in the coordinates
/// the mesh was built in.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Point3<f64>; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Closest ray intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
    pub point: Point3<f64>,
    /// Geometric normal of the hit face (winding order, unit length).
    pub normal: Vector3<f64>,
}

pub fn build_bvh(mesh: &TriangleMesh) -> Result<Bvh> {
    Bvh::build(mesh)
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        Self::from_triangles((0..mesh.n_faces()).map(|f| mesh.triangle(f)).collect())
    }

    /// BVH of the mesh after applying `pose`.
    pub fn build_posed(mesh: &TriangleMesh, pose: &SimilarityTransform) -> Result<Self> {
        Self::from_triangles(
            (0..mesh.n_faces())
                .map(|f| mesh.triangle(f).map(|p| pose.apply(&p)))
                .collect(),
        )
    }

    pub fn from_triangles(triangles: Vec<[Point3<f64>; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter()))
            .collect();
        let centers: Vec<Point3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        build_node(&boxes, &centers, &mut order, 0, triangles.len(), &mut nodes);
        Ok(Self {
            triangles,
            order,
            nodes,
        })
    }

    pub fn root_aabb(&self) -> Aabb {
        self.nodes[0].bbox
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> &[Point3<f64>; 3] {
        &self.triangles[face]
    }

    /// Faces in leaf order, visiting every leaf once.
    pub fn traverse_all(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize].kind {
                NodeKind::Leaf { start, end } => out.extend(
                    self.order[start as usize..end as usize]
                        .iter()
                        .map(|&i| i as usize),
                ),
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Faces whose bounding boxes overlap `query`.
    pub fn query_aabb(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !node.bbox.overlaps(query) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        if Aabb::from_points(self.triangles[i as usize].iter()).overlaps(query) {
                            out.push(i as usize);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Pairs `(face in self, face in other)` whose leaf boxes overlap.
    pub fn candidate_pairs(&self, other: &Bvh) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0u32, 0u32)];
        while let Some((a, b)) = stack.pop() {
            let na = &self.nodes[a as usize];
            let nb = &other.nodes[b as usize];
            if !na.bbox.overlaps(&nb.bbox) {
                continue;
            }
            match (na.kind, nb.kind) {
                (NodeKind::Leaf { start: sa, end: ea }, NodeKind::Leaf { start: sb, end: eb }) => {
                    for &i in &self.order[sa as usize..ea as usize] {
                        for &j in &other.order[sb as usize..eb as usize] {
                            out.push((i as usize, j as usize));
                        }
                    }
                }
                (NodeKind::Leaf { .. }, NodeKind::Inner { left, right }) => {
                    stack.push((a, left));
                    stack.push((a, right));
                }
                (NodeKind::Inner { left, right }, NodeKind::Leaf { .. }) => {
                    stack.push((left, b));
                    stack.push((right, b));
                }
                (
                    NodeKind::Inner {
                        left: la,
                        right: ra,
                    },
                    NodeKind::Inner {
                        left: lb,
                        right: rb,
                    },
                ) => {
                    // descend the larger box first
                    if na.bbox.extents().norm_squared() >= nb.bbox.extents().norm_squared() {
                        stack.push((la, b));
                        stack.push((ra, b));
                    } else {
                        stack.push((a, lb));
                        stack.push((a, rb));
                    }
                }
            }
        }
        out
    }

    /// Nearest intersection of the ray `origin + t·dir`, `t ∈ [t_min, t_max]`.
    /// Ties resolve to the lowest face index.
    pub fn ray_cast(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<RayHit> {
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bbox.ray_hit(origin, &inv, limit).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        let Some(t) = ray_triangle(origin, dir, &self.triangles[i as usize]) else {
                            continue;
                        };
                        if t < t_min || t > limit {
                            continue;
                        }
                        let i = i as usize;
                        if best.is_none_or(|(bt, bi)| t < bt || (t == bt && i < bi)) {
                            best = Some((t, i));
                            limit = t;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.map(|(t, face)| {
            let [a, b, c] = self.triangles[face];
            RayHit {
                t,
                face,
                point: origin + dir * t,
                normal: (b - a).cross(&(c - a)).normalize(),
            }
        })
    }
}

/// Möller–Trumbore; returns the ray parameter of the hit (either side).
pub fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    tri: &[Point3<f64>; 3],
) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&h) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv_det)
}

fn build_node(
    boxes: &[Aabb],
    centers: &[Point3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let slice = &mut order[start..end];
    let bbox = slice
        .iter()
        .fold(Aabb::empty(), |b, &i| b.union(&boxes[i as usize]));
    let id = nodes.len() as u32;
    nodes.push(Node {
        bbox,
        kind: NodeKind::Leaf {
            start: start as u32,
            end: end as u32,
        },
    });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let spread = Aabb::from_points(slice.iter().map(|&i| &centers[i as usize])).extents();
    let axis = if spread.x >= spread.y && spread.x >= spread.z {
        0
    } else if spread.y >= spread.z {
        1
    } else {
        2
    };
    let mid = (end - start) / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centers[a as usize][axis]
            .total_cmp(&centers[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = build_node(boxes, centers, order, start, start + mid, nodes);
    let right = build_node(boxes, centers, order, start + mid, end, nodes);
    nodes[id as usize].kind = NodeKind::Inner { left, right };
    id
}
