//! Mesh–mesh collision detection for posed objects.

mod bvh;
mod tritri;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::TriangleMesh;
use crate::transform::SimilarityTransform;

pub use bvh::{build_bvh, ray_triangle, Bvh, RayHit};
pub use tritri::triangles_intersect;

/// Default distance (m) below which contact is not a collision.
pub const DEFAULT_CONTACT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionResult {
    pub in_collision: bool,
    pub intersecting_triangle_pairs: usize,
    /// Largest triangle–plane overlap among the intersecting pairs (m).
    pub max_penetration_estimate: Option<f64>,
}

impl CollisionResult {
    fn from_pairs(penetrations: impl IntoIterator<Item = f64>) -> Self {
        let mut count = 0;
        let mut max: Option<f64> = None;
        for d in penetrations {
            count += 1;
            max = Some(max.map_or(d, |m| m.max(d)));
        }
        Self {
            in_collision: count > 0,
            intersecting_triangle_pairs: count,
            max_penetration_estimate: max,
        }
    }
}

/// Collision between two meshes placed by their poses.
pub fn mesh_pair_collision(
    a: &TriangleMesh,
    pose_a: &SimilarityTransform,
    b: &TriangleMesh,
    pose_b: &SimilarityTransform,
    contact_epsilon: f64,
) -> Result<CollisionResult> {
    let ba = Bvh::build_posed(a, pose_a)?;
    let bb = Bvh::build_posed(b, pose_b)?;
    Ok(bvh_pair_collision(&ba, &bb, contact_epsilon))
}

/// Collision between two BVHs built in a common frame.
pub fn bvh_pair_collision(a: &Bvh, b: &Bvh, contact_epsilon: f64) -> CollisionResult {
    CollisionResult::from_pairs(
        a.candidate_pairs(b).into_iter().filter_map(|(i, j)| {
            triangles_intersect(a.triangle(i), b.triangle(j), contact_epsilon)
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCollisionReport {
    /// Symmetric; the diagonal is collision-free by definition.
    pub pairs: Vec<Vec<CollisionResult>>,
    pub object_in_collision: Vec<bool>,
    pub n_objects_in_collision: usize,
    pub n_objects_total: usize,
    pub n_colliding_pairs: usize,
}

/// All-pairs collision report. Objects are compared pairwise only; there is
/// no support plane.
pub fn scene_collision_report(
    objects: &[(&TriangleMesh, SimilarityTransform)],
    contact_epsilon: f64,
) -> Result<SceneCollisionReport> {
    let bvhs = objects
        .par_iter()
        .map(|(mesh, pose)| Bvh::build_posed(mesh, pose))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_bvhs(&bvhs, contact_epsilon))
}

pub fn report_from_bvhs(bvhs: &[Bvh], contact_epsilon: f64) -> SceneCollisionReport {
    let n = bvhs.len();
    let index_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results: Vec<CollisionResult> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            if bvhs[i].root_aabb().overlaps(&bvhs[j].root_aabb()) {
                bvh_pair_collision(&bvhs[i], &bvhs[j], contact_epsilon)
            } else {
                CollisionResult::default()
            }
        })
        .collect();
    let mut pairs = vec![vec![CollisionResult::default(); n]; n];
    let mut object_in_collision = vec![false; n];
    let mut n_colliding_pairs = 0;
    for (&(i, j), r) in index_pairs.iter().zip(results) {
        pairs[i][j] = r;
        pairs[j][i] = r;
        if r.in_collision {
            object_in_collision[i] = true;
            object_in_collision[j] = true;
            n_colliding_pairs += 1;
        }
    }
    SceneCollisionReport {
        n_objects_in_collision: object_in_collision.iter().filter(|&&c| c).count(),
        n_objects_total: n,
        n_colliding_pairs,
        object_in_collision,
        pairs,
    }
}
