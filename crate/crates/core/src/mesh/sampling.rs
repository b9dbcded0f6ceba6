use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

/// Area-weighted uniform surface sampling.
///
/// A face is drawn with probability proportional to its area and the point is
/// placed with uniform barycentric coordinates (square-root warp). Normals are
/// the face normals. The output depends only on the mesh and `seed`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.n_faces());
    let mut total = 0.0;
    for f in 0..mesh.n_faces() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::EmptyMesh);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut face_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let face = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (u, v, w) = (1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = mesh.triangle(face);
        points.push(nalgebra::Point3::from(
            a.coords * u + b.coords * v + c.coords * w,
        ));
        normals.push(mesh.face_normal(face));
        face_ids.push(face as u32);
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        face_ids: Some(face_ids),
    })
}
