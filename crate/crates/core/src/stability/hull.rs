//! 3D convex hull (incremental) and 2D hull (monotone chain).

use std::collections::HashSet;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::Aabb;

#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub points: Vec<Point3<f64>>,
    /// Outward-wound triangles indexing `points`.
    pub faces: Vec<[usize; 3]>,
}

impl ConvexHull {
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f].map(|i| self.points[i]);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Indices of points that are hull vertices, ascending.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn convex_hull(points: &[Point3<f64>]) -> Result<ConvexHull> {
    if points.len() < 4 {
        return Err(Error::DegenerateHull);
    }
    let diag = Aabb::from_points(points.iter()).extents().norm();
    let eps = 1e-10 * diag.max(f64::MIN_POSITIVE);

    // initial tetrahedron from extreme points
    let p0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let p1 = farthest(points, |p| (p - points[p0]).norm());
    let line = points[p1] - points[p0];
    if line.norm() <= eps {
        return Err(Error::DegenerateHull);
    }
    let dir = line.normalize();
    let p2 = farthest(points, |p| {
        let d = p - points[p0];
        (d - dir * d.dot(&dir)).norm()
    });
    let n = line.cross(&(points[p2] - points[p0]));
    if n.norm() <= eps * line.norm() {
        return Err(Error::DegenerateHull);
    }
    let n = n.normalize();
    let p3 = farthest(points, |p| (p - points[p0]).dot(&n).abs());
    if (points[p3] - points[p0]).dot(&n).abs() <= eps {
        return Err(Error::DegenerateHull);
    }

    let inside = Point3::from(
        (points[p0].coords + points[p1].coords + points[p2].coords + points[p3].coords) / 4.0,
    );
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for f in [[p0, p1, p2], [p0, p1, p3], [p0, p2, p3], [p1, p2, p3]] {
        faces.push(orient_outward(points, f, &inside));
    }
    let mut planes: Vec<(Vector3<f64>, f64)> = faces.iter().map(|f| plane(points, f)).collect();

    for (i, p) in points.iter().enumerate() {
        if [p0, p1, p2, p3].contains(&i) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| planes[f].0.dot(&p.coords) - planes[f].1 > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let edges: HashSet<(usize, usize)> = visible
            .iter()
            .flat_map(|&f| {
                let [a, b, c] = faces[f];
                [(a, b), (b, c), (c, a)]
            })
            .collect();
        let mut horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        horizon.sort_unstable();
        let mut keep = vec![true; faces.len()];
        for &f in &visible {
            keep[f] = false;
        }
        let mut k = 0;
        faces.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        let mut k = 0;
        planes.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        for (a, b) in horizon {
            let f = [a, b, i];
            planes.push(plane(points, &f));
            faces.push(f);
        }
    }
    Ok(ConvexHull {
        points: points.to_vec(),
        faces,
    })
}

fn farthest(points: &[Point3<f64>], key: impl Fn(&Point3<f64>) -> f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = key(p);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn plane(points: &[Point3<f64>], f: &[usize; 3]) -> (Vector3<f64>, f64) {
    let [a, b, c] = f.map(|i| points[i]);
    let n = (b - a).cross(&(c - a)).normalize();
    (n, n.dot(&a.coords))
}

fn orient_outward(points: &[Point3<f64>], f: [usize; 3], inside: &Point3<f64>) -> [usize; 3] {
    let (n, d) = plane(points, &f);
    if n.dot(&inside.coords) - d > 0.0 {
        [f[0], f[2], f[1]]
    } else {
        f
    }
}

/// Counter-clockwise convex hull without collinear points.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Signed distance from `p` to the boundary of a CCW convex polygon:
/// positive inside, negative outside.
pub fn polygon_margin(poly: &[[f64; 2]], p: [f64; 2]) -> f64 {
    if poly.len() < 3 {
        return f64::NEG_INFINITY;
    }
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / len
        })
        .fold(f64::INFINITY, f64::min)
}
