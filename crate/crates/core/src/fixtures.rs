//! Synthetic meshes used by tests, benchmarks and the loopback dataset.
//!
//! All solids are closed, consistently wound (outward normals) and centred on
//! the origin unless stated otherwise.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mesh::TriangleMesh;

fn build(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("fixture mesh is valid")
}

/// Axis-aligned box with the given full extents.
pub fn cuboid(x: f64, y: f64, z: f64) -> TriangleMesh {
    let (hx, hy, hz) = (x / 2.0, y / 2.0, z / 2.0);
    let vertices = vec![
        Point3::new(-hx, -hy, -hz),
        Point3::new(hx, -hy, -hz),
        Point3::new(hx, hy, -hz),
        Point3::new(-hx, hy, -hz),
        Point3::new(-hx, -hy, hz),
        Point3::new(hx, -hy, hz),
        Point3::new(hx, hy, hz),
        Point3::new(-hx, hy, hz),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    build(vertices, faces)
}

pub fn cube(side: f64) -> TriangleMesh {
    cuboid(side, side, side)
}

/// Extrudes a counter-clockwise simple polygon along z, centred on z = 0.
/// `fan_root` must see every polygon vertex (star-shaped polygon).
pub fn extrude(polygon: &[[f64; 2]], height: f64, fan_root: usize) -> TriangleMesh {
    let n = polygon.len();
    let h = height / 2.0;
    let mut vertices: Vec<Point3<f64>> = polygon
        .iter()
        .map(|p| Point3::new(p[0], p[1], -h))
        .collect();
    vertices.extend(polygon.iter().map(|p| Point3::new(p[0], p[1], h)));
    let mut faces = Vec::new();
    let r = fan_root as u32;
    for k in 1..n - 1 {
        let b = ((fan_root + k) % n) as u32;
        let c = ((fan_root + k + 1) % n) as u32;
        // bottom cap faces down, top cap up
        faces.push([r, c, b]);
        faces.push([r + n as u32, b + n as u32, c + n as u32]);
    }
    for k in 0..n as u32 {
        let j = (k + 1) % n as u32;
        let nn = n as u32;
        faces.push([k, j, j + nn]);
        faces.push([k, j + nn, k + nn]);
    }
    build(vertices, faces)
}

/// L-shaped prism: a `2s × 2s` square with one `s × s` quadrant removed, extruded by `s`.
pub fn l_solid(s: f64) -> TriangleMesh {
    let polygon = [
        [0.0, 0.0],
        [2.0 * s, 0.0],
        [2.0 * s, s],
        [s, s],
        [s, 2.0 * s],
        [0.0, 2.0 * s],
    ];
    // centre the footprint's bounding box on the origin
    let shifted: Vec<[f64; 2]> = polygon.iter().map(|p| [p[0] - s, p[1] - s]).collect();
    extrude(&shifted, s, 3)
}

/// Closed cylinder along z.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let polygon: Vec<[f64; 2]> = (0..segments)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / segments as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    extrude(&polygon, height, 0)
}

/// Mug-like solid: closed cylinder (r 4 cm, h 10 cm) with a bracket handle on +x.
pub fn mug() -> TriangleMesh {
    let body = cylinder(0.04, 0.10, 32);
    let t = |m: TriangleMesh, x: f64, z: f64| {
        m.transformed(&crate::SimilarityTransform::from_translation(Vector3::new(
            x, 0.0, z,
        )))
    };
    // arms reach 3 mm into the body wall so the parts overlap
    let upper = t(cuboid(0.033, 0.012, 0.01), 0.0535, 0.03);
    let lower = t(cuboid(0.033, 0.012, 0.01), 0.0535, -0.03);
    let grip = t(cuboid(0.01, 0.012, 0.07), 0.065, 0.0);
    TriangleMesh::merge([&body, &upper, &lower, &grip]).expect("mug parts")
}

/// Icosahedron subdivided `level` times and projected onto a sphere.
pub fn icosphere(radius: f64, level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(
        vertices.iter().map(|v| Point3::from(v * radius)).collect(),
        faces,
    )
}

/// Open upper hemisphere (z ≥ 0) without a cap; `level` controls tessellation.
pub fn hemisphere_shell(radius: f64, level: u32) -> TriangleMesh {
    let n_lat = 8 * level.max(1) as usize;
    let n_lon = 4 * n_lat;
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..=n_lat {
        let polar = PI / 2.0 * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            let az = 2.0 * PI * j as f64 / n_lon as f64;
            vertices.push(Point3::new(
                radius * polar.sin() * az.cos(),
                radius * polar.sin() * az.sin(),
                radius * polar.cos(),
            ));
        }
    }
    let ring = |i: usize, j: usize| (1 + (i - 1) * n_lon + j % n_lon) as u32;
    let mut faces = Vec::new();
    for j in 0..n_lon {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_lat {
        for j in 0..n_lon {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Axis-aligned square in the plane `z = z0`, facing -z (towards a camera at the origin).
pub fn square(side: f64, z0: f64) -> TriangleMesh {
    let h = side / 2.0;
    build(
        vec![
            Point3::new(-h, -h, z0),
            Point3::new(h, -h, z0),
            Point3::new(h, h, z0),
            Point3::new(-h, h, z0),
        ],
        vec![[0, 2, 1], [0, 3, 2]],
    )
}

/// Splits every triangle into four, `levels` times. Keeps watertightness.
pub fn subdivide(mesh: &TriangleMesh, levels: u32) -> TriangleMesh {
    let mut vertices: Vec<Point3<f64>> = mesh.vertices().to_vec();
    let mut faces: Vec<[u32; 3]> = mesh.faces().to_vec();
    for _ in 0..levels {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let mut mid = |p: u32, q: u32| -> u32 {
                *cache.entry((p.min(q), p.max(q))).or_insert_with(|| {
                    vertices.push(nalgebra::center(
                        &vertices[p as usize],
                        &vertices[q as usize],
                    ));
                    vertices.len() as u32 - 1
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(vertices, faces)
}

/// Area-weighted vertex normals.
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vector3<f64>> {
    let mut normals = vec![Vector3::zeros(); mesh.vertices().len()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let [a, b, c] = mesh.triangle(f);
        let weighted = (b - a).cross(&(c - a));
        for &v in face {
            normals[v as usize] += weighted;
        }
    }
    normals
        .into_iter()
        .map(|n| n.try_normalize(1e-300).unwrap_or_else(Vector3::z))
        .collect()
}

/// Subdivides until no edge exceeds `max_edge`, then displaces every vertex
/// along its normal by zero-mean Gaussian noise of standard deviation `sigma`.
pub fn noisy_copy(mesh: &TriangleMesh, sigma: f64, max_edge: f64, seed: u64) -> TriangleMesh {
    let mut dense = mesh.clone();
    while longest_edge(&dense) > max_edge {
        dense = subdivide(&dense, 1);
    }
    let normals = vertex_normals(&dense);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let vertices = dense
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(v, n)| v + n * noise.sample(&mut rng))
        .collect();
    build(vertices, dense.faces().to_vec())
}

fn longest_edge(mesh: &TriangleMesh) -> f64 {
    (0..mesh.n_faces())
        .flat_map(|f| {
            let [a, b, c] = mesh.triangle(f);
            [(b - a).norm(), (c - b).norm(), (a - c).norm()]
        })
        .fold(0.0, f64::max)
}

/// Minimal binary glTF: one triangle in a node translated by `translation`.
pub fn single_triangle_glb(translation: [f32; 3]) -> Vec<u8> {
    let positions: [[f32; 3]; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let mut bin: Vec<u8> = positions
        .iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let json = serde_json::json!({
        "asset": {"version": "2.0"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0, "translation": translation}],
        "meshes": [{"primitives": [{"attributes": {"POSITION": 0}}]}],
        "buffers": [{"byteLength": bin.len()}],
        "bufferViews": [{"buffer": 0, "byteOffset": 0, "byteLength": bin.len()}],
        "accessors": [{
            "bufferView": 0, "componentType": 5126, "count": 3, "type": "VEC3",
            "min": [0.0, 0.0, 0.0], "max": [1.0, 1.0, 0.0]
        }]
    });
    let mut json_bytes = serde_json::to_vec(&json).expect("static json");
    while json_bytes.len() % 4 != 0 {
        json_bytes.push(b' ');
    }
    while bin.len() % 4 != 0 {
        bin.push(0);
    }
    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"glTF");
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(b"JSON");
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(b"BIN\0");
    out.extend_from_slice(&bin);
    out
}
