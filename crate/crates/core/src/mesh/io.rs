use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix4, Point3};

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
    Stl,
    Glb,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            "stl" => Ok(MeshFormat::Stl),
            "glb" => Ok(MeshFormat::Glb),
            other => Err(Error::UnsupportedFormat(if other.is_empty() {
                path.display().to_string()
            } else {
                other.to_string()
            })),
        }
    }
}

/// Reads a mesh, dropping degenerate faces.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    if !path.is_file() {
        return Err(unreadable(path, "file does not exist"));
    }
    let (vertices, faces) = match format {
        MeshFormat::Obj => read_obj(path)?,
        MeshFormat::Ply => read_ply(path)?,
        MeshFormat::Stl => read_stl(path)?,
        MeshFormat::Glb => read_glb(path)?,
    };
    let n_faces = faces.len();
    let mesh = TriangleMesh::new(vertices, faces)?;
    log::info!(
        "loaded {}: {} vertices, {} faces ({} degenerate of {} dropped)",
        path.display(),
        mesh.vertices().len(),
        mesh.n_faces(),
        mesh.dropped_faces(),
        n_faces
    );
    Ok(mesh)
}

fn unreadable(path: &Path, reason: impl ToString) -> Error {
    Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

type RawMesh = (Vec<Point3<f64>>, Vec<[u32; 3]>);

fn read_obj(path: &Path) -> Result<RawMesh> {
    let options = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) = tobj::load_obj(path, &options).map_err(|e| unreadable(path, e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for model in models {
        let base = vertices.len() as u32;
        let m = &model.mesh;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2])),
        );
        faces.extend(
            m.indices
                .chunks_exact(3)
                .map(|c| [c[0] + base, c[1] + base, c[2] + base]),
        );
    }
    Ok((vertices, faces))
}

fn read_stl(path: &Path) -> Result<RawMesh> {
    let file = File::open(path).map_err(|e| unreadable(path, e))?;
    let mesh = stl_io::read_stl(&mut BufReader::new(file)).map_err(|e| unreadable(path, e))?;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Point3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let faces = mesh
        .faces
        .iter()
        .map(|f| {
            [
                f.vertices[0] as u32,
                f.vertices[1] as u32,
                f.vertices[2] as u32,
            ]
        })
        .collect();
    Ok((vertices, faces))
}

fn read_ply(path: &Path) -> Result<RawMesh> {
    use ply_rs::parser::Parser;
    use ply_rs::ply::{DefaultElement, Property};

    fn scalar(p: &Property) -> Option<f64> {
        Some(match *p {
            Property::Char(v) => v as f64,
            Property::UChar(v) => v as f64,
            Property::Short(v) => v as f64,
            Property::UShort(v) => v as f64,
            Property::Int(v) => v as f64,
            Property::UInt(v) => v as f64,
            Property::Float(v) => v as f64,
            Property::Double(v) => v,
            _ => return None,
        })
    }

    fn indices(p: &Property) -> Option<Vec<i64>> {
        Some(match p {
            Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
            Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
            Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
            Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
            Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
            Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
            _ => return None,
        })
    }

    let file = File::open(path).map_err(|e| unreadable(path, e))?;
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut BufReader::new(file))
        .map_err(|e| unreadable(path, e))?;

    let vertex_elems = ply
        .payload
        .get("vertex")
        .ok_or_else(|| unreadable(path, "no vertex element"))?;
    let mut vertices = Vec::with_capacity(vertex_elems.len());
    for v in vertex_elems {
        let coord = |k: &str| v.get(k).and_then(scalar);
        match (coord("x"), coord("y"), coord("z")) {
            (Some(x), Some(y), Some(z)) => vertices.push(Point3::new(x, y, z)),
            _ => return Err(unreadable(path, "vertex without numeric x/y/z")),
        }
    }

    let mut faces = Vec::new();
    for f in ply
        .payload
        .get("face")
        .map(Vec::as_slice)
        .unwrap_or_default()
    {
        let list = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(indices)
            .ok_or_else(|| unreadable(path, "face without vertex index list"))?;
        if list.iter().any(|&i| i < 0) {
            return Err(unreadable(path, "negative vertex index"));
        }
        // fan-triangulate polygons
        for k in 1..list.len().saturating_sub(1) {
            faces.push([list[0] as u32, list[k] as u32, list[k + 1] as u32]);
        }
    }
    Ok((vertices, faces))
}

fn read_glb(path: &Path) -> Result<RawMesh> {
    let bytes = std::fs::read(path).map_err(|e| unreadable(path, e))?;
    let gltf = gltf::Gltf::from_slice(&bytes).map_err(|e| unreadable(path, e))?;
    let blob = gltf.blob.as_deref();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    let mut append = |mesh: gltf::Mesh<'_>, world: &Matrix4<f64>| -> Result<()> {
        for primitive in mesh.primitives() {
            if primitive.mode() != gltf::mesh::Mode::Triangles {
                continue;
            }
            let reader = primitive.reader(|buffer| match buffer.source() {
                gltf::buffer::Source::Bin => blob,
                gltf::buffer::Source::Uri(_) => None,
            });
            let Some(positions) = reader.read_positions() else {
                continue;
            };
            let base = vertices.len() as u32;
            for p in positions {
                let local = Point3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                vertices.push(world.transform_point(&local));
            }
            let count = vertices.len() as u32 - base;
            match reader.read_indices() {
                Some(ix) => {
                    let ix: Vec<u32> = ix.into_u32().collect();
                    faces.extend(
                        ix.chunks_exact(3)
                            .map(|c| [c[0] + base, c[1] + base, c[2] + base]),
                    );
                }
                None => faces.extend(
                    (0..count / 3).map(|k| [base + 3 * k, base + 3 * k + 1, base + 3 * k + 2]),
                ),
            }
        }
        Ok(())
    };

    let scene = gltf.default_scene().or_else(|| gltf.scenes().next());
    match scene {
        Some(scene) => {
            let mut stack: Vec<(gltf::Node<'_>, Matrix4<f64>)> =
                scene.nodes().map(|n| (n, Matrix4::identity())).collect();
            while let Some((node, parent)) = stack.pop() {
                let local = Matrix4::from_fn(|r, c| node.transform().matrix()[c][r] as f64);
                let world = parent * local;
                if let Some(mesh) = node.mesh() {
                    append(mesh, &world)?;
                }
                stack.extend(node.children().map(|child| (child, world)));
            }
        }
        None => {
            for mesh in gltf.meshes() {
                append(mesh, &Matrix4::identity())?;
            }
        }
    }
    if faces
        .iter()
        .flatten()
        .any(|&i| i as usize >= vertices.len())
    {
        return Err(unreadable(path, "index out of range"));
    }
    Ok((vertices, faces))
}

/// Writes a Wavefront OBJ with full float precision.
pub fn save_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for v in mesh.vertices() {
            writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const CUBE_OBJ: &str = "\
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn unit_cube_obj() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        std::fs::write(&path, CUBE_OBJ).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Obj).unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.n_faces(), 12);
        assert!(mesh.is_watertight());
    }

    #[test]
    fn zero_area_obj_face_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sliver.obj");
        let text = format!("{CUBE_OBJ}v 1.5 -0.5 -0.5\nf 1 2 9\n");
        std::fs::write(&path, text).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Obj).unwrap();
        assert_eq!(mesh.n_faces(), 12);
        assert_eq!(mesh.dropped_faces(), 1);
    }

    #[test]
    fn ascii_and_binary_ply() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n\
0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let path = dir.path().join("quad.ply");
        std::fs::write(&path, ascii).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Ply).unwrap();
        assert_eq!(mesh.n_faces(), 2);
        assert!((mesh.surface_area() - 1.0).abs() < 1e-12);

        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\n\
element face 1\nproperty list uchar uint vertex_indices\nend_header\n"
            .to_vec();
        for v in [[0.0f64, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]] {
            for c in v {
                bin.extend_from_slice(&c.to_le_bytes());
            }
        }
        bin.push(3);
        for i in 0u32..3 {
            bin.extend_from_slice(&i.to_le_bytes());
        }
        let path = dir.path().join("tri.ply");
        std::fs::write(&path, bin).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Ply).unwrap();
        assert_eq!(mesh.n_faces(), 1);
        assert!((mesh.surface_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stl_round_trip_through_writer() {
        let cube = fixtures::cube(0.2);
        let triangles: Vec<stl_io::Triangle> = (0..cube.n_faces())
            .map(|f| {
                let t = cube.triangle(f);
                let n = cube.face_normal(f);
                stl_io::Triangle {
                    normal: stl_io::Normal::new([n.x as f32, n.y as f32, n.z as f32]),
                    vertices: t.map(|p| stl_io::Vertex::new([p.x as f32, p.y as f32, p.z as f32])),
                }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.stl");
        let mut file = File::create(&path).unwrap();
        stl_io::write_stl(&mut file, triangles.iter()).unwrap();
        drop(file);
        let mesh = load_mesh(&path, MeshFormat::Stl).unwrap();
        assert_eq!(mesh.n_faces(), 12);
        assert_eq!(mesh.vertices().len(), 8);
        assert!((mesh.surface_area() - 0.24).abs() < 1e-6);
    }

    #[test]
    fn glb_with_node_translation() {
        let bytes = fixtures::single_triangle_glb([0.0, 0.0, 1.5]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.glb");
        std::fs::write(&path, bytes).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Glb).unwrap();
        assert_eq!(mesh.n_faces(), 1);
        assert!(mesh.vertices().iter().all(|v| (v.z - 1.5).abs() < 1e-6));
    }

    #[test]
    fn missing_and_unsupported() {
        assert!(matches!(
            load_mesh(Path::new("/nonexistent/cube.obj"), MeshFormat::Obj),
            Err(Error::UnreadableFile { .. })
        ));
        assert!(matches!(
            MeshFormat::from_path(Path::new("model.fbx")),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn saved_obj_reloads_identically() {
        let mesh = fixtures::l_solid(0.1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.obj");
        save_obj(&mesh, &path).unwrap();
        let back = load_mesh(&path, MeshFormat::Obj).unwrap();
        // the reader renumbers vertices by first use; compare triangles by coordinates
        assert_eq!(back.n_faces(), mesh.n_faces());
        for f in 0..mesh.n_faces() {
            assert_eq!(back.triangle(f), mesh.triangle(f));
        }
    }
}
