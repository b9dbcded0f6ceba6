use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Below this enclosed volume (m³) a watertight mesh is treated as a shell.
const MIN_VOLUME: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterOfMass {
    pub point: Point3<f64>,
    /// False when the mesh is not watertight and the area centroid was used.
    pub volumetric: bool,
}

/// Unit-mass rigid-body properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub center_of_mass: Point3<f64>,
    /// Inertia tensor about the centre of mass, per unit mass (m²).
    pub inertia: Matrix3<f64>,
    pub volumetric: bool,
    /// Enclosed volume, or surface area for the shell fallback.
    pub measure: f64,
}

/// Uniform-density volume centroid for watertight meshes, area centroid otherwise.
pub fn center_of_mass(mesh: &TriangleMesh) -> Result<CenterOfMass> {
    let props = mass_properties(mesh)?;
    Ok(CenterOfMass {
        point: props.center_of_mass,
        volumetric: props.volumetric,
    })
}

pub fn mass_properties(mesh: &TriangleMesh) -> Result<MassProperties> {
    if mesh.n_faces() == 0 {
        return Err(Error::EmptyMesh);
    }
    // Integrate relative to the vertex centroid to limit cancellation.
    let origin = mesh.vertex_centroid();
    if mesh.is_watertight() {
        if let Some(props) = volume_integrals(mesh, &origin) {
            return Ok(props);
        }
    }
    log::debug!("mesh is not a closed volume; using surface-shell mass properties");
    Ok(shell_integrals(mesh, &origin))
}

fn volume_integrals(mesh: &TriangleMesh, origin: &Point3<f64>) -> Option<MassProperties> {
    let mut volume = 0.0;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for f in 0..mesh.n_faces() {
        let [a, b, c] = mesh.triangle(f).map(|p| p - origin);
        // signed volume of the tetrahedron (origin, a, b, c) times 6
        let det = a.dot(&b.cross(&c));
        volume += det / 6.0;
        first += det / 24.0 * (a + b + c);
        let s = a + b + c;
        second += det / 120.0
            * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
    if volume < 0.0 {
        // inward-facing winding; the integrals flip sign together
        volume = -volume;
        first = -first;
        second = -second;
    }
    if volume < MIN_VOLUME {
        return None;
    }
    Some(finish(origin, volume, first, second, true))
}

fn shell_integrals(mesh: &TriangleMesh, origin: &Point3<f64>) -> MassProperties {
    let mut area = 0.0;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for f in 0..mesh.n_faces() {
        let [a, b, c] = mesh.triangle(f).map(|p| p - origin);
        let w = mesh.face_area(f);
        let s = a + b + c;
        area += w;
        first += w / 3.0 * s;
        second += w / 12.0
            * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
    finish(origin, area, first, second, false)
}

fn finish(
    origin: &Point3<f64>,
    measure: f64,
    first: Vector3<f64>,
    second: Matrix3<f64>,
    volumetric: bool,
) -> MassProperties {
    let com_rel = first / measure;
    // second moment about the centroid per unit mass
    let cov = second / measure - com_rel * com_rel.transpose();
    let inertia = Matrix3::identity() * cov.trace() - cov;
    MassProperties {
        center_of_mass: origin + com_rel,
        inertia: 0.5 * (inertia + inertia.transpose()),
        volumetric,
        measure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::SimilarityTransform;
    use nalgebra::UnitQuaternion;

    #[test]
    fn centered_cube() {
        let com = center_of_mass(&fixtures::cube(1.0)).unwrap();
        assert!(com.volumetric);
        assert!(com.point.coords.norm() < 1e-9);
    }

    #[test]
    fn translation_equivariant() {
        let t = SimilarityTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let com = center_of_mass(&fixtures::cube(1.0).transformed(&t)).unwrap();
        assert!((com.point - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-9);
    }

    #[test]
    fn rotation_equivariant_on_asymmetric_solid() {
        let mesh = fixtures::l_solid(0.2);
        let t = SimilarityTransform::rigid(
            UnitQuaternion::from_euler_angles(0.4, 1.2, -0.7),
            Vector3::new(-0.3, 0.1, 2.0),
        );
        let base = center_of_mass(&mesh).unwrap().point;
        let moved = center_of_mass(&mesh.transformed(&t)).unwrap().point;
        assert!((t.apply(&base) - moved).norm() < 1e-12);
    }

    #[test]
    fn open_hemisphere_falls_back_to_shell_centroid() {
        let r = 1.0;
        let com = center_of_mass(&fixtures::hemisphere_shell(r, 5)).unwrap();
        assert!(!com.volumetric);
        assert!(com.point.x.abs() < 1e-9 && com.point.y.abs() < 1e-9);
        // analytic shell centroid r/2; the tessellation loses a little area near the rim
        assert!(
            (com.point.z - r / 2.0).abs() < 0.01 * r,
            "z = {}",
            com.point.z
        );
    }

    #[test]
    fn box_inertia_matches_closed_form() {
        let (x, y, z) = (0.1, 0.2, 0.4);
        let props = mass_properties(&fixtures::cuboid(x, y, z)).unwrap();
        assert!((props.measure - x * y * z).abs() < 1e-12);
        let expect = [
            (y * y + z * z) / 12.0,
            (x * x + z * z) / 12.0,
            (x * x + y * y) / 12.0,
        ];
        for (k, e) in expect.iter().enumerate() {
            assert!((props.inertia[(k, k)] - e).abs() < 1e-12);
        }
        assert!(props.inertia[(0, 1)].abs() < 1e-12);
    }
}
