use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::hull::{convex_hull, convex_hull_2d, polygon_area, polygon_margin};
use crate::error::Result;
use crate::mesh::{mass_properties, TriangleMesh};

/// Vertices this close (m) to the lowest point form the support set.
pub const DEFAULT_ELEVATION_TOL: f64 = 1e-4;

/// Hull faces whose normals differ by less than this (rad) are merged.
const COPLANAR_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestingPose {
    /// Body-to-world rotation placing the contact face on the plane z = 0.
    pub rotation: UnitQuaternion<f64>,
    /// CCW support polygon in the plane (m), relative to the COM projection.
    pub support_polygon: Vec<[f64; 2]>,
    /// Angle between this pose's up direction and the scene pose's (deg).
    pub tilt_from_scene: f64,
    /// Distance from the COM projection to the nearest support edge (m).
    pub com_margin: f64,
}

impl RestingPose {
    /// World up expressed in the body frame.
    pub fn body_up(&self) -> Vector3<f64> {
        self.rotation.inverse() * Vector3::z()
    }
}

/// Rotation taking the outward direction `n` to world -z.
pub(crate) fn face_down_rotation(n: &Vector3<f64>) -> UnitQuaternion<f64> {
    let down = -Vector3::z();
    UnitQuaternion::rotation_between(n, &down).unwrap_or_else(|| {
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    })
}

/// Every hull-face orientation whose COM projects strictly inside its support polygon.
pub fn enumerate_resting_orientations(mesh: &TriangleMesh) -> Result<Vec<RestingPose>> {
    enumerate_with_tolerance(mesh, DEFAULT_ELEVATION_TOL)
}

pub fn enumerate_with_tolerance(
    mesh: &TriangleMesh,
    elevation_tol: f64,
) -> Result<Vec<RestingPose>> {
    let hull = convex_hull(mesh.vertices())?;
    let com = mass_properties(mesh)?.center_of_mass;
    let rel: Vec<Vector3<f64>> = hull
        .vertex_indices()
        .iter()
        .map(|&i| hull.points[i] - com)
        .collect();

    let mut normals: Vec<Vector3<f64>> = Vec::new();
    for f in 0..hull.faces.len() {
        let n = hull.face_normal(f);
        if !n.iter().all(|c| c.is_finite()) {
            continue;
        }
        if normals.iter().all(|m| m.angle(&n) > COPLANAR_ANGLE) {
            normals.push(n);
        }
    }

    let mut poses = Vec::new();
    for n in normals {
        let rotation = face_down_rotation(&n);
        let support = support_polygon(&rel, &rotation, elevation_tol);
        if polygon_area(&support) <= 0.0 {
            continue;
        }
        let margin = polygon_margin(&support, [0.0, 0.0]);
        if margin > 0.0 {
            poses.push(RestingPose {
                rotation,
                support_polygon: support,
                tilt_from_scene: 0.0,
                com_margin: margin,
            });
        }
    }
    Ok(poses)
}

/// Support polygon of COM-relative points under `rotation`.
pub(crate) fn support_polygon(
    rel: &[Vector3<f64>],
    rotation: &UnitQuaternion<f64>,
    elevation_tol: f64,
) -> Vec<[f64; 2]> {
    let rotated: Vec<Vector3<f64>> = rel.iter().map(|v| rotation * v).collect();
    let lowest = rotated.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    let base: Vec<[f64; 2]> = rotated
        .iter()
        .filter(|v| v.z <= lowest + elevation_tol)
        .map(|v| [v.x, v.y])
        .collect();
    convex_hull_2d(&base)
}

/// Angle (deg) between the up directions of two orientations, ignoring yaw about world z.
pub fn tilt_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let ua = a.inverse() * Vector3::z();
    let ub = b.inverse() * Vector3::z();
    ua.angle(&ub).to_degrees()
}

/// Candidates within `max_tilt` degrees (inclusive) of the scene pose, sorted
/// by tilt with their tilt recorded.
pub fn filter_near_scene_pose(
    candidates: &[RestingPose],
    scene_rotation: &UnitQuaternion<f64>,
    max_tilt: f64,
) -> Vec<RestingPose> {
    let mut kept: Vec<RestingPose> = candidates
        .iter()
        .filter_map(|c| {
            let tilt = tilt_between(&c.rotation, scene_rotation);
            (tilt <= max_tilt + 1e-9).then(|| RestingPose {
                tilt_from_scene: tilt,
                ..c.clone()
            })
        })
        .collect();
    kept.sort_by(|a, b| a.tilt_from_scene.total_cmp(&b.tilt_from_scene));
    kept
}

/// Lowest point of `rel` after rotation, used to place a body on the plane.
pub(crate) fn lowest_z(rel: &[Vector3<f64>], rotation: &UnitQuaternion<f64>) -> f64 {
    rel.iter()
        .map(|v| (rotation * v).z)
        .fold(f64::INFINITY, f64::min)
}
