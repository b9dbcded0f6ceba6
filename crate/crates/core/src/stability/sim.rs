//! Rigid body on a ground plane: sequential impulses on vertex contacts.

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::hull::convex_hull;
use super::resting::lowest_z;
use crate::error::{Error, Result};
use crate::mesh::{mass_properties, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Fixed step (s).
    pub timestep: f64,
    /// Simulated time (s).
    pub duration: f64,
    /// Coulomb coefficient.
    pub friction: f64,
    pub restitution: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    pub solver_iterations: usize,
    /// Fraction of penetration corrected per step.
    pub baumgarte: f64,
    /// Penetration (m) left uncorrected to avoid jitter.
    pub penetration_slop: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            timestep: 1.0 / 240.0,
            duration: 5.0,
            friction: 0.8,
            restitution: 0.0,
            gravity: 9.81,
            solver_iterations: 20,
            baumgarte: 0.2,
            penetration_slop: 1e-4,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.timestep > 0.0
            && self.duration >= 0.0
            && self.friction >= 0.0
            && (0.0..=1.0).contains(&self.restitution)
            && self.gravity >= 0.0
            && self.solver_iterations > 0
            && (0.0..=1.0).contains(&self.baumgarte)
            && self.penetration_slop >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid simulation parameters: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleResult {
    /// Body-to-world rotation at the end of the run.
    pub final_rotation: UnitQuaternion<f64>,
    pub initial_com: Point3<f64>,
    pub final_com: Point3<f64>,
    pub com_displacement: Vector3<f64>,
    /// Deepest any contact vertex went below the plane (m, ≥ 0).
    pub max_penetration: f64,
    /// Speed of the COM at the end (m/s).
    pub final_speed: f64,
}

/// Contact geometry and inertia of a mesh, shared across runs.
#[derive(Debug, Clone)]
pub struct RigidBody {
    /// Hull vertices relative to the COM, body frame.
    pub(crate) points: Vec<Vector3<f64>>,
    inv_inertia: Matrix3<f64>,
}

impl RigidBody {
    pub fn from_mesh(mesh: &TriangleMesh) -> Result<Self> {
        let props = mass_properties(mesh)?;
        let hull = convex_hull(mesh.vertices())?;
        let points = hull
            .vertex_indices()
            .iter()
            .map(|&i| hull.points[i] - props.center_of_mass)
            .collect();
        let inv_inertia = props.inertia.try_inverse().ok_or(Error::DegenerateHull)?;
        Ok(Self {
            points,
            inv_inertia,
        })
    }

    /// Places the body with `rotation`, COM above the origin and lowest point on the plane.
    pub fn resting_com(&self, rotation: &UnitQuaternion<f64>) -> Point3<f64> {
        Point3::new(0.0, 0.0, -lowest_z(&self.points, rotation))
    }

    pub fn simulate(
        &self,
        rotation: UnitQuaternion<f64>,
        com: Point3<f64>,
        params: &SimParams,
    ) -> Result<SettleResult> {
        params.validate()?;
        let dt = params.timestep;
        let steps = (params.duration / dt).round() as usize;
        let mut q = rotation;
        let mut x = com.coords;
        let mut v = Vector3::zeros();
        let mut w = Vector3::zeros();
        let g = Vector3::new(0.0, 0.0, -params.gravity);
        let mut warm: HashMap<usize, [f64; 3]> = HashMap::new();
        let mut max_penetration: f64 = 0.0;
        // vertices this close to the plane take part as speculative contacts
        let margin = params.gravity * dt * dt * 4.0 + params.penetration_slop;

        for step in 0..steps {
            v += g * dt;
            let r_mat = q.to_rotation_matrix();
            let inv_i = r_mat.matrix() * self.inv_inertia * r_mat.matrix().transpose();

            let mut contacts: Vec<Contact> = Vec::new();
            for (k, p) in self.points.iter().enumerate() {
                let r = r_mat * p;
                let z = x.z + r.z;
                max_penetration = max_penetration.max(-z);
                let vn0 = (v + w.cross(&r)).z;
                if z + 2.0 * dt * vn0.min(0.0) < margin {
                    let acc = warm.get(&k).copied().unwrap_or([0.0; 3]);
                    contacts.push(Contact::new(k, r, z, vn0, acc, &inv_i, params));
                }
            }

            // warm start
            for c in &contacts {
                let impulse = Vector3::new(c.acc[1], c.acc[2], c.acc[0]);
                v += impulse;
                w += inv_i * c.r.cross(&impulse);
            }
            for _ in 0..params.solver_iterations {
                for c in contacts.iter_mut() {
                    // friction first, bounded by the current normal impulse
                    for (axis, t) in [(1usize, Vector3::x()), (2, Vector3::y())] {
                        let vt = (v + w.cross(&c.r)).dot(&t);
                        let limit = params.friction * c.acc[0];
                        let old = c.acc[axis];
                        c.acc[axis] = (old - vt * c.k[axis]).clamp(-limit, limit);
                        let d = (c.acc[axis] - old) * t;
                        v += d;
                        w += inv_i * c.r.cross(&d);
                    }
                    let vn = (v + w.cross(&c.r)).z;
                    let old = c.acc[0];
                    c.acc[0] = (old + (c.target - vn) * c.k[0]).max(0.0);
                    let d = Vector3::new(0.0, 0.0, c.acc[0] - old);
                    v += d;
                    w += inv_i * c.r.cross(&d);
                }
            }
            warm = contacts.iter().map(|c| (c.index, c.acc)).collect();

            x += v * dt;
            let spin = UnitQuaternion::from_scaled_axis(w * dt);
            q = UnitQuaternion::new_normalize((spin * q).into_inner());
            if !(x
                .iter()
                .chain(v.iter())
                .chain(w.iter())
                .all(|c| c.is_finite())
                && q.coords.iter().all(|c| c.is_finite()))
            {
                return Err(Error::NonFiniteState {
                    time: (step + 1) as f64 * dt,
                });
            }
        }
        let final_com = Point3::from(x);
        Ok(SettleResult {
            final_rotation: q,
            initial_com: com,
            final_com,
            com_displacement: final_com - com,
            max_penetration,
            final_speed: v.norm(),
        })
    }
}

struct Contact {
    index: usize,
    r: Vector3<f64>,
    /// Effective masses along z, x, y.
    k: [f64; 3],
    /// Normal velocity the solver drives towards.
    target: f64,
    /// Accumulated impulses along z, x, y.
    acc: [f64; 3],
}

impl Contact {
    fn new(
        index: usize,
        r: Vector3<f64>,
        z: f64,
        vn0: f64,
        acc: [f64; 3],
        inv_i: &Matrix3<f64>,
        params: &SimParams,
    ) -> Self {
        let k_along = |n: Vector3<f64>| {
            let rn = r.cross(&n);
            1.0 / (1.0 + rn.dot(&(inv_i * rn)))
        };
        let dt = params.timestep;
        let target = if z > 0.0 {
            // allowed to close the gap within this step
            -z / dt
        } else {
            let push = params.baumgarte * (-z - params.penetration_slop).max(0.0) / dt;
            let bounce = if vn0 < -1e-2 {
                -params.restitution * vn0
            } else {
                0.0
            };
            push.max(bounce)
        };
        Self {
            index,
            r,
            k: [
                k_along(Vector3::z()),
                k_along(Vector3::x()),
                k_along(Vector3::y()),
            ],
            target,
            acc,
        }
    }
}

/// Drops the mesh from rest in `initial_rotation` (lowest point on the plane)
/// and integrates for the configured duration.
pub fn settle(
    mesh: &TriangleMesh,
    initial_rotation: &UnitQuaternion<f64>,
    params: &SimParams,
) -> Result<SettleResult> {
    let body = RigidBody::from_mesh(mesh)?;
    body.simulate(
        *initial_rotation,
        body.resting_com(initial_rotation),
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::stability::resting::tilt_between;

    fn edge_tilt(deg: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::y_axis(), deg.to_radians())
    }

    #[test]
    fn resting_cube_stays_put() {
        let cube = fixtures::cube(0.1);
        let r = settle(&cube, &UnitQuaternion::identity(), &SimParams::default()).unwrap();
        assert!(r.final_rotation.angle().to_degrees() < 0.1);
        assert!(r.com_displacement.norm() < 1e-3);
        assert!(r.max_penetration < 1e-3);
    }

    #[test]
    fn small_tilt_reverts_and_large_tilt_topples() {
        let cube = fixtures::cube(0.1);
        let params = SimParams::default();
        for deg in [3.0, 30.0] {
            let r = settle(&cube, &edge_tilt(deg), &params).unwrap();
            assert!(
                tilt_between(&r.final_rotation, &UnitQuaternion::identity()) < 0.5,
                "{deg}°"
            );
            assert!(r.max_penetration < 1e-3);
        }
        // past the 45° critical angle the cube lands on the adjacent face
        let r = settle(&cube, &edge_tilt(50.0), &params).unwrap();
        let tilt = tilt_between(&r.final_rotation, &UnitQuaternion::identity());
        assert!((tilt - 90.0).abs() < 0.5, "{tilt}");
        assert!(r.max_penetration < 1e-3);
    }

    #[test]
    fn settles_to_a_face_down_pose() {
        let mesh = fixtures::l_solid(0.05);
        let start = UnitQuaternion::from_euler_angles(0.7, 0.4, 0.2);
        let r = settle(&mesh, &start, &SimParams::default()).unwrap();
        assert!(r.final_speed < 1e-3);
        let poses = crate::stability::enumerate_resting_orientations(&mesh).unwrap();
        let best = poses
            .iter()
            .map(|p| tilt_between(&p.rotation, &r.final_rotation))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.5, "{best}");
    }

    #[test]
    fn deterministic() {
        let mesh = fixtures::mug();
        let start = UnitQuaternion::from_euler_angles(0.2, 0.3, 0.0);
        let a = settle(&mesh, &start, &SimParams::default()).unwrap();
        let b = settle(&mesh, &start, &SimParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_params_rejected() {
        let params = SimParams {
            timestep: 0.0,
            ..SimParams::default()
        };
        assert!(settle(&fixtures::cube(0.1), &UnitQuaternion::identity(), &params).is_err());
    }
}
