use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::Bvh;
use crate::error::{Error, Result};
use crate::fixtures::cuboid;
use crate::mesh::TriangleMesh;
use crate::transform::SimilarityTransform;

/// Parallel-jaw gripper approximated by two finger boxes and a palm bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSpec {
    /// Largest finger separation (m).
    pub max_opening: f64,
    /// Finger extent across the closing plane (m).
    pub finger_width: f64,
    /// Finger extent along the approach axis (m).
    pub finger_depth: f64,
    /// Distance from the fingertips back to the closing line (m).
    pub tip_offset: f64,
    /// Finger extent along the closing axis (m).
    pub finger_thickness: f64,
    /// Palm extent along the approach axis (m).
    pub palm_thickness: f64,
    /// Friction cone half-angle for antipodal sampling (deg).
    pub friction_cone_half_angle: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            max_opening: 0.08,
            finger_width: 0.02,
            finger_depth: 0.05,
            tip_offset: 0.01,
            finger_thickness: 0.01,
            palm_thickness: 0.02,
            friction_cone_half_angle: 15.0,
        }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.max_opening,
            self.finger_width,
            self.finger_depth,
            self.finger_thickness,
            self.palm_thickness,
        ];
        if dims.iter().all(|d| *d > 0.0)
            && self.tip_offset >= 0.0
            && self.tip_offset <= self.finger_depth
            && self.friction_cone_half_angle > 0.0
            && self.friction_cone_half_angle < 90.0
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid gripper: {self:?}")))
        }
    }

    /// Gripper boxes, fully open, around the grasp centre. The fingertips
    /// reach `tip_offset` past the closing line; the palm sits behind the
    /// fingers against the approach.
    pub fn open_body(&self, grasp: &GraspPose) -> TriangleMesh {
        let frame = grasp.frame();
        let half = self.max_opening / 2.0;
        let place = |mesh: TriangleMesh, offset: Vector3<f64>| {
            mesh.transformed(&SimilarityTransform::rigid(
                frame,
                grasp.center.coords + frame * offset,
            ))
        };
        let finger = || cuboid(self.finger_thickness, self.finger_width, self.finger_depth);
        let finger_z = self.tip_offset - self.finger_depth / 2.0;
        let a = place(
            finger(),
            Vector3::new(-half - self.finger_thickness / 2.0, 0.0, finger_z),
        );
        let b = place(
            finger(),
            Vector3::new(half + self.finger_thickness / 2.0, 0.0, finger_z),
        );
        let palm = place(
            cuboid(
                self.max_opening + 2.0 * self.finger_thickness,
                self.finger_width,
                self.palm_thickness,
            ),
            Vector3::new(
                0.0,
                0.0,
                self.tip_offset - self.finger_depth - self.palm_thickness / 2.0,
            ),
        );
        TriangleMesh::merge([&a, &b, &palm]).expect("gripper boxes are non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    /// Midpoint between the open fingers.
    pub center: Point3<f64>,
    pub contact_a: Point3<f64>,
    pub contact_b: Point3<f64>,
    /// Direction the gripper moves in along; perpendicular to `closing_axis`.
    pub approach_axis: Vector3<f64>,
    /// From finger a towards finger b.
    pub closing_axis: Vector3<f64>,
    pub width: f64,
}

impl GraspPose {
    /// Rotation with x along the closing axis and z along the approach axis.
    pub fn frame(&self) -> UnitQuaternion<f64> {
        let x = self.closing_axis;
        let z = self.approach_axis;
        let y = z.cross(&x);
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            Matrix3::from_columns(&[x, y, z]),
        ))
    }

    /// The same grasp under a similarity transform.
    pub fn transformed(&self, t: &SimilarityTransform) -> GraspPose {
        GraspPose {
            center: t.apply(&self.center),
            contact_a: t.apply(&self.contact_a),
            contact_b: t.apply(&self.contact_b),
            approach_axis: t.apply_direction(&self.approach_axis),
            closing_axis: t.apply_direction(&self.closing_axis),
            width: self.width * t.scale,
        }
    }
}

/// Where a finger closing along the grasp line first touches the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FingerContact {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

/// Closes both fingers from the open configuration along the closing line.
pub(crate) fn close_fingers(
    bvh: &Bvh,
    center: &Point3<f64>,
    closing: &Vector3<f64>,
    opening: f64,
) -> (Option<FingerContact>, Option<FingerContact>) {
    let half = opening / 2.0;
    let sweep = |start: Point3<f64>, dir: Vector3<f64>| {
        bvh.ray_cast(&start, &dir, 0.0, opening)
            .map(|h| FingerContact {
                point: h.point,
                normal: h.normal,
            })
    };
    (
        sweep(center - closing * half, *closing),
        sweep(center + closing * half, -closing),
    )
}

/// Angle (deg) between a finger's pad normal and the surface it presses on.
/// `pad` points from the finger towards the object.
pub(crate) fn pad_deviation(pad: &Vector3<f64>, surface_normal: &Vector3<f64>) -> f64 {
    pad.angle(&-surface_normal).to_degrees()
}

/// Even-odd containment test along a fixed oblique ray.
pub(crate) fn point_inside(bvh: &Bvh, p: &Point3<f64>) -> bool {
    let dir = Vector3::new(0.5773, 0.5774, 0.5773).normalize();
    let span = bvh.root_aabb().extents().norm() * 4.0 + 1.0;
    let mut t = 0.0;
    let mut crossings = 0;
    while let Some(hit) = bvh.ray_cast(p, &dir, t, span) {
        crossings += 1;
        t = hit.t + 1e-12 * span;
        if crossings > 10_000 {
            break;
        }
    }
    crossings % 2 == 1
}
