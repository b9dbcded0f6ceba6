//! Similarity transforms (uniform scale, rotation, translation).

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// `x -> scale * rotation * x + translation`.
///
/// Rigid poses are the special case `scale == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(scale > 0.0, "similarity scale must be positive");
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn rigid(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self::new(1.0, rotation, translation)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::rigid(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::rigid(rotation, Vector3::zeros())
    }

    pub fn from_scale(scale: f64) -> Self {
        Self::new(scale, UnitQuaternion::identity(), Vector3::zeros())
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * (p.coords * self.scale) + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (v * self.scale)
    }

    /// Rotates a direction (normals, axes); scale and translation are ignored.
    #[inline]
    pub fn apply_direction(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.rotation * (other.translation * self.scale) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            scale: inv_scale,
            rotation: inv_rot,
            translation: -(inv_rot * self.translation) * inv_scale,
        }
    }

    pub fn is_rigid(&self) -> bool {
        (self.scale - 1.0).abs() < 1e-12
    }

    /// Geodesic angle between the rotation parts, radians.
    pub fn rotation_angle_to(&self, other: &SimilarityTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

/// Flat wire form used by manifests and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    #[serde(default = "one")]
    pub scale: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&SimilarityTransform> for PoseRecord {
    fn from(t: &SimilarityTransform) -> Self {
        let q = t.rotation.quaternion();
        PoseRecord {
            scale: t.scale,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            tx: t.translation.x,
            ty: t.translation.y,
            tz: t.translation.z,
        }
    }
}

impl From<&PoseRecord> for SimilarityTransform {
    /// Renormalizes the quaternion unless it is already unit to within
    /// rounding, so serialized transforms read back bit for bit.
    fn from(r: &PoseRecord) -> Self {
        let q = Quaternion::new(r.qw, r.qx, r.qy, r.qz);
        let rotation = if (q.norm_squared() - 1.0).abs() < 8.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        SimilarityTransform {
            scale: r.scale,
            rotation,
            translation: Vector3::new(r.tx, r.ty, r.tz),
        }
    }
}

impl Serialize for SimilarityTransform {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SimilarityTransform {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = PoseRecord::deserialize(deserializer)?;
        if !(record.scale > 0.0) {
            return Err(serde::de::Error::custom("scale must be positive"));
        }
        let norm = (record.qw * record.qw
            + record.qx * record.qx
            + record.qy * record.qy
            + record.qz * record.qz)
            .sqrt();
        if !(norm > 1e-12) {
            return Err(serde::de::Error::custom("quaternion has zero norm"));
        }
        Ok(SimilarityTransform::from(&record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {
            assert!(($a - $b).norm() < $tol, "{:?} vs {:?}", $a, $b)
        };
    }

    fn sample() -> SimilarityTransform {
        SimilarityTransform::new(
            1.7,
            UnitQuaternion::from_euler_angles(0.3, -1.1, 2.0),
            Vector3::new(0.1, -2.0, 0.5),
        )
    }

    #[test]
    fn inverse_round_trips() {
        let t = sample();
        let p = Point3::new(0.3, 0.2, -0.7);
        let back = t.inverse().apply(&t.apply(&p));
        assert_close!(back, p, 1e-12);
        let id = t.compose(&t.inverse());
        assert!((id.scale - 1.0).abs() < 1e-12);
        assert!(id.rotation.angle() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn compose_applies_right_first() {
        let a = sample();
        let b = SimilarityTransform::new(
            0.4,
            UnitQuaternion::from_euler_angles(-0.5, 0.1, 0.9),
            Vector3::new(3.0, 0.0, 1.0),
        );
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_close!(a.compose(&b).apply(&p), a.apply(&b.apply(&p)), 1e-12);
    }

    #[test]
    fn wire_form_round_trips() {
        let t = sample();
        let json = serde_json::to_string(&t).unwrap();
        let back: SimilarityTransform = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn rejects_zero_scale() {
        let json = r#"{"scale":0.0,"qw":1,"qx":0,"qy":0,"qz":0,"tx":0,"ty":0,"tz":0}"#;
        assert!(serde_json::from_str::<SimilarityTransform>(json).is_err());
    }
}
