use nalgebra::{Quaternion, UnitQuaternion};

/// Deterministic, near-uniform set of `n` rotations (super-Fibonacci spiral on S³).
///
/// The set is rotated so that element 0 is the identity, and every quaternion is
/// sign-canonicalised (`w >= 0`) since `q` and `-q` are the same rotation.
pub fn sample_unit_quaternions(n: usize) -> Vec<UnitQuaternion<f64>> {
    const PHI: f64 = std::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let raw: Vec<UnitQuaternion<f64>> = (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let r = (s / n as f64).sqrt();
            let big_r = (1.0 - s / n as f64).sqrt();
            let alpha = 2.0 * std::f64::consts::PI * s / PHI;
            let beta = 2.0 * std::f64::consts::PI * s / PSI;
            UnitQuaternion::from_quaternion(Quaternion::new(
                big_r * beta.cos(),
                r * alpha.sin(),
                r * alpha.cos(),
                big_r * beta.sin(),
            ))
        })
        .collect();
    let Some(first) = raw.first() else {
        return Vec::new();
    };
    let to_identity = first.inverse();
    raw.iter()
        .enumerate()
        .map(|(i, q)| {
            if i == 0 {
                return UnitQuaternion::identity();
            }
            let q = to_identity * q;
            if q.w < 0.0 {
                UnitQuaternion::new_unchecked(-q.into_inner())
            } else {
                q
            }
        })
        .collect()
}

/// Smallest rotation angle (rad) between any two elements; π for fewer than two.
pub fn min_pairwise_angle(rotations: &[UnitQuaternion<f64>]) -> f64 {
    let mut max_dot: f64 = 0.0;
    for i in 0..rotations.len() {
        for j in i + 1..rotations.len() {
            max_dot = max_dot.max(rotations[i].coords.dot(&rotations[j].coords).abs());
        }
    }
    if rotations.len() < 2 {
        return std::f64::consts::PI;
    }
    2.0 * max_dot.min(1.0).acos()
}
