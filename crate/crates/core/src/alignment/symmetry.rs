use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{icp_refine, AlignmentResult, IcpParams};
use crate::error::{Error, Result};
use crate::mesh::{chamfer_distance, NnIndex, PointCloud};
use crate::transform::SimilarityTransform;

/// Rotational symmetry axis: rotations by `2πk/order` for `k = 1..order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryAxis {
    pub axis: [f64; 3],
    pub order: u32,
}

/// Declared symmetries of an object. Axes pass through the ground-truth
/// centroid and are expressed in the frame of the ground-truth cloud.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    #[serde(default)]
    pub axes: Vec<SymmetryAxis>,
}

impl SymmetrySpec {
    pub fn is_empty(&self) -> bool {
        self.axes.iter().all(|a| a.order < 2)
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.axes {
            if Vector3::from(a.axis).norm() < 1e-12 || a.axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "symmetry axis must be a finite non-zero vector".into(),
                ));
            }
            if a.order == 0 {
                return Err(Error::InvalidArgument(
                    "symmetry order must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Same symmetries with axes mapped by `rotation`.
    pub fn rotated(&self, rotation: &UnitQuaternion<f64>) -> SymmetrySpec {
        SymmetrySpec {
            axes: self
                .axes
                .iter()
                .map(|a| SymmetryAxis {
                    axis: (rotation * Vector3::from(a.axis)).into(),
                    order: a.order,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryFlip {
    pub axis: [f64; 3],
    pub angle_deg: f64,
    /// Symmetric Chamfer (m) before and after the flip.
    pub cd_before: f64,
    pub cd_after: f64,
}

/// Tries every declared symmetry rotation composed after the alignment,
/// re-settles each candidate with fixed-scale ICP, and keeps the variant with
/// the strictly lowest symmetric Chamfer distance.
pub fn symmetry_flip_correction(
    aligned: &AlignmentResult,
    recon: &PointCloud,
    gt: &PointCloud,
    symmetry: &SymmetrySpec,
) -> Result<AlignmentResult> {
    symmetry.validate()?;
    if symmetry.is_empty() {
        return Ok(aligned.clone());
    }
    let c = gt.centroid().coords;
    let index = NnIndex::build(gt)?;
    let base_cd = chamfer_distance(&recon.transformed(&aligned.transform), gt)?.symmetric;
    let mut best: Option<(SymmetryFlip, AlignmentResult)> = None;
    let mut best_cd = base_cd;
    for a in &symmetry.axes {
        let axis = Unit::new_normalize(Vector3::from(a.axis));
        for k in 1..a.order {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / a.order as f64;
            let r = UnitQuaternion::from_axis_angle(&axis, angle);
            let flip = SimilarityTransform::rigid(r, c - r * c);
            let candidate = icp_refine(
                recon,
                &index,
                &flip.compose(&aligned.transform),
                &IcpParams::default(),
            )?;
            let cd = chamfer_distance(&recon.transformed(&candidate.transform), gt)?.symmetric;
            if cd < best_cd {
                best_cd = cd;
                best = Some((
                    SymmetryFlip {
                        axis: axis.into_inner().into(),
                        angle_deg: angle.to_degrees(),
                        cd_before: base_cd,
                        cd_after: cd,
                    },
                    candidate,
                ));
            }
        }
    }
    let Some((flip, refined)) = best else {
        return Ok(aligned.clone());
    };
    let mut out = aligned.clone();
    out.transform = refined.transform;
    out.rmse = refined.rmse;
    out.n_points = refined.n_points;
    out.n_iterations += refined.n_iterations;
    out.flip = Some(flip);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::{sample_surface, TriangleMesh};

    /// Box with a small bump on its +x end: nearly 180°-symmetric about z.
    fn bumped_box() -> TriangleMesh {
        let bump = fixtures::cube(0.02).transformed(&SimilarityTransform::from_translation(
            Vector3::new(0.085, 0.0, 0.0),
        ));
        TriangleMesh::merge([&fixtures::cuboid(0.16, 0.08, 0.05), &bump]).unwrap()
    }

    fn result(t: SimilarityTransform) -> AlignmentResult {
        AlignmentResult::new(t, 0.0, 1, 0, true, 0)
    }

    #[test]
    fn empty_spec_is_identity() {
        let gt = sample_surface(&bumped_box(), 2000, 1).unwrap();
        let input = result(SimilarityTransform::identity());
        let out = symmetry_flip_correction(&input, &gt, &gt, &SymmetrySpec::default()).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn flipped_alignment_is_corrected() {
        let mesh = bumped_box();
        let gt = sample_surface(&mesh, 4000, 1).unwrap();
        let recon = sample_surface(&mesh, 4000, 2).unwrap();
        let half_turn = SimilarityTransform::from_rotation(UnitQuaternion::from_axis_angle(
            &Vector3::z_axis(),
            std::f64::consts::PI,
        ));
        let input = result(half_turn);
        let spec = SymmetrySpec {
            axes: vec![SymmetryAxis {
                axis: [0.0, 0.0, 1.0],
                order: 2,
            }],
        };
        let out = symmetry_flip_correction(&input, &recon, &gt, &spec).unwrap();
        let flip = out.flip.as_ref().expect("flip selected");
        assert!(flip.cd_after < flip.cd_before);
        let angle = out
            .transform
            .rotation_angle_to(&SimilarityTransform::identity());
        assert!(angle.to_degrees() < 1.0, "{angle}");
    }

    #[test]
    fn optimal_alignment_is_retained() {
        let mesh = bumped_box();
        let gt = sample_surface(&mesh, 3000, 3).unwrap();
        let input = result(SimilarityTransform::identity());
        let spec = SymmetrySpec {
            axes: vec![
                SymmetryAxis {
                    axis: [0.0, 0.0, 1.0],
                    order: 2,
                },
                SymmetryAxis {
                    axis: [1.0, 0.0, 0.0],
                    order: 4,
                },
            ],
        };
        let out = symmetry_flip_correction(&input, &gt, &gt, &spec).unwrap();
        assert_eq!(out, input);
    }
}
