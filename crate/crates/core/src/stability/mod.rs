//! Resting-pose stability: candidate orientations on a plane near the scene
//! pose, checked by settling perturbed copies.

mod hull;
mod resting;
mod sim;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

pub use hull::{convex_hull, convex_hull_2d, polygon_area, polygon_margin, ConvexHull};
pub use resting::{
    enumerate_resting_orientations, enumerate_with_tolerance, filter_near_scene_pose, tilt_between,
    RestingPose, DEFAULT_ELEVATION_TOL,
};
pub use sim::{settle, RigidBody, SettleResult, SimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    /// Largest tilt (deg) from the scene pose for a candidate.
    pub max_tilt: f64,
    pub n_perturbations: usize,
    /// Perturbation tilt (deg).
    pub perturb_angle: f64,
    /// Largest final up-direction deviation (deg) that counts as reverting.
    pub revert_tol: f64,
    /// Largest horizontal COM drift (m) that counts as reverting.
    pub drift_tol: f64,
    pub elevation_tol: f64,
    /// Require every perturbation to revert instead of at least one.
    pub require_all: bool,
    pub sim: SimParams,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            max_tilt: 5.0,
            n_perturbations: 8,
            perturb_angle: 5.0,
            revert_tol: 2.0,
            drift_tol: 0.005,
            elevation_tol: DEFAULT_ELEVATION_TOL,
            require_all: false,
            sim: SimParams::default(),
        }
    }
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_tilt > 0.0 && self.max_tilt < 90.0) {
            return Err(Error::InvalidArgument(
                "stability.max_tilt must be in (0, 90) degrees".into(),
            ));
        }
        if self.n_perturbations == 0 {
            return Err(Error::InvalidArgument(
                "stability.n_perturbations must be at least 1".into(),
            ));
        }
        if !(self.perturb_angle > 0.0
            && self.revert_tol >= 0.0
            && self.drift_tol >= 0.0
            && self.elevation_tol >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "stability angles and tolerances must be non-negative".into(),
            ));
        }
        self.sim.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRun {
    /// Direction of the tilt in the plane (deg).
    pub azimuth: f64,
    pub reverted: bool,
    /// Up-direction deviation from the unperturbed pose after settling (deg).
    pub final_tilt: f64,
    /// Horizontal COM distance from the unperturbed resting position (m).
    pub com_drift: f64,
    pub max_penetration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrial {
    pub pose: RestingPose,
    pub runs: Vec<PerturbationRun>,
    pub reverted: usize,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub has_stable_pose_near_scene: bool,
    pub candidate_poses: Vec<RestingPose>,
    pub surviving_pose: Option<RestingPose>,
    /// Reverted runs of the surviving pose, or the best candidate when none survives.
    pub perturbations_reverted: usize,
    pub n_perturbations: usize,
    pub trials: Vec<CandidateTrial>,
}

/// Whether `mesh`, held at `scene_rotation` (body to world, z up), has a
/// resting pose nearby that recovers from tilting perturbations.
pub fn stability_verdict(
    mesh: &TriangleMesh,
    scene_rotation: &UnitQuaternion<f64>,
    params: &StabilityParams,
) -> Result<StabilityVerdict> {
    params.validate()?;
    let all = enumerate_with_tolerance(mesh, params.elevation_tol)?;
    let candidates = filter_near_scene_pose(&all, scene_rotation, params.max_tilt);
    let body = RigidBody::from_mesh(mesh)?;

    let n = params.n_perturbations;
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..n).map(move |k| (c, k)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(c, k)| {
            perturb_and_settle(&body, &candidates[c], 360.0 * k as f64 / n as f64, params)
        })
        .collect::<Result<Vec<_>>>()?;

    let trials: Vec<CandidateTrial> = candidates
        .iter()
        .enumerate()
        .map(|(c, pose)| {
            let runs = runs[c * n..(c + 1) * n].to_vec();
            let reverted = runs.iter().filter(|r| r.reverted).count();
            let stable = if params.require_all {
                reverted == n
            } else {
                reverted >= 1
            };
            CandidateTrial {
                pose: pose.clone(),
                runs,
                reverted,
                stable,
            }
        })
        .collect();

    let surviving = trials.iter().find(|t| t.stable);
    let perturbations_reverted = match surviving {
        Some(t) => t.reverted,
        None => trials.iter().map(|t| t.reverted).max().unwrap_or(0),
    };
    Ok(StabilityVerdict {
        has_stable_pose_near_scene: surviving.is_some(),
        surviving_pose: surviving.map(|t| t.pose.clone()),
        candidate_poses: candidates,
        perturbations_reverted,
        n_perturbations: n,
        trials,
    })
}

/// Tilts the resting body by the perturbation angle about a horizontal axis
/// through the support point furthest along `azimuth`, then settles it.
fn perturb_and_settle(
    body: &RigidBody,
    pose: &RestingPose,
    azimuth: f64,
    params: &StabilityParams,
) -> Result<PerturbationRun> {
    let dir = Vector3::new(azimuth.to_radians().cos(), azimuth.to_radians().sin(), 0.0);
    let pivot_xy = pose
        .support_polygon
        .iter()
        .copied()
        .max_by(|a, b| (a[0] * dir.x + a[1] * dir.y).total_cmp(&(b[0] * dir.x + b[1] * dir.y)))
        .unwrap_or([0.0, 0.0]);
    let com0 = body.resting_com(&pose.rotation);
    let pivot = Point3::new(pivot_xy[0], pivot_xy[1], 0.0);
    let axis = nalgebra::Unit::new_normalize(Vector3::z().cross(&dir));
    let tilt = UnitQuaternion::from_axis_angle(&axis, params.perturb_angle.to_radians());
    let start_rotation = tilt * pose.rotation;
    let start_com = pivot + tilt * (com0 - pivot);

    let result = body.simulate(start_rotation, start_com, &params.sim)?;
    let final_tilt = tilt_between(&result.final_rotation, &pose.rotation);
    let com_drift = (result.final_com.x - com0.x).hypot(result.final_com.y - com0.y);
    Ok(PerturbationRun {
        azimuth,
        reverted: final_tilt <= params.revert_tol && com_drift < params.drift_tol,
        final_tilt,
        com_drift,
        max_penetration: result.max_penetration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fast() -> StabilityParams {
        StabilityParams {
            sim: SimParams {
                duration: 3.0,
                ..SimParams::default()
            },
            ..StabilityParams::default()
        }
    }

    #[test]
    fn upright_cube_reverts_every_perturbation() {
        let v = stability_verdict(
            &fixtures::cube(0.1),
            &UnitQuaternion::identity(),
            &StabilityParams::default(),
        )
        .unwrap();
        assert!(v.has_stable_pose_near_scene);
        assert_eq!(v.candidate_poses.len(), 1);
        assert_eq!(v.perturbations_reverted, 8);
        assert!(v.trials[0].runs.iter().all(|r| r.max_penetration < 1e-3));
    }

    /// Square-based box whose edge tipping angle is `critical` degrees.
    fn critical_box(critical: f64) -> TriangleMesh {
        let hh = 0.1;
        let hw = hh * critical.to_radians().tan();
        fixtures::cuboid(2.0 * hw, 2.0 * hw, 2.0 * hh)
    }

    #[test]
    fn agrees_with_critical_angle_oracle() {
        for critical in [2.0, 10.0, 30.0] {
            let v = stability_verdict(
                &critical_box(critical),
                &UnitQuaternion::identity(),
                &fast(),
            )
            .unwrap();
            // quasi-static tipping: a 5° tilt is recovered iff it stays below the critical angle
            assert_eq!(
                v.has_stable_pose_near_scene,
                critical > 5.0,
                "critical {critical}°"
            );
        }
    }

    #[test]
    fn icosphere_rolls_away() {
        let v = stability_verdict(
            &fixtures::icosphere(0.05, 4),
            &UnitQuaternion::identity(),
            &fast(),
        )
        .unwrap();
        assert!(!v.candidate_poses.is_empty());
        assert!(!v.has_stable_pose_near_scene);
        assert!(v.surviving_pose.is_none());
    }

    #[test]
    fn lying_box_has_no_candidate_near_upright_scene_pose() {
        let lying =
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let mesh = fixtures::cuboid(0.05, 0.05, 0.2);
        let all = enumerate_resting_orientations(&mesh).unwrap();
        assert!(filter_near_scene_pose(&all, &lying, 5.0)
            .iter()
            .all(|p| p.tilt_from_scene <= 5.0));
        let v = stability_verdict(&mesh, &lying, &fast()).unwrap();
        assert!(v.has_stable_pose_near_scene);
        let up = v.surviving_pose.unwrap().body_up();
        assert!(up.z.abs() < 1e-9);
    }

    #[test]
    fn strict_mode_requires_every_run() {
        // critical angle ~7°: tipping along an edge is recovered, and so is every diagonal
        let mesh = critical_box(7.0);
        let loose = stability_verdict(&mesh, &UnitQuaternion::identity(), &fast()).unwrap();
        let strict = stability_verdict(
            &mesh,
            &UnitQuaternion::identity(),
            &StabilityParams {
                require_all: true,
                ..fast()
            },
        )
        .unwrap();
        assert!(loose.has_stable_pose_near_scene);
        assert_eq!(
            strict.has_stable_pose_near_scene,
            loose.perturbations_reverted == 8
        );
    }

    #[test]
    fn rejects_bad_params() {
        let p = StabilityParams {
            max_tilt: 0.0,
            ..StabilityParams::default()
        };
        assert!(stability_verdict(&fixtures::cube(0.1), &UnitQuaternion::identity(), &p).is_err());
    }
}
