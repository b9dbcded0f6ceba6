//! Antipodal parallel-jaw grasps sampled on one mesh and replayed on another.

mod gripper;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{bvh_pair_collision, Bvh, DEFAULT_CONTACT_EPSILON};
use crate::error::{Error, Result};
use crate::mesh::{sample_surface, TriangleMesh};
use crate::transform::SimilarityTransform;

use gripper::{close_fingers, pad_deviation, point_inside};
pub use gripper::{GraspPose, GripperSpec};

/// Largest pad-to-surface normal deviation (deg) for a successful transfer.
pub const DEFAULT_NORMAL_THRESHOLD: f64 = 22.5;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959964;

const APPROACH_TRIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspParams {
    pub gripper: GripperSpec,
    pub n_grasps: usize,
    /// Candidate draws per requested grasp before giving up.
    pub attempts_per_grasp: usize,
    pub normal_threshold: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            gripper: GripperSpec::default(),
            n_grasps: 100,
            attempts_per_grasp: 50,
            normal_threshold: DEFAULT_NORMAL_THRESHOLD,
        }
    }
}

impl GraspParams {
    pub fn validate(&self) -> Result<()> {
        self.gripper.validate()?;
        if self.n_grasps == 0 || self.attempts_per_grasp == 0 {
            return Err(Error::InvalidArgument(
                "grasping.n_grasps and attempts_per_grasp must be at least 1".into(),
            ));
        }
        if !(self.normal_threshold >= 0.0) {
            return Err(Error::InvalidArgument(
                "grasping.normal_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Mesh prepared for grasp queries.
pub struct GraspTarget {
    bvh: Bvh,
}

impl GraspTarget {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        Ok(Self {
            bvh: Bvh::build(mesh)?,
        })
    }

    /// Whether the open gripper overlaps the mesh surface or sits inside it.
    pub fn gripper_collides(&self, gripper: &GripperSpec, grasp: &GraspPose) -> Result<bool> {
        let body = Bvh::build(&gripper.open_body(grasp))?;
        if !body.root_aabb().overlaps(&self.bvh.root_aabb()) {
            return Ok(false);
        }
        if bvh_pair_collision(&body, &self.bvh, DEFAULT_CONTACT_EPSILON).in_collision {
            return Ok(true);
        }
        let half = gripper.max_opening / 2.0 + gripper.finger_thickness / 2.0;
        let along = grasp.approach_axis * (gripper.tip_offset - gripper.finger_depth / 2.0);
        let fingers = [
            grasp.center - grasp.closing_axis * half + along,
            grasp.center + grasp.closing_axis * half + along,
        ];
        Ok(fingers.iter().any(|p| point_inside(&self.bvh, p)))
    }
}

/// Grasps on `mesh` whose two contacts lie inside each other's friction cones.
///
/// Each attempt draws a surface point, shoots a ray into the mesh within the
/// friction cone of the inward normal and takes the first exit as the second
/// contact. The pair is kept when it fits the gripper, the exit normal is
/// within the cone, the open gripper is collision-free and closing the fingers
/// from the open configuration reproduces both contacts. Attempts use
/// independent random streams, so the result depends only on the mesh and seed.
pub fn sample_antipodal_grasps(
    mesh: &TriangleMesh,
    gripper: &GripperSpec,
    n_target: usize,
    seed: u64,
) -> Result<Vec<GraspPose>> {
    sample_with_budget(mesh, gripper, n_target, n_target.saturating_mul(50), seed)
}

pub fn sample_with_budget(
    mesh: &TriangleMesh,
    gripper: &GripperSpec,
    n_target: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<Vec<GraspPose>> {
    gripper.validate()?;
    if n_target == 0 || max_attempts == 0 {
        return Err(Error::InvalidArgument(
            "grasp count and attempt budget must be at least 1".into(),
        ));
    }
    let target = GraspTarget::new(mesh)?;
    let surface = sample_surface(mesh, max_attempts, seed)?;
    let normals = surface
        .normals
        .as_ref()
        .expect("surface samples carry normals");
    let mut grasps = Vec::new();
    const BATCH: usize = 256;
    let mut start = 0;
    while start < max_attempts && grasps.len() < n_target {
        let end = (start + BATCH).min(max_attempts);
        let batch: Vec<Option<GraspPose>> = (start..end)
            .into_par_iter()
            .map(|i| attempt(&target, gripper, &surface.points[i], &normals[i], seed, i))
            .collect::<Result<_>>()?;
        grasps.extend(batch.into_iter().flatten());
        start = end;
    }
    grasps.truncate(n_target);
    if grasps.is_empty() {
        return Err(Error::NoGraspsFound {
            attempts: max_attempts,
        });
    }
    Ok(grasps)
}

fn attempt(
    target: &GraspTarget,
    gripper: &GripperSpec,
    p: &Point3<f64>,
    n: &Vector3<f64>,
    seed: u64,
    index: usize,
) -> Result<Option<GraspPose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let cone = gripper.friction_cone_half_angle.to_radians();
    let inward = -n;
    let (u, v) = orthonormal_pair(&inward);
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cone.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let dir = (inward * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t).normalize();

    let eps = 1e-9 * target.bvh.root_aabb().extents().norm();
    let Some(exit) = target.bvh.ray_cast(p, &dir, eps, gripper.max_opening) else {
        return Ok(None);
    };
    if exit.normal.angle(&dir) > cone {
        return Ok(None);
    }

    let (a_perp, b_perp) = orthonormal_pair(&dir);
    let psi0 = rng.random::<f64>() * std::f64::consts::TAU;
    let center = Point3::from((p.coords + exit.point.coords) / 2.0);
    let (Some(ca), Some(cb)) = close_fingers(&target.bvh, &center, &dir, gripper.max_opening)
    else {
        return Ok(None);
    };
    let tol = 1e-6 * gripper.max_opening;
    if (ca.point - p).norm() > tol || (cb.point - exit.point).norm() > tol {
        return Ok(None);
    }
    if pad_deviation(&dir, &ca.normal) > gripper.friction_cone_half_angle
        || pad_deviation(&-dir, &cb.normal) > gripper.friction_cone_half_angle
    {
        return Ok(None);
    }
    // rotate the approach about the closing axis until the open gripper is clear
    for k in 0..APPROACH_TRIES {
        let psi = psi0 + std::f64::consts::TAU * k as f64 / APPROACH_TRIES as f64;
        let grasp = GraspPose {
            center,
            contact_a: ca.point,
            contact_b: cb.point,
            approach_axis: (a_perp * psi.cos() + b_perp * psi.sin()).normalize(),
            closing_axis: dir,
            width: (cb.point - ca.point).norm(),
        };
        if !target.gripper_collides(gripper, &grasp)? {
            return Ok(Some(grasp));
        }
    }
    Ok(None)
}

fn orthonormal_pair(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = n.cross(&helper).normalize();
    (u, n.cross(&u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferFailure {
    Collision,
    NoContact,
    NormalDeviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferVerdict {
    pub success: bool,
    pub collision_with_gt: bool,
    /// Pad-to-surface deviations (deg); absent when that finger found no contact.
    pub normal_deviation_a: Option<f64>,
    pub normal_deviation_b: Option<f64>,
    pub failure: Option<TransferFailure>,
}

/// Replays a grasp (already in the target frame) on the target mesh.
pub fn evaluate_transfer(
    grasp: &GraspPose,
    target: &GraspTarget,
    gripper: &GripperSpec,
    normal_threshold: f64,
) -> Result<TransferVerdict> {
    let collision = target.gripper_collides(gripper, grasp)?;
    let (ca, cb) = close_fingers(
        &target.bvh,
        &grasp.center,
        &grasp.closing_axis,
        gripper.max_opening,
    );
    let dev_a = ca.map(|c| pad_deviation(&grasp.closing_axis, &c.normal));
    let dev_b = cb.map(|c| pad_deviation(&-grasp.closing_axis, &c.normal));
    let failure = if collision {
        Some(TransferFailure::Collision)
    } else if dev_a.is_none() || dev_b.is_none() {
        Some(TransferFailure::NoContact)
    } else if dev_a.unwrap() > normal_threshold || dev_b.unwrap() > normal_threshold {
        Some(TransferFailure::NormalDeviation)
    } else {
        None
    };
    Ok(TransferVerdict {
        success: failure.is_none(),
        collision_with_gt: collision,
        normal_deviation_a: dev_a,
        normal_deviation_b: dev_b,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> Option<WilsonInterval> {
    if n == 0 || k > n {
        return None;
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // the closed form hits the bounds exactly at k = 0 and k = n
    Some(WilsonInterval {
        low: if k == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        high: if k == n {
            1.0
        } else {
            (center + half).min(1.0)
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTransferResult {
    pub rate: f64,
    pub n: usize,
    pub successes: usize,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub grasps: Vec<GraspPose>,
    pub verdicts: Vec<TransferVerdict>,
}

/// Samples grasps on the aligned reconstruction and replays them on the ground truth.
pub fn grasp_transfer_rate(
    recon: &TriangleMesh,
    gt: &TriangleMesh,
    alignment: &SimilarityTransform,
    params: &GraspParams,
    seed: u64,
) -> Result<GraspTransferResult> {
    params.validate()?;
    let aligned = recon.transformed(alignment);
    let grasps = sample_with_budget(
        &aligned,
        &params.gripper,
        params.n_grasps,
        params.n_grasps.saturating_mul(params.attempts_per_grasp),
        seed,
    )?;
    let target = GraspTarget::new(gt)?;
    let verdicts = grasps
        .par_iter()
        .map(|g| evaluate_transfer(g, &target, &params.gripper, params.normal_threshold))
        .collect::<Result<Vec<_>>>()?;
    let n = verdicts.len();
    let successes = verdicts.iter().filter(|v| v.success).count();
    let w = wilson_interval(successes, n, WILSON_Z).expect("at least one grasp");
    Ok(GraspTransferResult {
        rate: successes as f64 / n as f64,
        n,
        successes,
        wilson_low: w.low,
        wilson_high: w.high,
        grasps,
        verdicts,
    })
}
