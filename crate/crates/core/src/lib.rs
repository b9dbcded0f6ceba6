//! Evaluation of reconstructed meshes against ground truth for simulation use.
//!
//! The crate covers the whole metric pipeline: surface sampling and Chamfer
//! distance, similarity alignment with multi-start ICP (optionally masked by
//! camera visibility), occlusion-split error, mesh-mesh collision, resting-pose
//! stability under perturbation, parallel-jaw grasp transfer, and the
//! manifest-driven harness that turns all of it into per-scene reports and
//! pass/fail verdicts against the accuracy, collision, stability, occlusion and
//! latency thresholds.

// `!(x >= 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod collision;
pub mod error;
pub mod fixtures;
pub mod grasping;
pub mod harness;
pub mod mesh;
pub mod stability;
pub mod transform;
pub mod visibility;

pub use error::{Error, Result};
pub use mesh::{ChamferResult, NnIndex, PointCloud, TriangleMesh};
pub use transform::SimilarityTransform;

pub use nalgebra::{Point3, UnitQuaternion, Vector3};
