use nalgebra::{Matrix3, Point3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mesh::PointCloud;

/// Standard deviations along the three principal axes, largest first.
pub fn principal_stddevs(points: &[Point3<f64>]) -> Result<[f64; 3]> {
    if points.len() < 4 {
        return Err(Error::DegenerateCloud(format!(
            "{} points, need at least 4",
            points.len()
        )));
    }
    let c = crate::mesh::centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    if !(eig[0] > 0.0) || eig[2] <= 1e-12 * eig[0] {
        return Err(Error::DegenerateCloud(format!(
            "covariance rank < 3 (eigenvalues {:.3e}, {:.3e}, {:.3e})",
            eig[0], eig[1], eig[2]
        )));
    }
    Ok([eig[0].sqrt(), eig[1].sqrt(), eig[2].sqrt()])
}

/// Median over the principal axes of `gt std / recon std`.
pub fn estimate_scale(gt: &PointCloud, recon: &PointCloud) -> Result<f64> {
    let g = principal_stddevs(&gt.points)?;
    let r = principal_stddevs(&recon.points)?;
    let mut ratios = [g[0] / r[0], g[1] / r[1], g[2] / r[2]];
    ratios.sort_by(f64::total_cmp);
    Ok(ratios[1])
}
