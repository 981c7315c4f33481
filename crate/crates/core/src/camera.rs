//! Affine camera estimation from 2D/3D point correspondences and projection.
//!
//! Estimation follows the Gold Standard recipe for the affine case: both
//! point sets are isotropically normalized (centroid at the origin, mean
//! distance sqrt(2) in 2D and sqrt(3) in 3D), the two projective rows are
//! solved by orthogonal-decomposition least squares, and the result is
//! denormalized. For noise-free affine data the recovery is exact; in
//! general it minimizes total squared reprojection error.

use nalgebra::{DMatrix, Matrix3x4, Point2, Point3};
use thiserror::Error;

use crate::scalar::{self, Real};

/// Relative singular-value threshold for declaring the centered 3D point
/// configuration rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("point count mismatch: {points2d} 2D vs {points3d} 3D")]
    CountMismatch { points2d: usize, points3d: usize },
    #[error("need at least 4 correspondences for an affine camera, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate 3D configuration: centered rank < 3")]
    DegenerateConfiguration,
    #[error("least-squares solve failed")]
    SolveFailure,
}

/// 3x4 affine camera: the third row is exactly `[0, 0, 0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraMatrix<S: Real> {
    matrix: Matrix3x4<S>,
}

impl<S: Real> CameraMatrix<S> {
    /// Builds an affine camera from the two projective rows.
    pub fn from_rows(row_x: [S; 4], row_y: [S; 4]) -> Self {
        let mut matrix = Matrix3x4::zeros();
        for c in 0..4 {
            matrix[(0, c)] = row_x[c];
            matrix[(1, c)] = row_y[c];
        }
        matrix[(2, 3)] = S::one();
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix3x4<S> {
        &self.matrix
    }

    /// The 2x3 linear part (first two rows, first three columns).
    pub fn linear_part(&self) -> nalgebra::Matrix2x3<S> {
        self.matrix.fixed_view::<2, 3>(0, 0).into_owned()
    }

    /// The 2D translation (first two entries of the last column).
    pub fn translation(&self) -> nalgebra::Vector2<S> {
        nalgebra::Vector2::new(self.matrix[(0, 3)], self.matrix[(1, 3)])
    }

    /// Projects a 3D point: homogeneous product then dehomogenization.
    /// For the affine camera the divisor is exactly 1.
    pub fn project(&self, p: &Point3<S>) -> Point2<S> {
        let m = &self.matrix;
        let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] * p.z + m[(2, 3)];
        let x = m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)] * p.z + m[(0, 3)];
        let y = m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)] * p.z + m[(1, 3)];
        Point2::new(x / w, y / w)
    }

    /// Sum of squared reprojection errors over a correspondence set.
    pub fn reprojection_error_sq(&self, points2d: &[Point2<S>], points3d: &[Point3<S>]) -> S {
        points2d
            .iter()
            .zip(points3d)
            .map(|(x, p)| (self.project(p) - x).norm_squared())
            .fold(S::zero(), |acc, e| acc + e)
    }
}

/// Estimates the affine camera minimizing total squared reprojection error.
pub fn estimate_camera<S: Real>(
    points2d: &[Point2<S>],
    points3d: &[Point3<S>],
) -> Result<CameraMatrix<S>, CameraError> {
    if points2d.len() != points3d.len() {
        return Err(CameraError::CountMismatch {
            points2d: points2d.len(),
            points3d: points3d.len(),
        });
    }
    let m = points2d.len();
    if m < 4 {
        return Err(CameraError::TooFewPoints(m));
    }

    // Isotropic normalization of both sets.
    let mut centroid2 = nalgebra::Vector2::<S>::zeros();
    for p in points2d {
        centroid2 += p.coords;
    }
    centroid2 /= scalar::from_f64::<S>(m as f64);
    let mut centroid3 = nalgebra::Vector3::<S>::zeros();
    for p in points3d {
        centroid3 += p.coords;
    }
    centroid3 /= scalar::from_f64::<S>(m as f64);

    let mean_dist2 = points2d
        .iter()
        .map(|p| (p.coords - centroid2).norm())
        .fold(S::zero(), |a, d| a + d)
        / scalar::from_f64::<S>(m as f64);
    let mean_dist3 = points3d
        .iter()
        .map(|p| (p.coords - centroid3).norm())
        .fold(S::zero(), |a, d| a + d)
        / scalar::from_f64::<S>(m as f64);
    if mean_dist3.is_zero() {
        return Err(CameraError::DegenerateConfiguration);
    }
    let scale2 = if mean_dist2.is_zero() {
        // All image points coincide; any positive scale works.
        S::one()
    } else {
        scalar::from_f64::<S>(2.0f64.sqrt()) / mean_dist2
    };
    let scale3 = scalar::from_f64::<S>(3.0f64.sqrt()) / mean_dist3;

    // Normalized, centered design matrix (m x 3) and targets (m x 2).
    let mut design = DMatrix::<S>::zeros(m, 3);
    let mut targets = DMatrix::<S>::zeros(m, 2);
    for i in 0..m {
        let q = (points3d[i].coords - centroid3) * scale3;
        design[(i, 0)] = q.x;
        design[(i, 1)] = q.y;
        design[(i, 2)] = q.z;
        let r = (points2d[i].coords - centroid2) * scale2;
        targets[(i, 0)] = r.x;
        targets[(i, 1)] = r.y;
    }

    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values[0];
    let s_min = svd.singular_values[svd.singular_values.len() - 1];
    if s_min <= s_max * scalar::from_f64(RANK_TOLERANCE) {
        return Err(CameraError::DegenerateConfiguration);
    }
    let solution = svd
        .solve(&targets, S::default_epsilon())
        .map_err(|_| CameraError::SolveFailure)?;

    // Denormalize: rows of the linear part scale by scale3/scale2 and the
    // translation restores both centroids.
    let ratio = scale3 / scale2;
    let mut linear = nalgebra::Matrix2x3::<S>::zeros();
    for r in 0..2 {
        for c in 0..3 {
            linear[(r, c)] = solution[(c, r)] * ratio;
        }
    }
    let translation = centroid2 - linear * centroid3;
    Ok(CameraMatrix::from_rows(
        [linear[(0, 0)], linear[(0, 1)], linear[(0, 2)], translation.x],
        [linear[(1, 0)], linear[(1, 1)], linear[(1, 2)], translation.y],
    ))
}
