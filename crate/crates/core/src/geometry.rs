//! Points, moment accumulation and the 3×3 symmetric eigensolver.
//!
//! A [`PointCluster`] keeps the count, first moment and second moment of a
//! point set, so the covariance of any set and the union of two sets are both
//! O(1). Every plane statistic in the crate is derived from one.

use std::ops::{Add, AddAssign};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in meters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn from_coords(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vector3<f64>> for Point3 {
    fn from(v: Vector3<f64>) -> Self {
        Self::from_coords(&v)
    }
}

/// Rejects the first non-finite point.
pub fn validate_points(points: &[Point3]) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(index) => Err(Error::NonFinitePoint { index }),
        None => Ok(()),
    }
}

/// Running moments of a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCluster {
    pub n: usize,
    pub sum: Vector3<f64>,
    pub sq_sum: Matrix3<f64>,
}

impl Default for PointCluster {
    fn default() -> Self {
        Self::empty()
    }
}

impl PointCluster {
    pub fn empty() -> Self {
        Self {
            n: 0,
            sum: Vector3::zeros(),
            sq_sum: Matrix3::zeros(),
        }
    }

    /// Moments of `points`. All points must be finite.
    pub fn accumulate(points: &[Point3]) -> Result<Self> {
        validate_points(points)?;
        let mut c = Self::empty();
        for p in points {
            c.push(p);
        }
        Ok(c)
    }

    /// Moments of `points[i]` for every `i` in `indices`. No validation.
    pub fn accumulate_indexed(points: &[Point3], indices: &[usize]) -> Self {
        let mut c = Self::empty();
        for &i in indices {
            c.push(&points[i]);
        }
        c
    }

    #[inline]
    pub fn push(&mut self, p: &Point3) {
        let v = p.coords();
        self.n += 1;
        self.sum += v;
        // Only the upper triangle is accumulated; mirrored on read.
        let s = &mut self.sq_sum;
        s[(0, 0)] += v.x * v.x;
        s[(0, 1)] += v.x * v.y;
        s[(0, 2)] += v.x * v.z;
        s[(1, 1)] += v.y * v.y;
        s[(1, 2)] += v.y * v.z;
        s[(2, 2)] += v.z * v.z;
        s[(1, 0)] = s[(0, 1)];
        s[(2, 0)] = s[(0, 2)];
        s[(2, 1)] = s[(1, 2)];
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sq_sum: self.sq_sum + other.sq_sum,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn centroid(&self) -> Result<Point3> {
        if self.n == 0 {
            return Err(Error::EmptyCluster);
        }
        Ok(Point3::from_coords(&(self.sum / self.n as f64)))
    }

    /// Covariance `sq_sum/n - c·cᵀ` (symmetrized) and the centroid `c`.
    pub fn covariance(&self) -> Result<(Matrix3<f64>, Point3)> {
        if self.n == 0 {
            return Err(Error::EmptyCluster);
        }
        let inv_n = 1.0 / self.n as f64;
        let c = self.sum * inv_n;
        let cov = self.sq_sum * inv_n - c * c.transpose();
        let cov = (cov + cov.transpose()) * 0.5;
        Ok((cov, Point3::from_coords(&c)))
    }

    /// Magnitude below which a covariance eigenvalue of this cluster is
    /// indistinguishable from rounding noise in the moment formula.
    pub fn roundoff_floor(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mean_sq = self.sq_sum.trace() / self.n as f64;
        1024.0 * f64::EPSILON * mean_sq
    }
}

impl Add for PointCluster {
    type Output = PointCluster;

    fn add(self, rhs: Self) -> Self {
        self.merge(&rhs)
    }
}

impl AddAssign for PointCluster {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.merge(&rhs);
    }
}

impl<'a> FromIterator<&'a Point3> for PointCluster {
    fn from_iter<I: IntoIterator<Item = &'a Point3>>(iter: I) -> Self {
        let mut c = Self::empty();
        for p in iter {
            c.push(p);
        }
        c
    }
}

/// Eigenvalues sorted descending with matching unit eigenvectors as the
/// columns of `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDecomposition {
    pub lambda: [f64; 3],
    pub u: Matrix3<f64>,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vector3<f64> {
        self.u.column(k).into_owned()
    }

    /// Eigenvector of the smallest eigenvalue.
    pub fn normal(&self) -> Vector3<f64> {
        self.vector(2)
    }

    /// `Σ λ_k u_k u_kᵀ`.
    pub fn reconstruct(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for k in 0..3 {
            let v = self.vector(k);
            m += v * v.transpose() * self.lambda[k];
        }
        m
    }
}

/// Relative eigenvalue gap below which the closed form hands over to Jacobi.
const DEGENERATE_GAP: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-11;

/// Eigendecomposition of a symmetric 3×3 matrix.
///
/// Closed-form trigonometric roots with cross-product eigenvectors; falls
/// back to cyclic Jacobi rotations when two eigenvalues are nearly equal or
/// the closed-form residual is poor. Each eigenvector is sign-normalized so
/// its largest-magnitude component is positive.
pub fn eigen_symmetric3(m: &Matrix3<f64>) -> Result<EigenDecomposition> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let a = (m + m.transpose()) * 0.5;
    let scale = a.amax();
    if scale == 0.0 {
        return Ok(EigenDecomposition {
            lambda: [0.0; 3],
            u: Matrix3::identity(),
        });
    }
    let b = a / scale;
    let (lambda, u) = closed_form(&b).unwrap_or_else(|| jacobi(&b));
    let mut u = u;
    for k in 0..3 {
        let col = u.column(k).into_owned();
        let mut imax = 0;
        for i in 1..3 {
            if col[i].abs() > col[imax].abs() {
                imax = i;
            }
        }
        if col[imax] < 0.0 {
            u.set_column(k, &(-col));
        }
    }
    Ok(EigenDecomposition {
        lambda: [lambda[0] * scale, lambda[1] * scale, lambda[2] * scale],
        u,
    })
}

fn closed_form(a: &Matrix3<f64>) -> Option<([f64; 3], Matrix3<f64>)> {
    let q = a.trace() / 3.0;
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return None;
    }
    let bm = (a - Matrix3::identity() * q) / p;
    let r = (bm.determinant() * 0.5).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let l2 = 3.0 * q - l1 - l3;
    let mut lambda = [l1, l2, l3];
    lambda.sort_by(|x, y| y.total_cmp(x));

    let span = lambda[0].abs().max(lambda[2].abs()).max(f64::MIN_POSITIVE);
    let gap = (lambda[0] - lambda[1]).min(lambda[1] - lambda[2]);
    if gap < DEGENERATE_GAP * span {
        return None;
    }

    let u1 = null_vector(a, lambda[0])?;
    let mut u3 = null_vector(a, lambda[2])?;
    u3 -= u1 * u1.dot(&u3);
    let u3 = u3.try_normalize(0.0)?;
    let u2 = u3.cross(&u1);
    let u = Matrix3::from_columns(&[u1, u2, u3]);

    let norm = a.norm().max(1.0);
    for (k, &l) in lambda.iter().enumerate() {
        let v = u.column(k);
        if (a * v - v * l).norm() > RESIDUAL_TOL * norm {
            return None;
        }
    }
    Some((lambda, u))
}

/// Unit vector spanning the null space of `a - λI`, from the best-conditioned
/// cross product of its rows.
fn null_vector(a: &Matrix3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let s = a - Matrix3::identity() * lambda;
    let r0 = s.row(0).transpose();
    let r1 = s.row(1).transpose();
    let r2 = s.row(2).transpose();
    let cands = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = cands
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    best.try_normalize(0.0)
}

/// Cyclic Jacobi rotations on a symmetric matrix with entries of order one.
fn jacobi(a: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let mut d = *a;
    let mut v = Matrix3::<f64>::identity();
    for _sweep in 0..64 {
        let off = d[(0, 1)].powi(2) + d[(0, 2)].powi(2) + d[(1, 2)].powi(2);
        if off < 1e-36 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = d[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (d[(q, q)] - d[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::<f64>::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            d = rot.transpose() * d * rot;
            d[(p, q)] = 0.0;
            d[(q, p)] = 0.0;
            v *= rot;
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| d[(j, j)].total_cmp(&d[(i, i)]));
    let lambda = [
        d[(order[0], order[0])],
        d[(order[1], order[1])],
        d[(order[2], order[2])],
    ];
    let u = Matrix3::from_columns(&[
        v.column(order[0]).into_owned(),
        v.column(order[1]).into_owned(),
        v.column(order[2]).into_owned(),
    ]);
    (lambda, u)
}

/// Principal axes of a cluster: eigendecomposition of its covariance plus
/// the centroid.
pub fn principal_axes(cluster: &PointCluster) -> Result<(EigenDecomposition, Point3)> {
    let (cov, centroid) = cluster.covariance()?;
    Ok((eigen_symmetric3(&cov)?, centroid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass_cov(points: &[Point3]) -> Matrix3<f64> {
        let n = points.len() as f64;
        let c = points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords())
            / n;
        points.iter().fold(Matrix3::zeros(), |acc, p| {
            let d = p.coords() - c;
            acc + d * d.transpose()
        }) / n
    }

    #[test]
    fn empty_accumulate() {
        let c = PointCluster::accumulate(&[]).unwrap();
        assert_eq!(c.n, 0);
        assert_eq!(c.sum, Vector3::zeros());
        assert_eq!(c.sq_sum, Matrix3::zeros());
        assert!(matches!(c.covariance(), Err(Error::EmptyCluster)));
    }

    #[test]
    fn symmetric_pair() {
        let c =
            PointCluster::accumulate(&[Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)])
                .unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.sum, Vector3::zeros());
        assert_eq!(
            c.sq_sum,
            Matrix3::from_diagonal(&Vector3::new(2.0, 0.0, 0.0))
        );
    }

    #[test]
    fn rejects_non_finite() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(f64::NAN, 0.0, 0.0)];
        assert!(matches!(
            PointCluster::accumulate(&pts),
            Err(Error::NonFinitePoint { index: 1 })
        ));
        let mut m = Matrix3::identity();
        m[(1, 2)] = f64::INFINITY;
        assert!(matches!(eigen_symmetric3(&m), Err(Error::NonFiniteMatrix)));
    }

    #[test]
    fn single_point_covariance() {
        let p = Point3::new(3.0, -2.0, 7.5);
        let (cov, c) = PointCluster::accumulate(&[p])
            .unwrap()
            .covariance()
            .unwrap();
        assert_eq!(c, p);
        assert!(cov.amax() < 1e-12);
    }

    #[test]
    fn unit_square_covariance() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let (cov, c) = PointCluster::accumulate(&pts)
            .unwrap()
            .covariance()
            .unwrap();
        assert_eq!(c, Point3::new(0.5, 0.5, 0.0));
        let expected = Matrix3::from_diagonal(&Vector3::new(0.25, 0.25, 0.0));
        assert!((cov - expected).amax() < 1e-15);
        assert!((cov - two_pass_cov(&pts)).amax() < 1e-15);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let a =
            PointCluster::accumulate(&[Point3::new(1.0, 2.0, 3.0), Point3::new(-4.0, 0.5, 2.0)])
                .unwrap();
        let b = PointCluster::accumulate(&[Point3::new(0.1, 0.2, 0.3)]).unwrap();
        assert_eq!(a.merge(&PointCluster::empty()), a);
        assert_eq!(a + b, b + a);
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let e = eigen_symmetric3(&Matrix3::identity()).unwrap();
        assert_eq!(e.lambda, [1.0, 1.0, 1.0]);
        assert!((e.u.transpose() * e.u - Matrix3::identity()).amax() < 1e-12);

        let e = eigen_symmetric3(&Matrix3::from_diagonal(&Vector3::new(1.0, 3.0, 2.0))).unwrap();
        assert!((e.lambda[0] - 3.0).abs() < 1e-12);
        assert!((e.lambda[1] - 2.0).abs() < 1e-12);
        assert!((e.lambda[2] - 1.0).abs() < 1e-12);
        assert!((e.vector(0) - Vector3::y()).norm() < 1e-9);
        assert!((e.vector(1) - Vector3::z()).norm() < 1e-9);
        assert!((e.vector(2) - Vector3::x()).norm() < 1e-9);
    }

    #[test]
    fn zero_matrix() {
        let e = eigen_symmetric3(&Matrix3::zeros()).unwrap();
        assert_eq!(e.lambda, [0.0; 3]);
    }

    #[test]
    fn near_degenerate_uses_orthonormal_basis() {
        let mut m = Matrix3::from_diagonal(&Vector3::new(2.0, 2.0 + 1e-9, 0.5));
        m[(0, 1)] = 1e-10;
        m[(1, 0)] = 1e-10;
        let e = eigen_symmetric3(&m).unwrap();
        assert!((e.u.transpose() * e.u - Matrix3::identity()).amax() < 1e-9);
        assert!((e.reconstruct() - m).norm() < 1e-9);
        assert!((e.lambda[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let m = Matrix3::new(2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0);
        let e = eigen_symmetric3(&m).unwrap();
        for k in 0..3 {
            let v = e.vector(k);
            let imax = v.iamax();
            assert!(v[imax] > 0.0);
        }
    }

    #[test]
    fn deterministic() {
        let m = Matrix3::new(4.0, 1.0, 0.3, 1.0, 3.0, -0.2, 0.3, -0.2, 1.0);
        assert_eq!(eigen_symmetric3(&m).unwrap(), eigen_symmetric3(&m).unwrap());
    }
}
