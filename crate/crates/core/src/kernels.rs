//! Kelvin matrix of the planar Lamé system, its analytic derivatives, the
//! traction kernel, and the rigid-motion basis.
//!
//! Convention: `L Gamma = delta I` with `L u = mu Lap u + (lambda + mu) grad div u`.
//! Derivative tensors are stored as `grad[k] = d_k Gamma` and
//! `hess[k][l] = d_k d_l Gamma`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::material::LameParams;

/// Scalar constants of the planar kernel, precomputed once per parameter pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelvinConstants {
    /// `alpha / 2pi`
    pub a: f64,
    /// `beta / 2pi`
    pub b: f64,
    /// `mu / (2 mu + lambda)`
    pub c: f64,
}

impl KelvinConstants {
    pub fn new(p: &LameParams) -> Self {
        Self {
            a: p.kelvin_alpha() / (2.0 * PI),
            b: p.kelvin_beta() / (2.0 * PI),
            c: p.traction_ratio(),
        }
    }

    #[inline]
    pub fn value(&self, z: &Point) -> Matrix2<f64> {
        let r2 = z.norm_squared();
        let log = 0.5 * self.a * r2.ln();
        let q = self.b / r2;
        Matrix2::new(
            log - q * z.x * z.x,
            -q * z.x * z.y,
            -q * z.x * z.y,
            log - q * z.y * z.y,
        )
    }

    #[inline]
    pub fn gradient(&self, z: &Point) -> [Matrix2<f64>; 2] {
        let r2 = z.norm_squared();
        let zz = [z.x, z.y];
        let mut out = [Matrix2::zeros(); 2];
        for (k, g) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let dij = (i == j) as u8 as f64;
                    let dik = (i == k) as u8 as f64;
                    let djk = (j == k) as u8 as f64;
                    g[(i, j)] = self.a * dij * zz[k] / r2 - self.b * (dik * zz[j] + djk * zz[i]) / r2
                        + 2.0 * self.b * zz[i] * zz[j] * zz[k] / (r2 * r2);
                }
            }
        }
        out
    }

    pub fn hessian(&self, z: &Point) -> [[Matrix2<f64>; 2]; 2] {
        let r2 = z.norm_squared();
        let r4 = r2 * r2;
        let r6 = r4 * r2;
        let zz = [z.x, z.y];
        let d = |p: usize, q: usize| (p == q) as u8 as f64;
        let mut out = [[Matrix2::zeros(); 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                let h = &mut out[k][l];
                for i in 0..2 {
                    for j in 0..2 {
                        let log_part = self.a * d(i, j) * (d(k, l) / r2 - 2.0 * zz[k] * zz[l] / r4);
                        let mid = -self.b
                            * ((d(i, k) * d(j, l) + d(j, k) * d(i, l)) / r2
                                - 2.0 * (d(i, k) * zz[j] + d(j, k) * zz[i]) * zz[l] / r4);
                        let cubic = 2.0
                            * self.b
                            * ((d(i, l) * zz[j] * zz[k] + d(j, l) * zz[i] * zz[k] + d(k, l) * zz[i] * zz[j])
                                / r4
                                - 4.0 * zz[i] * zz[j] * zz[k] * zz[l] / r6);
                        h[(i, j)] = log_part + mid + cubic;
                    }
                }
            }
        }
        out
    }

    /// Conormal derivative (w.r.t. `x`, normal `n`) of the columns of `Gamma(z)`.
    #[inline]
    pub fn traction(&self, z: &Point, n: &Point) -> Matrix2<f64> {
        let r2 = z.norm_squared();
        let zn = z.dot(n) / r2;
        let cross = (n.y * z.x - n.x * z.y) / r2;
        let s = 2.0 * (1.0 - self.c) * zn / r2;
        let inv = 1.0 / (2.0 * PI);
        Matrix2::new(
            inv * (self.c * zn + s * z.x * z.x),
            inv * (self.c * cross + s * z.x * z.y),
            inv * (-self.c * cross + s * z.x * z.y),
            inv * (self.c * zn + s * z.y * z.y),
        )
    }
}

/// Kelvin matrix and optional derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct KelvinEval {
    pub value: Matrix2<f64>,
    pub gradient: Option<[Matrix2<f64>; 2]>,
    pub hessian: Option<[[Matrix2<f64>; 2]; 2]>,
}

fn nonzero(x: &Point) -> Result<()> {
    if x.norm_squared() == 0.0 || !x.x.is_finite() || !x.y.is_finite() {
        Err(Error::SingularEvaluation)
    } else {
        Ok(())
    }
}

/// Planar Kelvin matrix `Gamma(x)`.
pub fn kelvin_matrix(p: &LameParams, x: &Point) -> Result<Matrix2<f64>> {
    p.require_planar()?;
    nonzero(x)?;
    Ok(KelvinConstants::new(p).value(x))
}

/// Three-dimensional Kelvin matrix. Provided for completeness; no solver uses it.
pub fn kelvin_matrix_3d(p: &LameParams, x: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if p.dim() != 3 {
        return Err(Error::UnsupportedDimension(p.dim()));
    }
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let a = p.kelvin_alpha() / (4.0 * PI);
    let b = p.kelvin_beta() / (4.0 * PI);
    Ok(Matrix3::identity() * (-a / r) - x * x.transpose() * (b / r.powi(3)))
}

/// Value plus analytic derivatives up to `order` (1 or 2).
pub fn kelvin_derivatives(p: &LameParams, x: &Point, order: usize) -> Result<KelvinEval> {
    if order == 0 || order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    p.require_planar()?;
    nonzero(x)?;
    let k = KelvinConstants::new(p);
    Ok(KelvinEval {
        value: k.value(x),
        gradient: Some(k.gradient(x)),
        hessian: (order == 2).then(|| k.hessian(x)),
    })
}

/// Matrix whose j-th column is the conormal derivative of the j-th Kelvin column at `x`.
pub fn traction_kernel(p: &LameParams, x: &Point, n: &Point) -> Result<Matrix2<f64>> {
    p.require_planar()?;
    nonzero(x)?;
    let len = n.norm();
    if (len - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitNormal(len));
    }
    Ok(KelvinConstants::new(p).traction(x, n))
}

/// Basis of infinitesimal rigid motions: two translations and the rotation `(-x2, x1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBasis {
    dim: usize,
}

pub const RIGID_DIM: usize = 3;

pub fn rigid_basis(d: usize) -> Result<RigidBasis> {
    match d {
        2 => Ok(RigidBasis { dim: 2 }),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

impl RigidBasis {
    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, l: usize, x: &Point) -> Point {
        rigid_field(l, x)
    }

    /// Constant gradient `grad[i][k] = d_k psi_i`.
    pub fn gradient(&self, l: usize) -> Matrix2<f64> {
        match l {
            0 | 1 => Matrix2::zeros(),
            _ => Matrix2::new(0.0, -1.0, 1.0, 0.0),
        }
    }
}

#[inline]
pub(crate) fn rigid_field(l: usize, x: &Point) -> Point {
    match l {
        0 => Point::new(1.0, 0.0),
        1 => Point::new(0.0, 1.0),
        _ => Point::new(-x.y, x.x),
    }
}
