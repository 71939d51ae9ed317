//! Lamé parameter pairs, derived constants and the isotropic elasticity tensor.

use nalgebra::Matrix2;

use crate::error::{Error, Result};

/// An isotropic Lamé pair `(lambda, mu)` in dimension `dim`.
///
/// Construction enforces strong convexity (`mu > 0`, `dim*lambda + 2*mu > 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    lambda: f64,
    mu: f64,
    dim: usize,
}

impl LameParams {
    pub fn new(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let value = dim as f64 * lambda + 2.0 * mu;
        if !(mu > 0.0) || !(value > 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return Err(Error::StrongConvexity { mu, dim, value });
        }
        Ok(Self { lambda, mu, dim })
    }

    /// Planar parameters; shorthand for `new(lambda, mu, 2)`.
    pub fn planar(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(lambda, mu, 2)
    }

    /// Planar parameters from bulk and shear moduli, `lambda = kappa - mu`.
    pub fn from_bulk_shear(kappa: f64, mu: f64) -> Result<Self> {
        Self::new(kappa - mu, mu, 2)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bulk modulus `lambda + 2 mu / d`.
    pub fn kappa(&self) -> f64 {
        self.lambda + 2.0 * self.mu / self.dim as f64
    }

    /// Coefficient of the `delta_ij` part of the Kelvin matrix.
    pub fn kelvin_alpha(&self) -> f64 {
        0.5 * (1.0 / self.mu + 1.0 / (2.0 * self.mu + self.lambda))
    }

    /// Coefficient of the `x_i x_j` part of the Kelvin matrix.
    pub fn kelvin_beta(&self) -> f64 {
        0.5 * (1.0 / self.mu - 1.0 / (2.0 * self.mu + self.lambda))
    }

    /// `mu / (2 mu + lambda)`, the weight of the Cauchy-singular part of the traction kernel.
    pub(crate) fn traction_ratio(&self) -> f64 {
        self.mu / (2.0 * self.mu + self.lambda)
    }

    pub(crate) fn require_planar(&self) -> Result<()> {
        if self.dim == 2 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(self.dim))
        }
    }
}

/// `lambda tr(e) I + 2 mu e` for a symmetric strain `e`.
pub fn apply_elasticity_tensor(p: &LameParams, strain: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::identity() * (p.lambda * strain.trace()) + strain * (2.0 * p.mu)
}

/// `C e : e` for a symmetric strain.
pub fn strain_energy_density(p: &LameParams, strain: &Matrix2<f64>) -> f64 {
    let tr = strain.trace();
    p.lambda * tr * tr + 2.0 * p.mu * strain.component_mul(strain).sum()
}

/// Background and inclusion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastPair {
    pub background: LameParams,
    pub inclusion: LameParams,
}

impl ContrastPair {
    /// Builds the pair; a pair violating `(lambda - lambda0)(mu - mu0) > 0` is
    /// still accepted but logged, since the discrete system stays solvable.
    pub fn new(background: LameParams, inclusion: LameParams) -> Self {
        let pair = Self {
            background,
            inclusion,
        };
        if !pair.admissible() {
            log::warn!(
                "contrast ({}, {}) -> ({}, {}) fails (lambda-lambda0)(mu-mu0) > 0",
                background.lambda,
                background.mu,
                inclusion.lambda,
                inclusion.mu
            );
        }
        pair
    }

    pub fn admissible(&self) -> bool {
        check_contrast(self)
    }

    pub fn is_zero_contrast(&self) -> bool {
        self.background == self.inclusion
    }
}

/// True iff `(lambda - lambda0)(mu - mu0) > 0`.
pub fn check_contrast(pair: &ContrastPair) -> bool {
    (pair.inclusion.lambda - pair.background.lambda) * (pair.inclusion.mu - pair.background.mu)
        > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn kelvin_constants() {
        let p = LameParams::new(0.0, 1.0, 2).unwrap();
        assert_relative_eq!(p.kelvin_alpha(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(p.kelvin_beta(), 0.25, epsilon = 1e-15);
        let q = LameParams::new(1.0, 2.0, 2).unwrap();
        assert_relative_eq!(q.kappa(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_convex() {
        assert!(matches!(
            LameParams::new(-2.0, 1.0, 2),
            Err(Error::StrongConvexity { .. })
        ));
        assert!(LameParams::new(1.0, 0.0, 2).is_err());
        assert!(LameParams::new(1.0, 1.0, 4).is_err());
        // 3D accepts what 2D rejects: 3*(-0.9) + 2 < 0 but 2*(-0.9)+2 > 0.
        assert!(LameParams::new(-0.9, 1.0, 2).is_ok());
        assert!(LameParams::new(-0.9, 1.0, 3).is_err());
    }

    #[test]
    fn elasticity_tensor_examples() {
        let p = LameParams::new(0.0, 1.0, 2).unwrap();
        let i = Matrix2::identity();
        assert_relative_eq!(apply_elasticity_tensor(&p, &i), i * 2.0);
        let q = LameParams::new(1.0, 0.5, 2).unwrap();
        assert_relative_eq!(apply_elasticity_tensor(&q, &i), i * 3.0);
        assert_eq!(apply_elasticity_tensor(&q, &Matrix2::zeros()), Matrix2::zeros());
    }

    #[test]
    fn contrast_examples() {
        let p = |l, m| LameParams::planar(l, m).unwrap();
        assert!(check_contrast(&ContrastPair::new(p(1.0, 1.0), p(2.0, 2.0))));
        assert!(!check_contrast(&ContrastPair::new(p(1.0, 1.0), p(2.0, 0.5))));
        assert!(!check_contrast(&ContrastPair::new(p(1.0, 1.0), p(1.0, 2.0))));
    }

    proptest! {
        #[test]
        fn alpha_dominates_beta(lambda in -0.99f64..50.0, mu in 0.01f64..100.0) {
            let p = LameParams::planar(lambda * mu, mu).unwrap();
            prop_assert!(p.kelvin_alpha() > 0.0);
            if p.lambda() >= 0.0 {
                prop_assert!(p.kelvin_alpha() >= p.kelvin_beta());
            }
            if p.lambda() > 0.0 {
                prop_assert!(p.kelvin_beta() > 0.0);
            }
            prop_assert_eq!(p.kappa(), p.lambda() + p.mu());
        }

        #[test]
        fn tensor_linear_and_symmetric(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            d in -5.0f64..5.0, e in -5.0f64..5.0, f in -5.0f64..5.0, s in -3.0f64..3.0,
        ) {
            let p = LameParams::planar(0.7, 1.3).unwrap();
            let x = Matrix2::new(a, b, b, c);
            let y = Matrix2::new(d, e, e, f);
            let lhs = apply_elasticity_tensor(&p, &(x + y * s));
            let rhs = apply_elasticity_tensor(&p, &x) + apply_elasticity_tensor(&p, &y) * s;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            prop_assert!((lhs - lhs.transpose()).norm() == 0.0);
        }
    }
}
