//! Small-inclusion expansion of the boundary displacement:
//!
//! `u(x) ~ U(x) - sum_j sum_alpha sum_beta eps^{|alpha|+|beta|} / (alpha! beta!)
//!         d^alpha U_j(z0) d_z^beta N(x, z0) M^j_{alpha beta}(B)`
//!
//! for `x` on `dOmega`, summed over the `(|alpha|, |beta|)` blocks
//! `(1,1), (1,2), (2,1)`.

use std::collections::BTreeMap;

use nalgebra::Matrix2;

use crate::bvp::{field_derivatives, BackgroundOperator, BackgroundSolution};
use crate::emt::{factorial, multi_indices, EmtTable, MultiIndex, ORDER_BLOCKS};
use crate::error::{Error, Result};
use crate::freespace::BackgroundField;
use crate::geometry::Point;
use crate::potentials::Density;

/// Inclusion-independent ingredients of the expansion at one centre `z0`.
#[derive(Debug, Clone)]
pub struct ExpansionData {
    pub z0: Point,
    /// `U` on the nodes of `dOmega`.
    pub u_boundary: Density,
    /// `d^alpha U(z0)` for `|alpha| in {1, 2}`.
    pub u_derivatives: BTreeMap<MultiIndex, Point>,
    /// `d_z^beta N(x_m, z0)` on the nodes of `dOmega` for `|beta| in {1, 2}`.
    pub n_derivatives: BTreeMap<MultiIndex, Vec<Matrix2<f64>>>,
}

impl ExpansionData {
    pub fn new(op: &BackgroundOperator, u: &BackgroundSolution, z0: &Point) -> Result<Self> {
        let nf = op.neumann_function(z0)?;
        let mut u_derivatives = BTreeMap::new();
        let mut n_derivatives = BTreeMap::new();
        for ord in 1..=2 {
            for a in multi_indices(ord) {
                u_derivatives.insert(a, field_derivatives(u, z0, a)?);
                n_derivatives.insert(a, nf.pole_derivative(a)?);
            }
        }
        Ok(Self {
            z0: *z0,
            u_boundary: u.trace.clone(),
            u_derivatives,
            n_derivatives,
        })
    }

    /// The same data with `d^alpha U(z0)` replaced by `d^alpha h(z0)`.
    pub fn with_field_derivatives(&self, h: &BackgroundField) -> Result<Self> {
        let mut out = self.clone();
        for (a, v) in out.u_derivatives.iter_mut() {
            *v = h.derivative(&self.z0, *a)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExpansionInput<'a> {
    pub data: &'a ExpansionData,
    pub emt: &'a EmtTable,
    pub epsilon: f64,
    /// `(|alpha|, |beta|)` blocks to include; [`ORDER_BLOCKS`] for the full expansion.
    pub blocks: &'a [(usize, usize)],
}

impl<'a> ExpansionInput<'a> {
    pub fn full(data: &'a ExpansionData, emt: &'a EmtTable, epsilon: f64) -> Self {
        Self {
            data,
            emt,
            epsilon,
            blocks: &ORDER_BLOCKS,
        }
    }
}

/// The expansion on the nodes of `dOmega`.
pub fn evaluate_expansion(input: &ExpansionInput<'_>) -> Result<Density> {
    let data = input.data;
    let mut values: Vec<Point> = data.u_boundary.values().to_vec();
    if input.epsilon == 0.0 {
        return Ok(data.u_boundary.clone());
    }
    for &(a_ord, b_ord) in input.blocks {
        if !ORDER_BLOCKS.contains(&(a_ord, b_ord)) {
            return Err(Error::UnsupportedOrder(a_ord + b_ord));
        }
        let scale = input.epsilon.powi((a_ord + b_ord) as i32);
        for alpha in multi_indices(a_ord) {
            let du = data
                .u_derivatives
                .get(&alpha)
                .ok_or_else(|| Error::MissingEntry(format!("d^{alpha:?} U")))?;
            for beta in multi_indices(b_ord) {
                let dn = data
                    .n_derivatives
                    .get(&beta)
                    .ok_or_else(|| Error::MissingEntry(format!("d_z^{beta:?} N")))?;
                let coef = scale / (factorial(alpha) * factorial(beta));
                for j in 0..2 {
                    let m = input.emt.get(alpha, beta, j)?;
                    let c = coef * du[j];
                    if c == 0.0 {
                        continue;
                    }
                    for (v, n) in values.iter_mut().zip(dn) {
                        *v -= n * m * c;
                    }
                }
            }
        }
    }
    Density::new(values)
}

/// `max_m |u(x_m) - expansion(x_m)|`.
pub fn expansion_error(u_boundary: &Density, expansion: &Density) -> f64 {
    debug_assert_eq!(u_boundary.len(), expansion.len());
    u_boundary.sub(expansion).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{point_source_traction, solve_with_inclusion};
    use crate::emt::compute_emt;
    use crate::geometry::{place, sample_grid, Curve, InclusionPlacement};
    use crate::material::{ContrastPair, LameParams};

    struct Setup {
        op: BackgroundOperator,
        data: ExpansionData,
        g: Density,
        pair: ContrastPair,
        emt: EmtTable,
        reference: Curve,
    }

    fn setup(reference: Curve) -> Setup {
        let p0 = LameParams::planar(0.5, 1.0).unwrap();
        let omega = sample_grid(&Curve::circle(3.0).unwrap(), 256).unwrap();
        let g = point_source_traction(&p0, &omega, &Point::new(4.5, 2.0), &Point::new(1.0, 0.5));
        let op = BackgroundOperator::new(&p0, &omega).unwrap();
        let u = op.solve(&g).unwrap();
        let data = ExpansionData::new(&op, &u, &Point::new(0.3, -0.2)).unwrap();
        let pair = ContrastPair::new(p0, LameParams::planar(1.0, 2.0).unwrap());
        let emt = compute_emt(&pair, &sample_grid(&reference, 128).unwrap()).unwrap();
        Setup {
            op,
            data,
            g,
            pair,
            emt,
            reference,
        }
    }

    fn measured(s: &Setup, eps: f64) -> Density {
        let curve = place(&InclusionPlacement {
            reference: s.reference,
            z0: s.data.z0,
            epsilon: eps,
        })
        .unwrap();
        let d = sample_grid(&curve, 128).unwrap();
        solve_with_inclusion(&s.pair, s.op.omega(), &[d], &s.g).unwrap().trace
    }

    #[test]
    fn trivial_cases() {
        let s = setup(Curve::circle(1.0).unwrap());
        let e0 = evaluate_expansion(&ExpansionInput::full(&s.data, &s.emt, 0.0)).unwrap();
        assert_eq!(e0, s.data.u_boundary);
        let zero = EmtTable::from_text(s.pair, &s.emt.to_text().lines().map(|l| {
            if l.starts_with('#') {
                l.to_string()
            } else {
                let mut f: Vec<&str> = l.split_whitespace().collect();
                f[6] = "0";
                f.join(" ")
            }
        }).collect::<Vec<_>>().join("\n")).unwrap();
        let e = evaluate_expansion(&ExpansionInput::full(&s.data, &zero, 0.1)).unwrap();
        assert_eq!(expansion_error(&e, &s.data.u_boundary), 0.0);
        let missing = EmtTable::empty(s.pair);
        assert!(evaluate_expansion(&ExpansionInput::full(&s.data, &missing, 0.1)).is_err());
    }

    #[test]
    fn error_decays_at_fourth_order() {
        // The kite has no central symmetry, so the third-order blocks are active.
        let s = setup(Curve::kite());
        let eps = [0.2, 0.1, 0.05];
        let errs: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let exp = evaluate_expansion(&ExpansionInput::full(&s.data, &s.emt, e)).unwrap();
                expansion_error(&measured(&s, e), &exp)
            })
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 3.5, "{errs:?}");
        }
        // Leading block only: the error is no longer fourth order.
        let lead: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let exp = evaluate_expansion(&ExpansionInput {
                    data: &s.data,
                    emt: &s.emt,
                    epsilon: e,
                    blocks: &[(1, 1)],
                })
                .unwrap();
                expansion_error(&measured(&s, e), &exp)
            })
            .collect();
        assert!((lead[1] / lead[2]).log2() < 3.5, "{lead:?}");
    }
}
