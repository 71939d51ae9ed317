//! Nyström discretizations of the single-layer operator `S` and the
//! Neumann–Poincaré operator `K*`, off-boundary evaluation of single-layer
//! potentials, conormal traces, discrete Sobolev norms and projection onto
//! the rigid-motion-orthogonal densities.
//!
//! Self-interaction blocks use singularity-splitting rules on the uniform
//! parameter grid: the logarithmic part of `Gamma` is integrated with the
//! spectral weights of [`quadrature::log_weights`], the Cauchy part of the
//! traction kernel with the conjugate-function weights of
//! [`quadrature::conjugate_weights`], and all remaining smooth parts with the
//! trapezoid rule. Block entries are indexed `2 * node + component`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGrid, Point};
use crate::kernels::{rigid_field, KelvinConstants, RIGID_DIM};
use crate::material::LameParams;
use crate::quadrature::{conjugate_weights, fourier_coefficients, log_weights, trig_resample, wavenumber};

/// Nodal vector values of a boundary density.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    values: Vec<Point>,
}

impl Density {
    pub fn new(values: Vec<Point>) -> Result<Self> {
        if values.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(Error::Invalid("non-finite density value".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Point::zeros(); n],
        }
    }

    /// Samples `f` at the grid nodes, `f(t, x)`.
    pub fn from_fn(grid: &BoundaryGrid, f: impl Fn(f64, &Point) -> Point) -> Self {
        Self {
            values: grid
                .params()
                .iter()
                .zip(grid.points())
                .map(|(&t, x)| f(t, x))
                .collect(),
        }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self {
            values: (0..v.len() / 2).map(|m| Point::new(v[2 * m], v[2 * m + 1])).collect(),
        }
    }

    #[cfg(test)]
    pub(crate) fn from_slice(v: &[f64]) -> Self {
        Self {
            values: v.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.values.len(), self.values.iter().flat_map(|v| [v.x, v.y]))
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn sub(&self, other: &Density) -> Density {
        Density {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Density) -> Density {
        Density {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Density {
        Density {
            values: self.values.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Every `stride`-th node; restricts a refined density to a coarser nested grid.
    pub fn restrict(&self, stride: usize) -> Density {
        Density {
            values: self.values.iter().step_by(stride).copied().collect(),
        }
    }

    /// Trigonometric interpolation onto `m` uniform nodes.
    pub fn resample(&self, m: usize) -> Density {
        let x = trig_resample(&self.component(0), m);
        let y = trig_resample(&self.component(1), m);
        Density {
            values: x.into_iter().zip(y).map(|(a, b)| Point::new(a, b)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayer,
    KStar,
    Traction,
    Block,
}

/// A dense matrix acting on stacked nodal densities.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
}

impl DenseOperator {
    pub fn apply(&self, density: &Density) -> Density {
        Density::from_vector(&(&self.matrix * density.to_vector()))
    }

    pub fn n_src(&self) -> usize {
        self.matrix.ncols() / 2
    }

    pub fn n_tgt(&self) -> usize {
        self.matrix.nrows() / 2
    }
}

fn fill_blocks(n_tgt: usize, n_src: usize, block: impl Fn(usize, usize) -> Matrix2<f64> + Sync) -> DMatrix<f64> {
    let rows: Vec<Vec<Matrix2<f64>>> = (0..n_tgt)
        .into_par_iter()
        .map(|i| (0..n_src).map(|j| block(i, j)).collect())
        .collect();
    let mut m = DMatrix::zeros(2 * n_tgt, 2 * n_src);
    for (i, row) in rows.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            m[(2 * i, 2 * j)] = b[(0, 0)];
            m[(2 * i, 2 * j + 1)] = b[(0, 1)];
            m[(2 * i + 1, 2 * j)] = b[(1, 0)];
            m[(2 * i + 1, 2 * j + 1)] = b[(1, 1)];
        }
    }
    m
}

fn same_grid(a: &BoundaryGrid, b: &BoundaryGrid) -> bool {
    std::ptr::eq(a, b) || (a.len() == b.len() && a.points() == b.points())
}

/// Single-layer operator from `src` to the nodes of `tgt`.
///
/// When `tgt` is `src` the log-split self rule is used, otherwise plain
/// trapezoid quadrature; a cross target must not share nodes with `src`.
pub fn assemble_single_layer(p: &LameParams, src: &BoundaryGrid, tgt: &BoundaryGrid) -> Result<DenseOperator> {
    p.require_planar()?;
    let k = KelvinConstants::new(p);
    let matrix = if same_grid(src, tgt) {
        single_layer_self(&k, src)
    } else {
        if tgt.points().iter().any(|x| src.node_distance(x) == 0.0) {
            return Err(Error::Geometry("cross single layer with coincident nodes; use self mode".into()));
        }
        let (xs, ys, ws) = (tgt.points(), src.points(), src.weights());
        fill_blocks(tgt.len(), src.len(), |i, j| k.value(&(xs[i] - ys[j])) * ws[j])
    };
    Ok(DenseOperator {
        matrix,
        kind: OperatorKind::SingleLayer,
    })
}

fn single_layer_self(k: &KelvinConstants, grid: &BoundaryGrid) -> DMatrix<f64> {
    let n = grid.len();
    let logw = log_weights(n);
    let h = 2.0 * PI / n as f64;
    let (x, jac, t) = (grid.points(), grid.jacobians(), grid.params());
    let half_a = 0.5 * k.a;
    fill_blocks(n, n, |i, j| {
        let jj = jac[j];
        let kress = logw[(i + n - j) % n] * half_a * jj;
        if i == j {
            let tan = grid.velocity()[i] / jj;
            Matrix2::identity() * (kress + h * jj * half_a * (jj * jj).ln()) - tan * tan.transpose() * (h * jj * k.b)
        } else {
            let z = x[i] - x[j];
            let r2 = z.norm_squared();
            let s = (0.5 * (t[i] - t[j])).sin();
            let smooth_log = half_a * (r2 / (4.0 * s * s)).ln();
            Matrix2::identity() * (kress + h * jj * smooth_log) - z * z.transpose() * (h * jj * k.b / r2)
        }
    })
}

/// Principal-value operator `K*` on a single smooth closed curve.
pub fn assemble_kstar(p: &LameParams, grid: &BoundaryGrid) -> Result<DenseOperator> {
    p.require_planar()?;
    let k = KelvinConstants::new(p);
    let n = grid.len();
    let nf = n as f64;
    let hil = conjugate_weights(n);
    let (x, nrm, jac, t) = (grid.points(), grid.normals(), grid.jacobians(), grid.params());
    let c = k.c;
    let matrix = fill_blocks(n, n, |i, j| {
        let jj = jac[j];
        let (smooth, rem) = if i == j {
            let kappa = grid.curvature(i);
            let tan = grid.velocity()[i] / jj;
            let s = Matrix2::identity() * (c * 0.5 * kappa) + tan * tan.transpose() * ((1.0 - c) * kappa);
            let v = grid.velocity()[i];
            let a = grid.acceleration()[i];
            (s * (jj / nf), v.dot(&a) / (2.0 * jj * jj))
        } else {
            let z = x[i] - x[j];
            let r2 = z.norm_squared();
            let zn = z.dot(&nrm[i]) / r2;
            let s = Matrix2::identity() * (c * zn) + z * z.transpose() * (2.0 * (1.0 - c) * zn / r2);
            let cross = (nrm[i].y * z.x - nrm[i].x * z.y) / r2;
            let cot = 1.0 / (0.5 * (t[j] - t[i])).tan();
            (s * (jj / nf), cross * jj - 0.5 * cot)
        };
        let kk = 0.5 * c * hil[(j + n - i) % n] + c / nf * rem;
        smooth + Matrix2::new(0.0, kk, -kk, 0.0)
    });
    Ok(DenseOperator {
        matrix,
        kind: OperatorKind::KStar,
    })
}

/// Traction of `S_src` at the nodes of a different curve `tgt` (outward normals of `tgt`).
pub fn assemble_traction_cross(p: &LameParams, src: &BoundaryGrid, tgt: &BoundaryGrid) -> Result<DenseOperator> {
    p.require_planar()?;
    let k = KelvinConstants::new(p);
    let (xs, ns, ys, ws) = (tgt.points(), tgt.normals(), src.points(), src.weights());
    Ok(DenseOperator {
        matrix: fill_blocks(tgt.len(), src.len(), |i, j| k.traction(&(xs[i] - ys[j]), &ns[i]) * ws[j]),
        kind: OperatorKind::Traction,
    })
}

/// Field values (and optionally gradients `grad[(i, k)] = d_k u_i`) at target points.
#[derive(Debug, Clone)]
pub struct FieldEval {
    pub values: Vec<Point>,
    pub gradients: Option<Vec<Matrix2<f64>>>,
    /// Points closer to the source curve than the accuracy contract allows.
    pub near_boundary: Vec<bool>,
}

impl FieldEval {
    pub fn any_near(&self) -> bool {
        self.near_boundary.iter().any(|&b| b)
    }
}

/// Points closer than this many node spacings fall outside the trapezoid accuracy contract.
pub const NEAR_SPACINGS: f64 = 5.0;

fn trapezoid_field(k: &KelvinConstants, ys: &[Point], ws: &[f64], phi: &[Point], x: &Point, order: usize) -> (Point, Matrix2<f64>) {
    let mut v = Point::zeros();
    let mut g = Matrix2::zeros();
    for ((y, w), f) in ys.iter().zip(ws).zip(phi) {
        let z = x - y;
        let wf = f * *w;
        v += k.value(&z) * wf;
        if order > 0 {
            let d = k.gradient(&z);
            let c0 = d[0] * wf;
            let c1 = d[1] * wf;
            g[(0, 0)] += c0.x;
            g[(1, 0)] += c0.y;
            g[(0, 1)] += c1.x;
            g[(1, 1)] += c1.y;
        }
    }
    (v, g)
}

/// `S[phi]` and optionally its gradient by plain trapezoid quadrature.
pub fn eval_potential(p: &LameParams, src: &BoundaryGrid, phi: &Density, points: &[Point], order: usize) -> Result<FieldEval> {
    p.require_planar()?;
    if order > 1 {
        return Err(Error::UnsupportedOrder(order));
    }
    check_len(src, phi)?;
    let k = KelvinConstants::new(p);
    let limit = NEAR_SPACINGS * src.max_spacing();
    let out: Vec<(Point, Matrix2<f64>, bool)> = points
        .par_iter()
        .map(|x| {
            let (v, g) = trapezoid_field(&k, src.points(), src.weights(), phi.values(), x, order);
            (v, g, src.node_distance(x) < limit)
        })
        .collect();
    Ok(collect_eval(out, order))
}

fn collect_eval(out: Vec<(Point, Matrix2<f64>, bool)>, order: usize) -> FieldEval {
    FieldEval {
        values: out.iter().map(|o| o.0).collect(),
        gradients: (order > 0).then(|| out.iter().map(|o| o.1).collect()),
        near_boundary: out.iter().map(|o| o.2).collect(),
    }
}

pub(crate) fn check_len(grid: &BoundaryGrid, phi: &Density) -> Result<()> {
    if grid.len() == phi.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "density has {} nodes, grid has {}",
            phi.len(),
            grid.len()
        )))
    }
}

/// Maximum number of grid doublings used by [`eval_potential_refined`].
pub const MAX_REFINE_LEVELS: usize = 10;

/// `S[phi]` (and gradient) accurate up to the boundary.
///
/// For each target the density is trigonometrically interpolated onto the
/// coarsest dyadic refinement of the grid whose node spacing satisfies the
/// [`NEAR_SPACINGS`] contract at that target; targets that need more than
/// [`MAX_REFINE_LEVELS`] doublings are flagged.
pub fn eval_potential_refined(p: &LameParams, src: &BoundaryGrid, phi: &Density, points: &[Point], order: usize) -> Result<FieldEval> {
    p.require_planar()?;
    if order > 1 {
        return Err(Error::UnsupportedOrder(order));
    }
    check_len(src, phi)?;
    let k = KelvinConstants::new(p);
    let levels = required_levels(src, points);
    let max_level = levels.iter().copied().max().unwrap_or(0).min(MAX_REFINE_LEVELS);
    let mut refined: Vec<(BoundaryGrid, Density)> = Vec::with_capacity(max_level + 1);
    refined.push((src.clone(), phi.clone()));
    for level in 1..=max_level {
        let n = src.len() << level;
        refined.push((BoundaryGrid::build(src.curve(), n)?, phi.resample(n)));
    }
    let out: Vec<(Point, Matrix2<f64>, bool)> = points
        .par_iter()
        .zip(&levels)
        .map(|(x, &level)| {
            let (g, f) = &refined[level.min(max_level)];
            let (v, d) = trapezoid_field(&k, g.points(), g.weights(), f.values(), x, order);
            (v, d, level > MAX_REFINE_LEVELS)
        })
        .collect();
    Ok(collect_eval(out, order))
}

/// Smallest refinement level satisfying the spacing contract for each point
/// (`MAX_REFINE_LEVELS + 1` when none does).
fn required_levels(src: &BoundaryGrid, points: &[Point]) -> Vec<usize> {
    let spacing = src.max_spacing();
    points
        .par_iter()
        .map(|x| {
            if src.node_distance(x) >= NEAR_SPACINGS * spacing {
                return 0;
            }
            let d = src.distance(x);
            (0..=MAX_REFINE_LEVELS)
                .find(|&level| d >= NEAR_SPACINGS * spacing / (1usize << level) as f64)
                .unwrap_or(MAX_REFINE_LEVELS + 1)
        })
        .collect()
}

/// Derivative `d^alpha S[phi](x)` for `|alpha| <= 2`, analytic in the kernel.
pub fn eval_potential_derivative(p: &LameParams, src: &BoundaryGrid, phi: &Density, x: &Point, alpha: [usize; 2]) -> Result<Point> {
    p.require_planar()?;
    check_len(src, phi)?;
    let k = KelvinConstants::new(p);
    let order = alpha[0] + alpha[1];
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut acc = Point::zeros();
    for ((y, w), f) in src.points().iter().zip(src.weights()).zip(phi.values()) {
        let z = x - y;
        let m = match alpha {
            [0, 0] => k.value(&z),
            [1, 0] => k.gradient(&z)[0],
            [0, 1] => k.gradient(&z)[1],
            [2, 0] => k.hessian(&z)[0][0],
            [1, 1] => k.hessian(&z)[0][1],
            _ => k.hessian(&z)[1][1],
        };
        acc += m * f * *w;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Exterior limit, `(+1/2 I + K*)`.
    Exterior,
    /// Interior limit, `(-1/2 I + K*)`.
    Interior,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Exterior => 0.5,
            Side::Interior => -0.5,
        }
    }
}

/// `(+-1/2 I + K*)[phi]` with a pre-assembled `K*`.
pub fn apply_trace(kstar: &DenseOperator, phi: &Density, side: Side) -> Density {
    kstar.apply(phi).add(&phi.scale(side.sign()))
}

/// `(+-1/2 I + K*)[phi]`, assembling `K*` on the fly.
pub fn conormal_trace(p: &LameParams, grid: &BoundaryGrid, phi: &Density, side: Side) -> Result<Density> {
    check_len(grid, phi)?;
    Ok(apply_trace(&assemble_kstar(p, grid)?, phi, side))
}

/// `(+-1/2 I + K*)` as a matrix.
pub fn trace_matrix(kstar: &DenseOperator, side: Side) -> DMatrix<f64> {
    let n = kstar.matrix.nrows();
    &kstar.matrix + DMatrix::identity(n, n) * side.sign()
}

/// Parametric Sobolev proxy norm of order `s`:
/// `||phi||^2 = 2 pi sum_k (1 + k^2)^s sum_c |phi_hat_{k,c}|^2`.
pub fn sobolev_norm(phi: &Density, s: f64) -> f64 {
    let n = phi.len();
    let mut total = 0.0;
    for c in 0..2 {
        let coeffs = fourier_coefficients(&phi.component(c));
        for (idx, co) in coeffs.iter().enumerate() {
            let k = wavenumber(idx, n) as f64;
            total += (1.0 + k * k).powf(s) * co.norm_sqr();
        }
    }
    (2.0 * PI * total).sqrt()
}

/// `H^{-1/2}` proxy norm.
pub fn norm_minus_half(phi: &Density) -> f64 {
    sobolev_norm(phi, -0.5)
}

/// Quadrature pairing `sum_m w_m phi(t_m) . f(t_m)`.
pub fn pairing(grid: &BoundaryGrid, phi: &Density, f: &Density) -> f64 {
    grid.weights()
        .iter()
        .zip(phi.values().iter().zip(f.values()))
        .map(|(w, (a, b))| w * a.dot(b))
        .sum()
}

/// `<phi, psi_l>` for the three rigid motions.
pub fn rigid_pairings(grid: &BoundaryGrid, phi: &Density) -> [f64; RIGID_DIM] {
    let mut out = [0.0; RIGID_DIM];
    for (l, o) in out.iter_mut().enumerate() {
        *o = grid
            .weights()
            .iter()
            .zip(grid.points().iter().zip(phi.values()))
            .map(|(w, (x, f))| w * f.dot(&rigid_field(l, x)))
            .sum();
    }
    out
}

/// Weighted Gram matrix of the rigid basis on `grid`.
pub fn rigid_gram(grid: &BoundaryGrid) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for (w, x) in grid.weights().iter().zip(grid.points()) {
        for a in 0..RIGID_DIM {
            for b in 0..RIGID_DIM {
                g[(a, b)] += w * rigid_field(a, x).dot(&rigid_field(b, x));
            }
        }
    }
    g
}

/// Least-squares rigid coefficients of `phi` in the weighted pairing.
pub fn rigid_coefficients(grid: &BoundaryGrid, phi: &Density) -> Vector3<f64> {
    let b = Vector3::from(rigid_pairings(grid, phi));
    rigid_gram(grid).lu().solve(&b).expect("rigid Gram matrix is positive definite")
}

/// The rigid motion `sum_l c_l psi_l` sampled on the grid.
pub fn rigid_density(grid: &BoundaryGrid, c: &Vector3<f64>) -> Density {
    Density::from_fn(grid, |_, x| (0..RIGID_DIM).map(|l| rigid_field(l, x) * c[l]).sum())
}

/// Removes the rigid-motion components of `phi` in the weighted pairing.
pub fn project_psi(grid: &BoundaryGrid, phi: &Density) -> Density {
    let c = rigid_coefficients(grid, phi);
    phi.sub(&rigid_density(grid, &c))
}

/// `n x 3` matrix whose columns are the rigid motions sampled at the nodes.
pub fn rigid_columns(grid: &BoundaryGrid) -> DMatrix<f64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(2 * n, RIGID_DIM);
    for (i, x) in grid.points().iter().enumerate() {
        for l in 0..RIGID_DIM {
            let v = rigid_field(l, x);
            m[(2 * i, l)] = v.x;
            m[(2 * i + 1, l)] = v.y;
        }
    }
    m
}

/// `3 x n` matrix computing `<phi, psi_l>` from stacked nodal values.
pub fn rigid_pairing_rows(grid: &BoundaryGrid) -> DMatrix<f64> {
    let mut m = rigid_columns(grid).transpose();
    for (i, w) in grid.weights().iter().enumerate() {
        for l in 0..RIGID_DIM {
            m[(l, 2 * i)] *= w;
            m[(l, 2 * i + 1)] *= w;
        }
    }
    m
}
