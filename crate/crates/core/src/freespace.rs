//! Free-space transmission problem for one or several inclusions, its hard
//! (`mu -> inf`) and soft (`kappa, mu -> 0`) limits, solution evaluation,
//! rigid-coefficient recovery and the energy functional `J`.
//!
//! Unknowns are stacked `[phi_1 .. phi_n | psi_1 .. psi_n]`; rows are the
//! Dirichlet rows of every component followed by the traction rows. Each
//! exterior density `phi_j` is constrained Psi-orthogonal on its own curve,
//! with one Lagrange multiplier column per rigid motion placed in the
//! traction rows of that component.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{check_disjoint, sample_grid, BoundaryGrid, Curve, Point};
use crate::kernels::{rigid_field, KelvinConstants, RIGID_DIM};
use crate::material::{apply_elasticity_tensor, strain_energy_density, ContrastPair, LameParams};
use crate::numerics::BorderedFactor;
use crate::potentials::{
    assemble_kstar, assemble_single_layer, assemble_traction_cross, eval_potential, eval_potential_derivative,
    eval_potential_refined, pairing, rigid_columns, rigid_density, rigid_gram, rigid_pairing_rows, rigid_pairings,
    Density, FieldEval,
};
use crate::quadrature::gauss_legendre;

/// A displacement field `h` driving the transmission problem.
#[derive(Debug, Clone)]
pub enum BackgroundField {
    /// `sum_l c_l psi_l`.
    Rigid([f64; RIGID_DIM]),
    /// `offset + G x`.
    Linear { offset: Point, gradient: Matrix2<f64> },
    /// `x^alpha e_direction`; not a solution of the background system in general.
    Monomial { alpha: [usize; 2], direction: usize },
    /// `Gamma(x - source) force`.
    PointSource { params: LameParams, source: Point, force: Point },
    /// `S[density]` on `grid` with kernel parameters `params`.
    Layer {
        params: LameParams,
        grid: Arc<BoundaryGrid>,
        density: Density,
    },
    /// Somigliana representation from Cauchy data on a closed curve:
    /// `-int Gamma(x - y) traction(y) + int (-T(x - y, n_y))^T displacement(y)`.
    Boundary {
        params: LameParams,
        grid: Arc<BoundaryGrid>,
        displacement: Density,
        traction: Density,
    },
    Combination(Vec<(f64, BackgroundField)>),
}

/// Conormal derivative of the columns of a matrix field from its gradient
/// `grads[k] = d_k M`.
pub(crate) fn traction_from_gradient(p: &LameParams, grads: &[Matrix2<f64>; 2], n: &Point) -> Matrix2<f64> {
    let (lambda, mu) = (p.lambda(), p.mu());
    Matrix2::from_fn(|i, j| {
        let div = grads[0][(0, j)] + grads[1][(1, j)];
        let mut t = lambda * div * n[i];
        for m in 0..2 {
            t += mu * (grads[m][(i, j)] + grads[i][(m, j)]) * n[m];
        }
        t
    })
}

fn somigliana(p: &LameParams, grid: &BoundaryGrid, u: &Density, t: &Density, x: &Point, order1: Option<usize>) -> Point {
    let k = KelvinConstants::new(p);
    let mut acc = Point::zeros();
    for (((y, n), w), (uy, ty)) in grid
        .points()
        .iter()
        .zip(grid.normals())
        .zip(grid.weights())
        .zip(u.values().iter().zip(t.values()))
    {
        let z = x - y;
        let (g, tr) = match order1 {
            None => (k.value(&z), k.traction(&z, n)),
            Some(d) => {
                let hess = k.hessian(&z);
                (k.gradient(&z)[d], traction_from_gradient(p, &[hess[d][0], hess[d][1]], n))
            }
        };
        acc += (-(g * ty) - tr.transpose() * uy) * *w;
    }
    acc
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| n as f64 - i as f64).product()
}

fn powi(x: f64, n: isize) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n as i32)
    }
}

impl BackgroundField {
    /// The uniform-strain field `(x2, x1)`.
    pub fn shear() -> Self {
        BackgroundField::Linear {
            offset: Point::zeros(),
            gradient: Matrix2::new(0.0, 1.0, 1.0, 0.0),
        }
    }

    pub fn monomial(alpha: [usize; 2], direction: usize) -> Result<Self> {
        let order = alpha[0] + alpha[1];
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        if direction > 1 {
            return Err(Error::Invalid(format!("direction {direction} out of range")));
        }
        Ok(BackgroundField::Monomial { alpha, direction })
    }

    pub fn value(&self, x: &Point) -> Point {
        self.derivative(x, [0, 0]).expect("order 0 is supported")
    }

    /// `grad[(i, k)] = d_k h_i`.
    pub fn gradient(&self, x: &Point) -> Matrix2<f64> {
        let d0 = self.derivative(x, [1, 0]).expect("order 1 is supported");
        let d1 = self.derivative(x, [0, 1]).expect("order 1 is supported");
        Matrix2::from_columns(&[d0, d1])
    }

    /// `d^beta h(x)` for `|beta| <= 2`.
    pub fn derivative(&self, x: &Point, beta: [usize; 2]) -> Result<Point> {
        let order = beta[0] + beta[1];
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(match self {
            BackgroundField::Rigid(c) => match order {
                0 => (0..RIGID_DIM).map(|l| rigid_field(l, x) * c[l]).sum(),
                1 => {
                    let k = if beta[0] == 1 { 0 } else { 1 };
                    // Only the rotation contributes: d_k (-x2, x1).
                    let mut v = Point::zeros();
                    if k == 0 {
                        v.y = c[2];
                    } else {
                        v.x = -c[2];
                    }
                    v
                }
                _ => Point::zeros(),
            },
            BackgroundField::Linear { offset, gradient } => match order {
                0 => offset + gradient * x,
                1 => gradient.column(if beta[0] == 1 { 0 } else { 1 }).into_owned(),
                _ => Point::zeros(),
            },
            BackgroundField::Monomial { alpha, direction } => {
                let coef = falling(alpha[0], beta[0]) * falling(alpha[1], beta[1]);
                let v = coef
                    * powi(x.x, alpha[0] as isize - beta[0] as isize)
                    * powi(x.y, alpha[1] as isize - beta[1] as isize);
                let mut out = Point::zeros();
                out[*direction] = v;
                out
            }
            BackgroundField::PointSource { params, source, force } => {
                let k = KelvinConstants::new(params);
                let z = x - source;
                let m = match beta {
                    [0, 0] => k.value(&z),
                    [1, 0] => k.gradient(&z)[0],
                    [0, 1] => k.gradient(&z)[1],
                    [2, 0] => k.hessian(&z)[0][0],
                    [1, 1] => k.hessian(&z)[0][1],
                    _ => k.hessian(&z)[1][1],
                };
                m * force
            }
            BackgroundField::Layer { params, grid, density } => {
                eval_potential_derivative(params, grid, density, x, beta)?
            }
            BackgroundField::Boundary {
                params,
                grid,
                displacement,
                traction,
            } => match order {
                0 => somigliana(params, grid, displacement, traction, x, None),
                1 => somigliana(params, grid, displacement, traction, x, Some(if beta[0] == 1 { 0 } else { 1 })),
                _ => {
                    // Richardson-extrapolated central differences of the analytic gradient.
                    let (a, b) = if beta == [2, 0] {
                        (0, 0)
                    } else if beta == [0, 2] {
                        (1, 1)
                    } else {
                        (0, 1)
                    };
                    let step = 1e-3 * grid.curve().max_radius();
                    let diff = |h: f64| {
                        let mut e = Point::zeros();
                        e[b] = h;
                        (somigliana(params, grid, displacement, traction, &(x + e), Some(a))
                            - somigliana(params, grid, displacement, traction, &(x - e), Some(a)))
                            / (2.0 * h)
                    };
                    (diff(0.5 * step) * 4.0 - diff(step)) / 3.0
                }
            },
            BackgroundField::Combination(parts) => {
                let mut acc = Point::zeros();
                for (w, f) in parts {
                    acc += f.derivative(x, beta)? * *w;
                }
                acc
            }
        })
    }

    /// `(L h)(x) = mu lap h + (lambda + mu) grad div h`, from analytic second derivatives.
    pub fn pde_residual(&self, p0: &LameParams, x: &Point) -> Result<f64> {
        let h11 = self.derivative(x, [2, 0])?;
        let h12 = self.derivative(x, [1, 1])?;
        let h22 = self.derivative(x, [0, 2])?;
        let lap = h11 + h22;
        let grad_div = Point::new(h11.x + h12.y, h12.x + h22.y);
        Ok((lap * p0.mu() + grad_div * (p0.lambda() + p0.mu())).norm())
    }

    pub fn trace(&self, grid: &BoundaryGrid) -> Density {
        Density::from_fn(grid, |_, x| self.value(x))
    }

    /// `C0 sym(grad h) n` at the grid nodes.
    pub fn conormal(&self, p0: &LameParams, grid: &BoundaryGrid) -> Density {
        let values = grid
            .points()
            .iter()
            .zip(grid.normals())
            .map(|(x, n)| conormal_of_gradient(p0, &self.gradient(x), n))
            .collect();
        Density::new(values).expect("finite field")
    }
}

pub(crate) fn sym(g: &Matrix2<f64>) -> Matrix2<f64> {
    (g + g.transpose()) * 0.5
}

pub(crate) fn conormal_of_gradient(p: &LameParams, g: &Matrix2<f64>, n: &Point) -> Point {
    apply_elasticity_tensor(p, &sym(g)) * n
}

/// Node offsets of stacked per-component densities.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub offsets: Vec<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(grids: &[BoundaryGrid]) -> Self {
        let mut offsets = Vec::with_capacity(grids.len());
        let mut total = 0;
        for g in grids {
            offsets.push(total);
            total += g.len();
        }
        Self { offsets, total }
    }

    pub fn split(&self, grids: &[BoundaryGrid], v: &[f64], base: usize) -> Vec<Density> {
        grids
            .iter()
            .zip(&self.offsets)
            .map(|(g, &o)| Density::from_vector(&DVector::from_column_slice(&v[base + 2 * o..base + 2 * (o + g.len())])))
            .collect()
    }
}

fn put(a: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>, scale: f64) {
    let mut view = a.view_mut((row, col), block.shape());
    view.zip_apply(block, |x, b| *x += scale * b);
}

fn put_identity(a: &mut DMatrix<f64>, row: usize, col: usize, n: usize, scale: f64) {
    for i in 0..n {
        a[(row + i, col + i)] += scale;
    }
}

/// Operators of the background medium on a set of disjoint curves.
#[derive(Debug, Clone)]
pub(crate) struct BackgroundBlocks {
    /// `single[j][k]`: `S0` from curve `k` to curve `j`.
    pub single: Vec<Vec<DMatrix<f64>>>,
    /// `traction[j][k]`: `K0*` on the diagonal, cross tractions off it.
    pub traction: Vec<Vec<DMatrix<f64>>>,
}

impl BackgroundBlocks {
    pub fn new(p0: &LameParams, grids: &[BoundaryGrid]) -> Result<Self> {
        let n = grids.len();
        let mut single = Vec::with_capacity(n);
        let mut traction = Vec::with_capacity(n);
        for (j, gj) in grids.iter().enumerate() {
            let mut srow = Vec::with_capacity(n);
            let mut trow = Vec::with_capacity(n);
            for (k, gk) in grids.iter().enumerate() {
                srow.push(assemble_single_layer(p0, gk, gj)?.matrix);
                trow.push(if j == k {
                    assemble_kstar(p0, gj)?.matrix
                } else {
                    assemble_traction_cross(p0, gk, gj)?.matrix
                });
            }
            single.push(srow);
            traction.push(trow);
        }
        Ok(Self { single, traction })
    }

    /// `(sum_k S0_{j<-k} phi_k, +1/2 phi_j + sum_k K_{j<-k} phi_k)` on curve `j`.
    pub fn exterior_traces(&self, phi: &[Density], j: usize) -> (Density, Density) {
        let mut v = DVector::zeros(2 * phi[j].len());
        let mut t = phi[j].to_vector() * 0.5;
        for (k, f) in phi.iter().enumerate() {
            let fv = f.to_vector();
            v += &self.single[j][k] * &fv;
            t += &self.traction[j][k] * &fv;
        }
        (Density::from_vector(&v), Density::from_vector(&t))
    }
}

fn validate_grids(grids: &[BoundaryGrid]) -> Result<()> {
    if grids.is_empty() {
        return Err(Error::Geometry("no inclusion curves".into()));
    }
    check_disjoint(grids, 0.0)
}

/// Factored transmission system for a fixed contrast pair and geometry.
#[derive(Debug)]
pub struct TransmissionOperator {
    pair: ContrastPair,
    grids: Vec<BoundaryGrid>,
    layout: Layout,
    background: BackgroundBlocks,
    interior_single: Vec<DMatrix<f64>>,
    interior_kstar: Vec<DMatrix<f64>>,
    /// Column scaling of the interior unknowns, `psi = psi_scale * psi_tilde`.
    psi_scale: f64,
    factor: BorderedFactor,
}

impl TransmissionOperator {
    pub fn new(pair: ContrastPair, grids: Vec<BoundaryGrid>) -> Result<Self> {
        validate_grids(&grids)?;
        let (p0, p1) = (pair.background, pair.inclusion);
        let layout = Layout::new(&grids);
        let background = BackgroundBlocks::new(&p0, &grids)?;
        let mut interior_single = Vec::new();
        let mut interior_kstar = Vec::new();
        for g in &grids {
            interior_single.push(assemble_single_layer(&p1, g, g)?.matrix);
            interior_kstar.push(assemble_kstar(&p1, g)?.matrix);
        }
        let psi_scale = p0.kelvin_alpha() / p1.kelvin_alpha();
        let dim = 2 * layout.total;
        let k = RIGID_DIM * grids.len();
        let mut a = DMatrix::zeros(2 * dim, 2 * dim);
        let mut b = DMatrix::zeros(2 * dim, k);
        let mut c = DMatrix::zeros(k, 2 * dim);
        for (j, gj) in grids.iter().enumerate() {
            let rj = 2 * layout.offsets[j];
            let nj = 2 * gj.len();
            let (dir_row, tr_row) = (rj, dim + rj);
            let psi_col = dim + rj;
            put(&mut a, dir_row, psi_col, &interior_single[j], psi_scale);
            put(&mut a, tr_row, psi_col, &interior_kstar[j], psi_scale);
            put_identity(&mut a, tr_row, psi_col, nj, -0.5 * psi_scale);
            for (kk, _) in grids.iter().enumerate() {
                let phi_col = 2 * layout.offsets[kk];
                put(&mut a, dir_row, phi_col, &background.single[j][kk], -1.0);
                put(&mut a, tr_row, phi_col, &background.traction[j][kk], -1.0);
            }
            put_identity(&mut a, tr_row, rj, nj, -0.5);
            b.view_mut((tr_row, RIGID_DIM * j), (nj, RIGID_DIM)).copy_from(&rigid_columns(gj));
            c.view_mut((RIGID_DIM * j, rj), (RIGID_DIM, nj)).copy_from(&rigid_pairing_rows(gj));
        }
        let factor = BorderedFactor::new(&a, &b, &c)?;
        log::debug!("transmission system {} unknowns, pivot ratio {:e}", 2 * dim + k, factor.pivot_ratio());
        Ok(Self {
            pair,
            grids,
            layout,
            background,
            interior_single,
            interior_kstar,
            psi_scale,
            factor,
        })
    }

    pub fn grids(&self) -> &[BoundaryGrid] {
        &self.grids
    }

    pub fn pair(&self) -> ContrastPair {
        self.pair
    }

    /// Solves with data given directly as nodal traces `h|_{dD_j}` and `dh/dnu0|_{dD_j}`.
    pub fn solve_data(&self, h: &[Density], dh: &[Density]) -> Result<(Vec<Density>, Vec<Density>)> {
        let dim = 2 * self.layout.total;
        let mut rhs = DVector::zeros(2 * dim);
        for (j, g) in self.grids.iter().enumerate() {
            let rj = 2 * self.layout.offsets[j];
            let n = 2 * g.len();
            rhs.rows_mut(rj, n).copy_from(&h[j].to_vector());
            rhs.rows_mut(dim + rj, n).copy_from(&dh[j].to_vector());
        }
        let crhs = DVector::zeros(RIGID_DIM * self.grids.len());
        let (x, _) = self.factor.solve(&rhs, &crhs)?;
        let phi = self.layout.split(&self.grids, x.as_slice(), 0);
        let psi = self
            .layout
            .split(&self.grids, x.as_slice(), dim)
            .into_iter()
            .map(|d| d.scale(self.psi_scale))
            .collect();
        Ok((phi, psi))
    }

    pub fn solve(&self, h: &BackgroundField) -> Result<TransmissionSolution> {
        let p0 = self.pair.background;
        let traces: Vec<Density> = self.grids.iter().map(|g| h.trace(g)).collect();
        let conormals: Vec<Density> = self.grids.iter().map(|g| h.conormal(&p0, g)).collect();
        let (phi, psi) = self.solve_data(&traces, &conormals)?;
        let boundary = self.boundary_traces(&phi, &psi);
        Ok(TransmissionSolution {
            pair: self.pair,
            grids: self.grids.clone(),
            phi,
            psi,
            h: h.clone(),
            boundary,
        })
    }

    fn boundary_traces(&self, phi: &[Density], psi: &[Density]) -> Vec<BoundaryTraces> {
        (0..self.grids.len())
            .map(|j| {
                let pv = psi[j].to_vector();
                let u_minus = Density::from_vector(&(&self.interior_single[j] * &pv));
                let t_minus = Density::from_vector(&(&self.interior_kstar[j] * &pv - &pv * 0.5));
                let (v_plus, tv_plus) = self.background.exterior_traces(phi, j);
                BoundaryTraces {
                    u_minus,
                    t_minus,
                    v_plus,
                    tv_plus,
                }
            })
            .collect()
    }
}

/// Nodal traces on one inclusion boundary: interior displacement and traction
/// of `u`, exterior displacement and traction of the scattered field `u - h`.
#[derive(Debug, Clone)]
pub struct BoundaryTraces {
    pub u_minus: Density,
    pub t_minus: Density,
    pub v_plus: Density,
    pub tv_plus: Density,
}

#[derive(Debug, Clone)]
pub struct TransmissionSolution {
    pub pair: ContrastPair,
    pub grids: Vec<BoundaryGrid>,
    pub phi: Vec<Density>,
    pub psi: Vec<Density>,
    pub h: BackgroundField,
    pub boundary: Vec<BoundaryTraces>,
}

/// Solves the transmission problem for `h` on disjoint curves.
pub fn solve_transmission(pair: &ContrastPair, curves: &[BoundaryGrid], h: &BackgroundField) -> Result<TransmissionSolution> {
    TransmissionOperator::new(*pair, curves.to_vec())?.solve(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    /// Rigid inclusion, `(-1/2 I + K0*) phi = -dh/dnu0`.
    Hard,
    /// Cavity, `(1/2 I + K0*) phi = -dh/dnu0`.
    Soft,
}

impl LimitMode {
    fn sign(self) -> f64 {
        match self {
            LimitMode::Hard => -0.5,
            LimitMode::Soft => 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LimitSolution {
    pub p0: LameParams,
    pub grids: Vec<BoundaryGrid>,
    pub phi: Vec<Density>,
    pub mode: LimitMode,
    pub h: BackgroundField,
    /// Exterior displacement and traction of `u - h` per component.
    pub exterior: Vec<(Density, Density)>,
}

/// Hard or soft limit densities, Psi-orthogonal per component.
pub fn solve_limit(p0: &LameParams, curves: &[BoundaryGrid], h: &BackgroundField, mode: LimitMode) -> Result<LimitSolution> {
    validate_grids(curves)?;
    let layout = Layout::new(curves);
    let blocks = BackgroundBlocks::new(p0, curves)?;
    let dim = 2 * layout.total;
    let k = RIGID_DIM * curves.len();
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, k);
    let mut c = DMatrix::zeros(k, dim);
    let mut rhs = DVector::zeros(dim);
    for (j, gj) in curves.iter().enumerate() {
        let rj = 2 * layout.offsets[j];
        let nj = 2 * gj.len();
        for kk in 0..curves.len() {
            put(&mut a, rj, 2 * layout.offsets[kk], &blocks.traction[j][kk], 1.0);
        }
        put_identity(&mut a, rj, rj, nj, mode.sign());
        b.view_mut((rj, RIGID_DIM * j), (nj, RIGID_DIM)).copy_from(&rigid_columns(gj));
        c.view_mut((RIGID_DIM * j, rj), (RIGID_DIM, nj)).copy_from(&rigid_pairing_rows(gj));
        rhs.rows_mut(rj, nj).copy_from(&(-h.conormal(p0, gj).to_vector()));
    }
    let factor = BorderedFactor::new(&a, &b, &c)?;
    let (x, _) = factor.solve(&rhs, &DVector::zeros(k))?;
    let phi = layout.split(curves, x.as_slice(), 0);
    let exterior = (0..curves.len()).map(|j| blocks.exterior_traces(&phi, j)).collect();
    Ok(LimitSolution {
        p0: *p0,
        grids: curves.to_vec(),
        phi,
        mode,
        h: h.clone(),
        exterior,
    })
}

/// Rigid motion fitted to the hard-limit boundary displacement of one component.
#[derive(Debug, Clone)]
pub struct RigidFit {
    /// Coefficients of `(1,0), (0,1), (-x2, x1)` about the origin.
    pub coefficients: Vector3<f64>,
    /// Sup norm of the fit residual on the boundary nodes.
    pub residual: f64,
    /// `int dU/dnu0|+ . psi_l` for each rigid motion.
    pub orthogonality: [f64; RIGID_DIM],
}

impl RigidFit {
    /// Coefficients with the rotation taken about `center` instead of the origin.
    pub fn about(&self, center: &Point) -> Vector3<f64> {
        let c = self.coefficients;
        Vector3::new(c[0] - c[2] * center.y, c[1] + c[2] * center.x, c[2])
    }
}

/// Relative fit residual above which a hard-limit solve is considered unconverged.
pub const RIGID_FIT_TOLERANCE: f64 = 1e-4;

/// Least-squares rigid fit of `u_inf|_{dD_j}` for every component.
pub fn recover_rigid_coefficients(sol: &LimitSolution) -> Result<Vec<RigidFit>> {
    if sol.mode != LimitMode::Hard {
        return Err(Error::Invalid("rigid coefficients need a hard-limit solution".into()));
    }
    let mut out = Vec::with_capacity(sol.grids.len());
    for (j, g) in sol.grids.iter().enumerate() {
        let (v, tv) = &sol.exterior[j];
        let u = sol.h.trace(g).add(v);
        let coefficients = rigid_gram(g)
            .lu()
            .solve(&Vector3::from(rigid_pairings(g, &u)))
            .ok_or(Error::Singular { pivot_ratio: 0.0 })?;
        let residual = u.sub(&rigid_density(g, &coefficients)).max_abs();
        let traction = sol.h.conormal(&sol.p0, g).add(tv);
        let orthogonality = rigid_pairings(g, &traction);
        if residual > RIGID_FIT_TOLERANCE * (1.0 + u.max_abs()) {
            return Err(Error::Invalid(format!(
                "hard-limit boundary trace is not rigid on component {j}: residual {residual:e}"
            )));
        }
        out.push(RigidFit {
            coefficients,
            residual,
            orthogonality,
        });
    }
    Ok(out)
}

fn sum_exterior(p0: &LameParams, grids: &[BoundaryGrid], phi: &[Density], points: &[Point], order: usize, refined: bool) -> Result<FieldEval> {
    let mut acc: Option<FieldEval> = None;
    for (g, f) in grids.iter().zip(phi) {
        let e = if refined {
            eval_potential_refined(p0, g, f, points, order)?
        } else {
            eval_potential(p0, g, f, points, order)?
        };
        acc = Some(match acc {
            None => e,
            Some(mut a) => {
                for (x, y) in a.values.iter_mut().zip(&e.values) {
                    *x += y;
                }
                if let (Some(ga), Some(ge)) = (a.gradients.as_mut(), e.gradients.as_ref()) {
                    for (x, y) in ga.iter_mut().zip(ge) {
                        *x += y;
                    }
                }
                for (x, y) in a.near_boundary.iter_mut().zip(&e.near_boundary) {
                    *x |= *y;
                }
                a
            }
        });
    }
    acc.ok_or_else(|| Error::Geometry("no inclusion curves".into()))
}

fn add_background(e: &mut FieldEval, h: &BackgroundField, points: &[Point]) {
    for (v, x) in e.values.iter_mut().zip(points) {
        *v += h.value(x);
    }
    if let Some(g) = e.gradients.as_mut() {
        for (d, x) in g.iter_mut().zip(points) {
            *d += h.gradient(x);
        }
    }
}

/// Index of the component containing `x`, if any.
fn region_of(grids: &[BoundaryGrid], x: &Point) -> Option<usize> {
    grids.iter().position(|g| g.contains(x))
}

fn scatter(groups: Vec<(Vec<usize>, FieldEval)>, n: usize, order: usize) -> FieldEval {
    let mut values = vec![Point::zeros(); n];
    let mut gradients = (order > 0).then(|| vec![Matrix2::zeros(); n]);
    let mut near = vec![false; n];
    for (idx, e) in groups {
        for (pos, &i) in idx.iter().enumerate() {
            values[i] = e.values[pos];
            near[i] = e.near_boundary[pos];
            if let (Some(g), Some(eg)) = (gradients.as_mut(), e.gradients.as_ref()) {
                g[i] = eg[pos];
            }
        }
    }
    FieldEval {
        values,
        gradients,
        near_boundary: near,
    }
}

impl TransmissionSolution {
    /// `u` at arbitrary points off the boundaries, accurate up to the boundary.
    pub fn eval(&self, points: &[Point], order: usize) -> Result<FieldEval> {
        let n_comp = self.grids.len();
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_comp + 1];
        for (i, x) in points.iter().enumerate() {
            buckets[region_of(&self.grids, x).unwrap_or(n_comp)].push(i);
        }
        let mut groups = Vec::new();
        for (r, idx) in buckets.into_iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let pts: Vec<Point> = idx.iter().map(|&i| points[i]).collect();
            let e = if r < n_comp {
                eval_potential_refined(&self.pair.inclusion, &self.grids[r], &self.psi[r], &pts, order)?
            } else {
                let mut e = sum_exterior(&self.pair.background, &self.grids, &self.phi, &pts, order, true)?;
                add_background(&mut e, &self.h, &pts);
                e
            };
            groups.push((idx, e));
        }
        Ok(scatter(groups, points.len(), order))
    }

    /// `u - h` outside the inclusions.
    pub fn scattered(&self, points: &[Point], order: usize) -> Result<FieldEval> {
        sum_exterior(&self.pair.background, &self.grids, &self.phi, points, order, true)
    }
}

impl LimitSolution {
    /// `u` outside the inclusions; inside, the rigid motion in hard mode, rejected in soft mode.
    pub fn eval(&self, points: &[Point], order: usize) -> Result<FieldEval> {
        let n_comp = self.grids.len();
        let inside: Vec<Option<usize>> = points.iter().map(|x| region_of(&self.grids, x)).collect();
        if self.mode == LimitMode::Soft && inside.iter().any(Option::is_some) {
            return Err(Error::Invalid("soft-limit solution is undefined inside the cavity".into()));
        }
        let fits = if self.mode == LimitMode::Hard && inside.iter().any(Option::is_some) {
            recover_rigid_coefficients(self)?
        } else {
            Vec::new()
        };
        let outside: Vec<usize> = (0..points.len()).filter(|&i| inside[i].is_none()).collect();
        let mut groups = Vec::new();
        if !outside.is_empty() {
            let pts: Vec<Point> = outside.iter().map(|&i| points[i]).collect();
            let mut e = sum_exterior(&self.p0, &self.grids, &self.phi, &pts, order, true)?;
            add_background(&mut e, &self.h, &pts);
            groups.push((outside, e));
        }
        for r in 0..n_comp {
            let idx: Vec<usize> = (0..points.len()).filter(|&i| inside[i] == Some(r)).collect();
            if idx.is_empty() {
                continue;
            }
            let c = fits[r].coefficients;
            let field = BackgroundField::Rigid([c[0], c[1], c[2]]);
            let values = idx.iter().map(|&i| field.value(&points[i])).collect();
            let gradients = (order > 0).then(|| idx.iter().map(|&i| field.gradient(&points[i])).collect());
            let near_boundary = vec![false; idx.len()];
            groups.push((
                idx,
                FieldEval {
                    values,
                    gradients,
                    near_boundary,
                },
            ));
        }
        Ok(scatter(groups, points.len(), order))
    }
}

/// Evaluates a transmission solution at one point.
pub fn eval_solution(sol: &TransmissionSolution, x: &Point) -> Result<(Point, Matrix2<f64>, bool)> {
    let e = sol.eval(std::slice::from_ref(x), 1)?;
    Ok((e.values[0], e.gradients.expect("order 1")[0], e.near_boundary[0]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyQuadrature {
    /// Tensor-product Gauss–Legendre (radial) times trapezoid (angular) per region.
    Polar { radial: usize, angular: usize },
    /// Green's identity on the boundaries and on the truncation circle.
    Boundary { circle_nodes: usize },
}

impl Default for EnergyQuadrature {
    fn default() -> Self {
        EnergyQuadrature::Polar {
            radial: 64,
            angular: 128,
        }
    }
}

/// The two contributions to `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    /// `1/2 int_D C1 e(u) : e(u)`.
    pub interior: f64,
    /// `1/2 int_{B_R \ D} C0 e(u - h) : e(u - h)`.
    pub exterior: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.interior + self.exterior
    }
}

/// `J[u]` truncated to the disk of radius `radius` about the origin.
///
/// The polar rule needs a single inclusion star-shaped about its curve centre;
/// several inclusions use the boundary rule.
pub fn energy_j(sol: &TransmissionSolution, radius: f64, quad: EnergyQuadrature) -> Result<Energy> {
    let max_r = sol
        .grids
        .iter()
        .map(|g| g.points().iter().map(|x| x.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    if radius < 2.0 * max_r {
        return Err(Error::Geometry(format!(
            "truncation radius {radius} below twice the inclusion extent {max_r}"
        )));
    }
    match quad {
        EnergyQuadrature::Polar { radial, angular } => {
            if sol.grids.len() != 1 {
                return Err(Error::Invalid("polar energy quadrature needs a single inclusion".into()));
            }
            polar_energy(sol, radius, radial, angular)
        }
        EnergyQuadrature::Boundary { circle_nodes } => boundary_energy(sol, radius, circle_nodes),
    }
}

/// `J` with the default quadrature for the solution's geometry.
pub fn energy_default(sol: &TransmissionSolution, radius: f64) -> Result<Energy> {
    let quad = if sol.grids.len() == 1 {
        EnergyQuadrature::default()
    } else {
        EnergyQuadrature::Boundary { circle_nodes: 512 }
    };
    energy_j(sol, radius, quad)
}

fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn polar_energy(sol: &TransmissionSolution, radius: f64, radial: usize, angular: usize) -> Result<Energy> {
    let curve = sol.grids[0].curve();
    let c = curve.center();
    let (rho, wr) = gauss_legendre(radial, 0.0, 1.0);
    let dt = 2.0 * PI / angular as f64;
    let ts: Vec<f64> = (0..angular).map(|m| m as f64 * dt).collect();

    let mut inner_pts = Vec::with_capacity(radial * angular);
    let mut inner_w = Vec::with_capacity(radial * angular);
    let mut outer_pts = Vec::with_capacity(radial * angular);
    let mut outer_w = Vec::with_capacity(radial * angular);
    for &t in &ts {
        let x = curve.position(t);
        let dx = curve.derivative(t);
        let d = x - c;
        let star = cross(&d, &dx);
        if star <= 0.0 {
            return Err(Error::Geometry("inclusion is not star-shaped about its centre".into()));
        }
        let len = d.norm();
        let e = d / len;
        let p = c + e * radius;
        let dp = (dx - e * e.dot(&dx)) * (radius / len);
        for (&r, &w) in rho.iter().zip(&wr) {
            inner_pts.push(c + d * r);
            inner_w.push(w * dt * r * star);
            outer_pts.push(x * (1.0 - r) + p * r);
            let jac = cross(&(p - x), &(dx * (1.0 - r) + dp * r)).abs();
            outer_w.push(w * dt * jac);
        }
    }
    let p1 = sol.pair.inclusion;
    let p0 = sol.pair.background;
    let inner = eval_potential_refined(&p1, &sol.grids[0], &sol.psi[0], &inner_pts, 1)?;
    let outer = eval_potential_refined(&p0, &sol.grids[0], &sol.phi[0], &outer_pts, 1)?;
    if inner.any_near() || outer.any_near() {
        log::warn!("energy quadrature nodes too close to the boundary for the refinement limit");
    }
    let integrate = |p: &LameParams, e: &FieldEval, w: &[f64]| -> f64 {
        e.gradients
            .as_ref()
            .expect("order 1")
            .iter()
            .zip(w)
            .map(|(g, w)| 0.5 * w * strain_energy_density(p, &sym(g)))
            .sum()
    };
    Ok(Energy {
        interior: integrate(&p1, &inner, &inner_w),
        exterior: integrate(&p0, &outer, &outer_w),
    })
}

fn boundary_energy(sol: &TransmissionSolution, radius: f64, circle_nodes: usize) -> Result<Energy> {
    let p0 = sol.pair.background;
    let mut interior = 0.0;
    let mut inner_flux = 0.0;
    for (g, tr) in sol.grids.iter().zip(&sol.boundary) {
        interior += 0.5 * pairing(g, &tr.u_minus, &tr.t_minus);
        inner_flux += pairing(g, &tr.v_plus, &tr.tv_plus);
    }
    let circle = sample_grid(&Curve::circle(radius)?, circle_nodes)?;
    let e = sum_exterior(&p0, &sol.grids, &sol.phi, circle.points(), 1, false)?;
    let grads = e.gradients.expect("order 1");
    let outer_flux: f64 = circle
        .weights()
        .iter()
        .zip(circle.normals())
        .zip(e.values.iter().zip(&grads))
        .map(|((w, n), (v, g))| w * v.dot(&conormal_of_gradient(&p0, g, n)))
        .sum();
    Ok(Energy {
        interior,
        exterior: 0.5 * (outer_flux - inner_flux),
    })
}
