//! Traction problem on a bounded domain `Omega` with inclusions, the
//! inclusion-free background solution `U`, the Neumann function and the
//! representation field `h`.
//!
//! Displacements on `dOmega` are normalized to be orthogonal to the rigid
//! motions in the weighted boundary pairing. The Neumann function is taken as
//! `N(x, y) = -Gamma0(x - y) + S0_Omega[theta_y](x)`, so that
//! `u = U - int_{dD} N(., y) phi(y)` on `dOmega`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::freespace::{BackgroundBlocks, BackgroundField, Layout, LimitMode};
use crate::geometry::{check_disjoint, BoundaryGrid, Point};
use crate::kernels::{KelvinConstants, RIGID_DIM};
use crate::material::{ContrastPair, LameParams};
use crate::numerics::BorderedFactor;
use crate::potentials::{
    assemble_kstar, assemble_single_layer, assemble_traction_cross, eval_potential_derivative, eval_potential_refined,
    pairing, project_psi, rigid_columns, rigid_pairing_rows, rigid_pairings, Density, FieldEval,
};

/// Relative size of `<g, psi_l>` tolerated before the data is projected.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-10;

fn compatible(omega: &BoundaryGrid, g: &Density) -> Density {
    let scale = g.max_abs() * omega.perimeter();
    let defect = rigid_pairings(omega, g).iter().map(|v| v.abs()).fold(0.0, f64::max);
    if defect > COMPATIBILITY_TOLERANCE * scale.max(1e-300) {
        log::warn!("Neumann data not balanced (defect {defect:e}); projecting out rigid components");
        project_psi(omega, g)
    } else {
        g.clone()
    }
}

/// Factored inclusion-free Neumann problem on `Omega`.
#[derive(Debug)]
pub struct BackgroundOperator {
    p0: LameParams,
    omega: Arc<BoundaryGrid>,
    single: DMatrix<f64>,
    pairing_rows: DMatrix<f64>,
    factor: BorderedFactor,
}

impl BackgroundOperator {
    pub fn new(p0: &LameParams, omega: &BoundaryGrid) -> Result<Self> {
        let single = assemble_single_layer(p0, omega, omega)?.matrix;
        let mut a = assemble_kstar(p0, omega)?.matrix;
        let n = a.nrows();
        for i in 0..n {
            a[(i, i)] -= 0.5;
        }
        let pairing_rows = rigid_pairing_rows(omega);
        let c = &pairing_rows * &single;
        let factor = BorderedFactor::new(&a, &rigid_columns(omega), &c)?;
        Ok(Self {
            p0: *p0,
            omega: Arc::new(omega.clone()),
            single,
            pairing_rows,
            factor,
        })
    }

    pub fn omega(&self) -> &BoundaryGrid {
        &self.omega
    }

    pub fn params(&self) -> LameParams {
        self.p0
    }

    /// `theta` with `(-1/2 + K0*) theta = data` up to rigid tractions and
    /// `<S0 theta, psi_l> = crhs_l`.
    fn solve_raw(&self, data: &DVector<f64>, crhs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.factor.solve(data, crhs)?.0)
    }

    pub fn solve(&self, g: &Density) -> Result<BackgroundSolution> {
        let g = compatible(&self.omega, g);
        let theta = Density::from_vector(&self.solve_raw(&g.to_vector(), &DVector::zeros(RIGID_DIM))?);
        let trace = Density::from_vector(&(&self.single * theta.to_vector()));
        Ok(BackgroundSolution {
            p0: self.p0,
            omega: self.omega.clone(),
            theta,
            g,
            trace,
        })
    }

    /// Data and constraint right-hand side of the correction density for a
    /// unit force `e_j` at `y` (without the constant flux term).
    fn pole_data(&self, y: &Point, j: usize) -> (DVector<f64>, DVector<f64>) {
        let k = KelvinConstants::new(&self.p0);
        let om = &self.omega;
        let mut data = DVector::zeros(2 * om.len());
        let mut gam = DVector::zeros(2 * om.len());
        for (m, (x, n)) in om.points().iter().zip(om.normals()).enumerate() {
            let t = k.traction(&(x - y), n).column(j).into_owned();
            let g = k.value(&(x - y)).column(j).into_owned();
            data[2 * m] = t.x;
            data[2 * m + 1] = t.y;
            gam[2 * m] = g.x;
            gam[2 * m + 1] = g.y;
        }
        (data, &self.pairing_rows * gam)
    }

    fn flux_constant(&self, j: usize) -> DVector<f64> {
        let n = self.omega.len();
        let per = self.omega.perimeter();
        DVector::from_fn(2 * n, |r, _| if r % 2 == j { -1.0 / per } else { 0.0 })
    }

    /// The Neumann function with pole `y`.
    pub fn neumann_function(&self, y: &Point) -> Result<NeumannFunction<'_>> {
        let spacing = self.omega.max_spacing();
        if !self.omega.contains(y) || self.omega.distance(y) < 5.0 * spacing {
            return Err(Error::TooCloseToBoundary([y.x, y.y]));
        }
        let mut theta = Vec::with_capacity(2);
        for j in 0..2 {
            let (data, crhs) = self.pole_data(y, j);
            theta.push(Density::from_vector(&self.solve_raw(&(data + self.flux_constant(j)), &crhs)?));
        }
        Ok(NeumannFunction {
            op: self,
            pole: *y,
            theta: [theta[0].clone(), theta[1].clone()],
            step: 1e-4 * 2.0 * self.omega.curve().max_radius(),
        })
    }

    /// `int N(x_m, y) f(y) dsigma(y)` at the nodes `x_m` of `dOmega` for a
    /// density `f` sampled on the inner curve `src`; one solve by linearity.
    pub fn neumann_potential(&self, src: &BoundaryGrid, f: &Density) -> Result<Density> {
        let k = KelvinConstants::new(&self.p0);
        let om = &self.omega;
        let n = om.len();
        let mut data = DVector::zeros(2 * n);
        let mut gam = DVector::zeros(2 * n);
        let total: Point = src.weights().iter().zip(f.values()).map(|(w, v)| v * *w).sum();
        for (m, (x, nx)) in om.points().iter().zip(om.normals()).enumerate() {
            let mut t = Point::zeros();
            let mut g = Point::zeros();
            for ((y, w), v) in src.points().iter().zip(src.weights()).zip(f.values()) {
                let wf = v * *w;
                t += k.traction(&(x - y), nx) * wf;
                g += k.value(&(x - y)) * wf;
            }
            let t = t - total / om.perimeter();
            data[2 * m] = t.x;
            data[2 * m + 1] = t.y;
            gam[2 * m] = g.x;
            gam[2 * m + 1] = g.y;
        }
        let crhs = &self.pairing_rows * &gam;
        let theta = self.solve_raw(&data, &crhs)?;
        Ok(Density::from_vector(&(&self.single * theta - gam)))
    }
}

/// Inclusion-free solution `U = S0_Omega[theta]`.
#[derive(Debug, Clone)]
pub struct BackgroundSolution {
    pub p0: LameParams,
    pub omega: Arc<BoundaryGrid>,
    pub theta: Density,
    /// Balanced Neumann data actually used.
    pub g: Density,
    /// `U` on `dOmega`.
    pub trace: Density,
}

impl BackgroundSolution {
    pub fn field(&self) -> BackgroundField {
        BackgroundField::Layer {
            params: self.p0,
            grid: self.omega.clone(),
            density: self.theta.clone(),
        }
    }

    pub fn eval(&self, points: &[Point], order: usize) -> Result<FieldEval> {
        eval_potential_refined(&self.p0, &self.omega, &self.theta, points, order)
    }
}

/// Solves the background Neumann problem with data `g` on `dOmega`.
pub fn solve_background(p0: &LameParams, omega: &BoundaryGrid, g: &Density) -> Result<BackgroundSolution> {
    BackgroundOperator::new(p0, omega)?.solve(g)
}

/// `d^alpha U(z0)` for `|alpha| <= 2` by analytic kernel differentiation.
pub fn field_derivatives(u: &BackgroundSolution, z0: &Point, alpha: [usize; 2]) -> Result<Point> {
    let order = alpha[0] + alpha[1];
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    if u.omega.distance(z0) < 5.0 * u.omega.max_spacing() || !u.omega.contains(z0) {
        return Err(Error::TooCloseToBoundary([z0.x, z0.y]));
    }
    eval_potential_derivative(&u.p0, &u.omega, &u.theta, z0, alpha)
}

/// `N(., y)` for one pole; column `j` is the response to a unit force `e_j`.
#[derive(Debug)]
pub struct NeumannFunction<'a> {
    op: &'a BackgroundOperator,
    pole: Point,
    theta: [Density; 2],
    step: f64,
}

fn stencil(beta: [usize; 2], h: f64) -> Vec<(Point, f64)> {
    let e = |a: f64, b: f64| Point::new(a * h, b * h);
    match beta {
        [1, 0] => vec![(e(1.0, 0.0), 0.5 / h), (e(-1.0, 0.0), -0.5 / h)],
        [0, 1] => vec![(e(0.0, 1.0), 0.5 / h), (e(0.0, -1.0), -0.5 / h)],
        [2, 0] => vec![(e(1.0, 0.0), 1.0 / (h * h)), (e(0.0, 0.0), -2.0 / (h * h)), (e(-1.0, 0.0), 1.0 / (h * h))],
        [0, 2] => vec![(e(0.0, 1.0), 1.0 / (h * h)), (e(0.0, 0.0), -2.0 / (h * h)), (e(0.0, -1.0), 1.0 / (h * h))],
        _ => {
            let c = 0.25 / (h * h);
            vec![(e(1.0, 1.0), c), (e(1.0, -1.0), -c), (e(-1.0, 1.0), -c), (e(-1.0, -1.0), c)]
        }
    }
}

impl NeumannFunction<'_> {
    pub fn pole(&self) -> Point {
        self.pole
    }

    pub fn correction(&self, j: usize) -> &Density {
        &self.theta[j]
    }

    /// `N(x, y)` at the nodes of `dOmega`.
    pub fn boundary_values(&self) -> Vec<Matrix2<f64>> {
        let k = KelvinConstants::new(&self.op.p0);
        let c0 = &self.op.single * self.theta[0].to_vector();
        let c1 = &self.op.single * self.theta[1].to_vector();
        self.op
            .omega
            .points()
            .iter()
            .enumerate()
            .map(|(m, x)| Matrix2::new(c0[2 * m], c1[2 * m], c0[2 * m + 1], c1[2 * m + 1]) - k.value(&(x - self.pole)))
            .collect()
    }

    /// `N(x, y)` at an interior point `x != y`.
    pub fn eval(&self, x: &Point) -> Result<Matrix2<f64>> {
        let k = KelvinConstants::new(&self.op.p0);
        let mut out = -k.value(&(x - self.pole));
        for j in 0..2 {
            let e = eval_potential_refined(&self.op.p0, &self.op.omega, &self.theta[j], std::slice::from_ref(x), 0)?;
            out.set_column(j, &(out.column(j) + e.values[0]));
        }
        Ok(out)
    }

    /// `dN(., y)/dnu0` on `dOmega` for each column.
    pub fn flux(&self) -> Result<[Density; 2]> {
        let k = KelvinConstants::new(&self.op.p0);
        let kstar = assemble_kstar(&self.op.p0, &self.op.omega)?;
        let om = &self.op.omega;
        let col = |j: usize| {
            let corr = kstar.apply(&self.theta[j]).sub(&self.theta[j].scale(0.5));
            let sing = om
                .points()
                .iter()
                .zip(om.normals())
                .map(|(x, n)| k.traction(&(x - self.pole), n).column(j).into_owned())
                .collect();
            corr.sub(&Density::new(sing).expect("finite traction"))
        };
        Ok([col(0), col(1)])
    }

    /// `d_z^beta N(x_m, z)` at `z = pole` on the nodes of `dOmega`, `|beta| in {1, 2}`.
    ///
    /// The `Gamma0` part is differentiated analytically; the correction by
    /// central differences of its data in the pole with Richardson extrapolation.
    pub fn pole_derivative(&self, beta: [usize; 2]) -> Result<Vec<Matrix2<f64>>> {
        let order = beta[0] + beta[1];
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let op = self.op;
        let kc = KelvinConstants::new(&op.p0);
        let mut cols = Vec::with_capacity(2);
        for j in 0..2 {
            let fd = |h: f64| {
                let mut data = DVector::zeros(2 * op.omega.len());
                let mut crhs = DVector::zeros(RIGID_DIM);
                for (shift, w) in stencil(beta, h) {
                    let (d, c) = op.pole_data(&(self.pole + shift), j);
                    data += d * w;
                    crhs += c * w;
                }
                (data, crhs)
            };
            let (d1, c1) = fd(self.step);
            let (d2, c2) = fd(0.5 * self.step);
            let data = (d2 * 4.0 - d1) / 3.0;
            let crhs = (c2 * 4.0 - c1) / 3.0;
            let theta = op.solve_raw(&data, &crhs)?;
            cols.push(&op.single * theta);
        }
        let sign = if order == 1 { -1.0 } else { 1.0 };
        Ok(op
            .omega
            .points()
            .iter()
            .enumerate()
            .map(|(m, x)| {
                let z = x - self.pole;
                let d = match beta {
                    [1, 0] => kc.gradient(&z)[0],
                    [0, 1] => kc.gradient(&z)[1],
                    [2, 0] => kc.hessian(&z)[0][0],
                    [1, 1] => kc.hessian(&z)[0][1],
                    _ => kc.hessian(&z)[1][1],
                };
                Matrix2::new(cols[0][2 * m], cols[1][2 * m], cols[0][2 * m + 1], cols[1][2 * m + 1]) - d * sign
            })
            .collect())
    }
}

/// Which problem is posed inside the inclusions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BvpMode {
    Transmission(ContrastPair),
    Limit(LameParams, LimitMode),
}

impl BvpMode {
    pub fn background(&self) -> LameParams {
        match self {
            BvpMode::Transmission(pair) => pair.background,
            BvpMode::Limit(p0, _) => *p0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub mode: BvpMode,
    pub omega: Arc<BoundaryGrid>,
    pub grids: Vec<BoundaryGrid>,
    pub theta: Density,
    pub phi: Vec<Density>,
    /// Interior densities; empty in the limit modes.
    pub psi: Vec<Density>,
    pub g: Density,
    /// `u` on `dOmega`.
    pub trace: Density,
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

fn check_geometry(omega: &BoundaryGrid, grids: &[BoundaryGrid]) -> Result<()> {
    if grids.is_empty() {
        return Err(Error::Geometry("no inclusion curves".into()));
    }
    check_disjoint(grids, 0.0)?;
    for (j, g) in grids.iter().enumerate() {
        let gap = g.points().iter().map(|x| omega.distance(x)).fold(f64::INFINITY, f64::min);
        if g.points().iter().any(|x| !omega.contains(x)) || gap < 5.0 * omega.max_spacing().max(g.max_spacing()) {
            return Err(Error::Geometry(format!("inclusion {j} is not well inside the domain")));
        }
    }
    Ok(())
}

fn solve_coupled(mode: BvpMode, omega: &BoundaryGrid, grids: &[BoundaryGrid], g: &Density) -> Result<BvpSolution> {
    check_geometry(omega, grids)?;
    let p0 = mode.background();
    let g = compatible(omega, g);
    let layout = Layout::new(grids);
    let blocks = BackgroundBlocks::new(&p0, grids)?;
    let no = 2 * omega.len();
    let nd = 2 * layout.total;
    let with_interior = matches!(mode, BvpMode::Transmission(_));
    let dir_rows = no;
    let tr_rows = if with_interior { no + nd } else { no };
    let phi_cols = no;
    let psi_cols = no + nd;
    let size = if with_interior { no + 2 * nd } else { no + nd };
    let kdim = RIGID_DIM * (1 + grids.len());

    let s_oo = assemble_single_layer(&p0, omega, omega)?.matrix;
    let mut a = DMatrix::zeros(size, size);
    let mut b = DMatrix::zeros(size, kdim);
    let mut c = DMatrix::zeros(kdim, size);

    put(&mut a, 0, 0, &assemble_kstar(&p0, omega)?.matrix, 1.0);
    put_identity(&mut a, 0, 0, no, -0.5);
    b.view_mut((0, 0), (no, RIGID_DIM)).copy_from(&rigid_columns(omega));
    let pr_o = rigid_pairing_rows(omega);
    put(&mut c, 0, 0, &(&pr_o * &s_oo), 1.0);

    let mut s_od = Vec::with_capacity(grids.len());
    let psi_scale = match mode {
        BvpMode::Transmission(pair) => p0.kelvin_alpha() / pair.inclusion.kelvin_alpha(),
        BvpMode::Limit(..) => 1.0,
    };
    for (j, gj) in grids.iter().enumerate() {
        let rj = 2 * layout.offsets[j];
        let nj = 2 * gj.len();
        let col_j = phi_cols + rj;
        // Omega rows and constraint see every inclusion.
        put(&mut a, 0, col_j, &assemble_traction_cross(&p0, gj, omega)?.matrix, 1.0);
        let s = assemble_single_layer(&p0, gj, omega)?.matrix;
        put(&mut c, 0, col_j, &(&pr_o * &s), 1.0);
        s_od.push(s);
        // Traction rows of inclusion j.
        let t_row = tr_rows + rj;
        let t_do = assemble_traction_cross(&p0, omega, gj)?.matrix;
        let sign = match mode {
            BvpMode::Transmission(_) => -1.0,
            BvpMode::Limit(..) => 1.0,
        };
        put(&mut a, t_row, 0, &t_do, sign);
        for kk in 0..grids.len() {
            put(&mut a, t_row, phi_cols + 2 * layout.offsets[kk], &blocks.traction[j][kk], sign);
        }
        match mode {
            BvpMode::Transmission(pair) => {
                put_identity(&mut a, t_row, col_j, nj, -0.5);
                let p1 = pair.inclusion;
                let psi_col = psi_cols + rj;
                put(&mut a, t_row, psi_col, &assemble_kstar(&p1, gj)?.matrix, psi_scale);
                put_identity(&mut a, t_row, psi_col, nj, -0.5 * psi_scale);
                let d_row = dir_rows + rj;
                put(&mut a, d_row, psi_col, &assemble_single_layer(&p1, gj, gj)?.matrix, psi_scale);
                put(&mut a, d_row, 0, &assemble_single_layer(&p0, omega, gj)?.matrix, -1.0);
                for kk in 0..grids.len() {
                    put(&mut a, d_row, phi_cols + 2 * layout.offsets[kk], &blocks.single[j][kk], -1.0);
                }
            }
            BvpMode::Limit(_, lm) => {
                let s = if lm == LimitMode::Hard { -0.5 } else { 0.5 };
                put_identity(&mut a, t_row, col_j, nj, s);
            }
        }
        let kc = RIGID_DIM * (1 + j);
        b.view_mut((t_row, kc), (nj, RIGID_DIM)).copy_from(&rigid_columns(gj));
        c.view_mut((kc, col_j), (RIGID_DIM, nj)).copy_from(&rigid_pairing_rows(gj));
    }

    let factor = BorderedFactor::new(&a, &b, &c)?;
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, no).copy_from(&g.to_vector());
    let (x, _) = factor.solve(&rhs, &DVector::zeros(kdim))?;
    let theta = Density::from_vector(&x.rows(0, no).into_owned());
    let phi = layout.split(grids, x.as_slice(), phi_cols);
    let psi = if with_interior {
        layout
            .split(grids, x.as_slice(), psi_cols)
            .into_iter()
            .map(|d| d.scale(psi_scale))
            .collect()
    } else {
        Vec::new()
    };
    let mut trace = &s_oo * theta.to_vector();
    for (s, f) in s_od.iter().zip(&phi) {
        trace += s * f.to_vector();
    }
    Ok(BvpSolution {
        mode,
        omega: Arc::new(omega.clone()),
        grids: grids.to_vec(),
        theta,
        phi,
        psi,
        g,
        trace: Density::from_vector(&trace),
    })
}

/// The Neumann problem with inclusions of contrast `pair`.
pub fn solve_with_inclusion(pair: &ContrastPair, omega: &BoundaryGrid, curves: &[BoundaryGrid], g: &Density) -> Result<BvpSolution> {
    solve_coupled(BvpMode::Transmission(*pair), omega, curves, g)
}

/// The Neumann problem with rigid (hard) inclusions or cavities (soft).
pub fn solve_limit_bvp(p0: &LameParams, omega: &BoundaryGrid, curves: &[BoundaryGrid], g: &Density, mode: LimitMode) -> Result<BvpSolution> {
    solve_coupled(BvpMode::Limit(*p0, mode), omega, curves, g)
}

impl BvpSolution {
    /// `J_Omega = 1/2 int_Omega C grad u : grad u`, by Green's identity `1/2 int_{dOmega} u . g`.
    pub fn energy(&self) -> f64 {
        0.5 * pairing(&self.omega, &self.trace, &self.g)
    }

    /// `u` at interior points outside the inclusions (and inside them in transmission mode).
    pub fn eval(&self, points: &[Point], order: usize) -> Result<FieldEval> {
        let p0 = self.mode.background();
        let mut out = eval_potential_refined(&p0, &self.omega, &self.theta, points, order)?;
        for (i, x) in points.iter().enumerate() {
            if let Some(j) = self.grids.iter().position(|g| g.contains(x)) {
                let BvpMode::Transmission(pair) = self.mode else {
                    return Err(Error::Invalid("limit solution is not evaluated inside inclusions".into()));
                };
                let e = eval_potential_refined(&pair.inclusion, &self.grids[j], &self.psi[j], std::slice::from_ref(x), order)?;
                out.values[i] = e.values[0];
                if let (Some(g), Some(eg)) = (out.gradients.as_mut(), e.gradients) {
                    g[i] = eg[0];
                }
                out.near_boundary[i] = e.near_boundary[0];
                continue;
            }
            for (g, f) in self.grids.iter().zip(&self.phi) {
                let e = eval_potential_refined(&p0, g, f, std::slice::from_ref(x), order)?;
                out.values[i] += e.values[0];
                if let (Some(gr), Some(eg)) = (out.gradients.as_mut(), e.gradients) {
                    gr[i] += eg[0];
                }
                out.near_boundary[i] |= e.near_boundary[0];
            }
        }
        Ok(out)
    }
}

/// The field `h` built from the Cauchy data of `u` on `dOmega`.
pub fn make_h(sol: &BvpSolution) -> BackgroundField {
    BackgroundField::Boundary {
        params: sol.mode.background(),
        grid: sol.omega.clone(),
        displacement: sol.trace.clone(),
        traction: sol.g.clone(),
    }
}

/// Traction of `Gamma0(. - source) force` on `dOmega`: balanced data for sources outside `Omega`.
pub fn point_source_traction(p0: &LameParams, omega: &BoundaryGrid, source: &Point, force: &Point) -> Density {
    BackgroundField::PointSource {
        params: *p0,
        source: *source,
        force: *force,
    }
    .conormal(p0, omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freespace::solve_transmission;
    use crate::geometry::{sample_grid, Curve};
    use crate::potentials::{rigid_coefficients, rigid_density};

    fn p0() -> LameParams {
        LameParams::planar(0.5, 1.0).unwrap()
    }

    fn omega(n: usize) -> BoundaryGrid {
        sample_grid(&Curve::circle(3.0).unwrap(), n).unwrap()
    }

    fn data(om: &BoundaryGrid) -> Density {
        point_source_traction(&p0(), om, &Point::new(4.5, 2.0), &Point::new(1.0, 0.5))
    }

    fn inclusion(eps: f64, n: usize) -> BoundaryGrid {
        sample_grid(&Curve::circle(eps).unwrap().with_center(Point::new(0.3, -0.2)), n).unwrap()
    }

    #[test]
    fn background_examples() {
        let om = omega(128);
        let op = BackgroundOperator::new(&p0(), &om).unwrap();
        let zero = op.solve(&Density::zeros(128)).unwrap();
        assert_eq!(zero.theta.max_abs(), 0.0);
        // Linear data: U is the linear field minus its rigid projection.
        let h = BackgroundField::shear();
        let u = op.solve(&h.conormal(&p0(), &om)).unwrap();
        let exact = h.trace(&om);
        let exact = exact.sub(&rigid_density(&om, &rigid_coefficients(&om, &exact)));
        assert!(u.trace.sub(&exact).max_abs() < 1e-6);
        for v in rigid_pairings(&om, &u.trace) {
            assert!(v.abs() < 1e-10);
        }
        let z0 = Point::new(0.3, -0.2);
        for a in [[2, 0], [1, 1], [0, 2]] {
            assert!(field_derivatives(&u, &z0, a).unwrap().norm() < 1e-6);
        }
        assert!(field_derivatives(&u, &z0, [2, 1]).is_err());
        let g = data(&om);
        assert!(rigid_pairings(&om, &g).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn background_derivatives_match_finite_differences() {
        let om = omega(256);
        let u = solve_background(&p0(), &om, &data(&om)).unwrap();
        let z0 = Point::new(0.3, -0.2);
        let h = 1e-4;
        let e = Point::new(h, 0.0);
        let v = u.eval(&[z0 + e, z0 - e], 0).unwrap().values;
        let fd = (v[0] - v[1]) / (2.0 * h);
        assert!((fd - field_derivatives(&u, &z0, [1, 0]).unwrap()).norm() < 1e-7);
        assert!(field_derivatives(&BackgroundOperator::new(&p0(), &om).unwrap().solve(&Density::zeros(256)).unwrap(), &z0, [1, 0])
            .unwrap()
            .norm()
            == 0.0);
    }

    #[test]
    fn neumann_function_properties() {
        let om = omega(256);
        let op = BackgroundOperator::new(&p0(), &om).unwrap();
        // Flux is -I/|dOmega| up to a rigid traction; exactly so for a centred pole.
        for y in [Point::zeros(), Point::new(0.7, -0.4)] {
            let nf = op.neumann_function(&y).unwrap();
            for (j, f) in nf.flux().unwrap().iter().enumerate() {
                let mut e = Point::zeros();
                e[j] = -1.0 / om.perimeter();
                let defect = f.sub(&Density::from_fn(&om, |_, _| e));
                let rest = defect.sub(&rigid_density(&om, &rigid_coefficients(&om, &defect)));
                assert!(rest.max_abs() < 1e-6);
                if y == Point::zeros() {
                    assert!(defect.max_abs() < 1e-6);
                }
            }
        }
        // Reciprocity.
        let (a, b) = (Point::new(0.5, 0.2), Point::new(-0.8, 1.1));
        let na = op.neumann_function(&a).unwrap().eval(&b).unwrap();
        let nb = op.neumann_function(&b).unwrap().eval(&a).unwrap();
        assert!((na - nb.transpose()).norm() < 1e-5 * na.norm());
        assert!(op.neumann_function(&Point::new(2.99, 0.0)).is_err());
    }

    #[test]
    fn neumann_pole_derivatives_match_finite_differences() {
        let om = omega(128);
        let op = BackgroundOperator::new(&p0(), &om).unwrap();
        let y = Point::new(0.3, -0.2);
        let nf = op.neumann_function(&y).unwrap();
        let h = 1e-3;
        let shifted = |d: Point| op.neumann_function(&(y + d)).unwrap().boundary_values();
        let plus = shifted(Point::new(h, 0.0));
        let minus = shifted(Point::new(-h, 0.0));
        let centre = nf.boundary_values();
        let d1 = nf.pole_derivative([1, 0]).unwrap();
        let d2 = nf.pole_derivative([2, 0]).unwrap();
        for m in [0usize, 40, 99] {
            let fd1 = (plus[m] - minus[m]) / (2.0 * h);
            let fd2 = (plus[m] - centre[m] * 2.0 + minus[m]) / (h * h);
            assert!((fd1 - d1[m]).norm() < 1e-6 * (1.0 + d1[m].norm()));
            assert!((fd2 - d2[m]).norm() < 1e-5 * (1.0 + d2[m].norm()));
        }
    }

    #[test]
    fn zero_contrast_matches_background() {
        let om = omega(128);
        let g = data(&om);
        let pair = ContrastPair::new(p0(), p0());
        let sol = solve_with_inclusion(&pair, &om, &[inclusion(0.3, 64)], &g).unwrap();
        let u = solve_background(&p0(), &om, &g).unwrap();
        assert!(sol.theta.sub(&u.theta).max_abs() < 1e-9);
        assert!(sol.phi[0].max_abs() < 1e-9);
        let zero = solve_with_inclusion(&pair, &om, &[inclusion(0.3, 64)], &Density::zeros(128)).unwrap();
        assert_eq!(zero.trace.max_abs(), 0.0);
        // h from the zero-contrast solve is U in the interior.
        let h = make_h(&sol);
        for x in [Point::new(0.3, 0.4), Point::new(-1.0, 1.5)] {
            let ux = u.eval(&[x], 0).unwrap().values[0];
            assert!((h.value(&x) - ux).norm() < 1e-7);
        }
    }

    #[test]
    fn two_route_boundary_trace() {
        let om = omega(256);
        let g = data(&om);
        let pair = ContrastPair::new(p0(), LameParams::planar(1.0, 2.0).unwrap());
        let d = inclusion(0.3, 128);
        let sol = solve_with_inclusion(&pair, &om, &[d.clone()], &g).unwrap();
        let op = BackgroundOperator::new(&p0(), &om).unwrap();
        let u = op.solve(&g).unwrap();
        let route = u.trace.sub(&op.neumann_potential(&d, &sol.phi[0]).unwrap());
        let rel = route.sub(&sol.trace).max_abs() / sol.trace.max_abs();
        assert!(rel < 1e-6, "{rel:e}");
    }

    #[test]
    fn h_is_the_omega_layer_and_solves_the_system() {
        let om = omega(256);
        let g = data(&om);
        let pair = ContrastPair::new(p0(), LameParams::planar(1.0, 2.0).unwrap());
        let sol = solve_with_inclusion(&pair, &om, &[inclusion(0.3, 128)], &g).unwrap();
        let h = make_h(&sol);
        let layer = BackgroundField::Layer {
            params: p0(),
            grid: sol.omega.clone(),
            density: sol.theta.clone(),
        };
        let x = Point::new(0.9, 0.6);
        assert!((h.value(&x) - layer.value(&x)).norm() < 1e-8);
        assert!((h.gradient(&x) - layer.gradient(&x)).norm() < 1e-8);
        assert!(h.pde_residual(&p0(), &x).unwrap() < 1e-6);
    }

    #[test]
    fn energy_and_limits() {
        let om = omega(128);
        let g = data(&om);
        let d = inclusion(0.3, 64);
        let bg = solve_background(&p0(), &om, &g).unwrap();
        let free = solve_transmission(
            &ContrastPair::new(p0(), p0()),
            &[d.clone()],
            &bg.field(),
        )
        .unwrap();
        assert!(free.phi[0].max_abs() < 1e-9);
        let mut energies = Vec::new();
        for mu in [10.0, 1e3, 1e5] {
            let pair = ContrastPair::new(p0(), LameParams::planar(1.0, mu).unwrap());
            energies.push(solve_with_inclusion(&pair, &om, &[d.clone()], &g).unwrap().energy());
        }
        let hard = solve_limit_bvp(&p0(), &om, &[d.clone()], &g, LimitMode::Hard).unwrap();
        assert!(energies.iter().all(|e| *e > 0.0));
        let last = *energies.last().unwrap();
        assert!((last - hard.energy()).abs() < 1e-3 * last);
        let soft = solve_limit_bvp(&p0(), &om, &[d.clone()], &g, LimitMode::Soft).unwrap();
        assert!(soft.energy() > hard.energy());
        assert!(soft.eval(&[d.curve().center()], 0).is_err());
    }

    #[test]
    fn geometry_violations() {
        let om = omega(64);
        let g = data(&om);
        let pair = ContrastPair::new(p0(), LameParams::planar(1.0, 2.0).unwrap());
        let outside = sample_grid(&Curve::circle(0.5).unwrap().with_center(Point::new(2.8, 0.0)), 64).unwrap();
        assert!(solve_with_inclusion(&pair, &om, &[outside], &g).is_err());
    }
}
