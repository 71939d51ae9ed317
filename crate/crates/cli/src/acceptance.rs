//! Acceptance criteria 1-11. Each yields one PASS/FAIL line.

use std::cell::OnceCell;
use std::f64::consts::FRAC_PI_2;

use elastobie_core::bvp::{point_source_traction, solve_with_inclusion, BackgroundOperator};
use elastobie_core::emt::{compute_emt, emt_as_tensor, major_asymmetry, rotate_tensor, tensor_distance, tensor_norm};
use elastobie_core::freespace::{solve_transmission, BackgroundField};
use elastobie_core::material::apply_elasticity_tensor;
use elastobie_core::potentials::{conormal_trace, eval_potential_refined, sobolev_norm, Density, Side};
use elastobie_core::{sample_grid, ContrastPair, Curve, LameParams, Matrix2, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CurveSpec, ExperimentConfig, ExperimentKind};
use crate::experiments::{run_experiment, Outcome, Verdict};

pub const CRITERIA: [usize; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

/// Criteria that fail for a reason outside the solver, with the reason.
pub const KNOWN_LIMITATIONS: [(usize, &str); 1] = [(
    3,
    "on this kite parametrization |x'| has complex zeros at Im t = 0.167, so the exact density keeps \
     Fourier modes of size 1e-6 at |k| = 64 that 128 nodes cannot carry",
)];

pub fn known_limitation(criterion: usize) -> Option<&'static str> {
    KNOWN_LIMITATIONS.iter().find(|(k, _)| *k == criterion).map(|(_, why)| *why)
}

pub const JUMP_FD_TOLERANCE: f64 = 1e-4;
pub const JUMP_IDENTITY_TOLERANCE: f64 = 1e-12;
pub const ESHELBY_TOLERANCE: f64 = 1e-6;
pub const SELF_CONVERGENCE_TOLERANCE: f64 = 1e-8;
pub const EMT_ZERO_TOLERANCE: f64 = 1e-10;
pub const EMT_SYMMETRY_TOLERANCE: f64 = 1e-8;
pub const TWO_ROUTE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub criterion: usize,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} criterion {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.detail
        );
        if let (false, Some(why)) = (self.pass, known_limitation(self.criterion)) {
            s += &format!(" [known limitation: {why}]");
        }
        s
    }
}

fn result(criterion: usize, pass: bool, detail: String) -> CriterionResult {
    CriterionResult { criterion, pass, detail }
}

fn background() -> LameParams {
    LameParams::planar(0.5, 1.0).expect("valid")
}

/// Sweeps shared between criteria are run once per suite.
#[derive(Default)]
pub struct Suite {
    mu: OnceCell<Outcome>,
    soft: OnceCell<Outcome>,
    mu_two: OnceCell<Outcome>,
    soft_two: OnceCell<Outcome>,
}

fn two_disks() -> Vec<CurveSpec> {
    vec![
        CurveSpec::Circle {
            radius: 0.3,
            center: [-0.6, 0.0],
        },
        CurveSpec::Circle {
            radius: 0.3,
            center: [0.6, 0.1],
        },
    ]
}

fn sweep(kind: ExperimentKind, inclusions: Option<Vec<CurveSpec>>) -> anyhow::Result<Outcome> {
    let mut cfg = ExperimentConfig::defaults(kind);
    cfg.geometry.inclusions = inclusions;
    run_experiment(&cfg)
}

fn find<'a>(outcome: &'a Outcome, name: &str) -> &'a Verdict {
    outcome
        .verdicts
        .iter()
        .find(|v| v.name == name)
        .unwrap_or_else(|| panic!("no verdict `{name}`"))
}

fn combine(criterion: usize, verdicts: &[&Verdict]) -> CriterionResult {
    let pass = verdicts.iter().all(|v| v.pass);
    let detail: Vec<String> = verdicts.iter().map(|v| format!("{} ({})", v.name, v.detail)).collect();
    result(criterion, pass, detail.join("; "))
}

impl Suite {
    fn mu(&self, two: bool) -> anyhow::Result<&Outcome> {
        let cell = if two { &self.mu_two } else { &self.mu };
        if cell.get().is_none() {
            let _ = cell.set(sweep(ExperimentKind::MuSweep, two.then(two_disks))?);
        }
        Ok(cell.get().expect("set"))
    }

    fn soft(&self, two: bool) -> anyhow::Result<&Outcome> {
        let cell = if two { &self.soft_two } else { &self.soft };
        if cell.get().is_none() {
            let _ = cell.set(sweep(ExperimentKind::SoftSweep, two.then(two_disks))?);
        }
        Ok(cell.get().expect("set"))
    }

    fn rates(&self, criterion: usize, two: bool) -> anyhow::Result<Vec<&Verdict>> {
        let mu = self.mu(two)?;
        Ok(match criterion {
            4 => vec![
                find(mu, "all rows solved"),
                find(mu, "r strictly decreasing"),
                find(mu, "r sqrt(mu) bounded"),
            ],
            5 => {
                let soft = self.soft(two)?;
                vec![find(soft, "all rows solved"), find(soft, "r (kappa + mu)^(-1/4) bounded")]
            }
            _ => vec![find(mu, "energy bounded")],
        })
    }

    pub fn run(&self, criterion: usize) -> anyhow::Result<CriterionResult> {
        match criterion {
            1 => jump_relation(),
            2 => eshelby(),
            3 => self_convergence(),
            4..=6 => Ok(combine(criterion, &self.rates(criterion, false)?)),
            7 => emt_structure(),
            8 => two_route(),
            9 => {
                let o = sweep(ExperimentKind::EpsilonSweep, None)?;
                Ok(combine(9, &[find(&o, "all rows solved"), find(&o, "expansion order")]))
            }
            10 => {
                let o = sweep(ExperimentKind::UniformitySweep, None)?;
                Ok(combine(10, &[find(&o, "all rows solved"), find(&o, "error constant uniform")]))
            }
            11 => {
                let mut all = Vec::new();
                for k in 4..=6 {
                    all.extend(self.rates(k, true)?);
                }
                Ok(combine(11, &all))
            }
            k => anyhow::bail!("no criterion {k}"),
        }
    }
}

/// Runs `selected` in order, passing each PASS/FAIL line to `emit` as soon as
/// it is known. A criterion whose run errors is reported as FAIL.
pub fn run_all(selected: &[usize], mut emit: impl FnMut(&str)) -> anyhow::Result<Vec<CriterionResult>> {
    let suite = Suite::default();
    let mut out = Vec::new();
    for &k in selected {
        if !CRITERIA.contains(&k) {
            anyhow::bail!("no criterion {k}");
        }
        let r = suite.run(k).unwrap_or_else(|e| result(k, false, format!("error: {e:#}")));
        emit(&r.line());
        out.push(r);
    }
    Ok(out)
}

fn traction(p: &LameParams, grad: &Matrix2<f64>, n: &Point) -> Point {
    let strain = (grad + grad.transpose()) * 0.5;
    apply_elasticity_tensor(p, &strain) * n
}

/// Value at 0 of the polynomial through `(x_k, y_k)`.
fn extrapolate_to_zero(x: &[f64], y: &[Point]) -> Point {
    let mut acc = Point::zeros();
    for k in 0..x.len() {
        let mut w = 1.0;
        for m in 0..x.len() {
            if m != k {
                w *= x[m] / (x[m] - x[k]);
            }
        }
        acc += y[k] * w;
    }
    acc
}

fn jump_relation() -> anyhow::Result<CriterionResult> {
    let p = background();
    let grid = sample_grid(&Curve::ellipse(1.0, 0.6)?, 256)?;
    let phi = Density::from_fn(&grid, |t, _| Point::new(t.cos(), (2.0 * t).sin()));
    let ext = conormal_trace(&p, &grid, &phi, Side::Exterior)?;
    let int = conormal_trace(&p, &grid, &phi, Side::Interior)?;
    let identity = ext.sub(&int).sub(&phi).max_abs();

    let deltas: Vec<f64> = (1..=4).map(|k| 1e-3 * k as f64).collect();
    let mut fd_error: f64 = 0.0;
    for (side, sign) in [(&ext, 1.0), (&int, -1.0)] {
        let mut pts = Vec::with_capacity(grid.len() * deltas.len());
        for (x, n) in grid.points().iter().zip(grid.normals()) {
            for d in &deltas {
                pts.push(x + n * (sign * d));
            }
        }
        let eval = eval_potential_refined(&p, &grid, &phi, &pts, 1)?;
        let grads = eval.gradients.expect("order 1");
        for (m, n) in grid.normals().iter().enumerate() {
            let t: Vec<Point> = (0..deltas.len())
                .map(|k| traction(&p, &grads[m * deltas.len() + k], n))
                .collect();
            let limit = extrapolate_to_zero(&deltas, &t);
            fd_error = fd_error.max((limit - side.values()[m]).amax());
        }
    }
    Ok(result(
        1,
        fd_error <= JUMP_FD_TOLERANCE && identity <= JUMP_IDENTITY_TOLERANCE,
        format!(
            "finite-difference trace error {fd_error:.3e} (tol {JUMP_FD_TOLERANCE:e}), identity residual {identity:.3e} (tol {JUMP_IDENTITY_TOLERANCE:e})"
        ),
    ))
}

fn eshelby() -> anyhow::Result<CriterionResult> {
    let pair = ContrastPair::new(LameParams::planar(0.0, 1.0)?, LameParams::planar(0.0, 2.0)?);
    let grid = sample_grid(&Curve::circle(1.0)?, 256)?;
    let sol = solve_transmission(&pair, &[grid], &BackgroundField::shear())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Point> = (0..50)
        .map(|_| {
            let r = 0.9 * rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect();
    let grads = sol.eval(&pts, 1)?.gradients.expect("order 1");
    let strains: Vec<_> = grads.iter().map(|g| (g + g.transpose()) * 0.5).collect();
    let mean = strains.iter().skip(1).fold(strains[0], |a, s| a + s) / strains.len() as f64;
    let var = strains.iter().map(|s| (s - mean).norm_squared()).sum::<f64>() / strains.len() as f64;
    let rel = var.sqrt() / mean.norm();
    Ok(result(
        2,
        rel <= ESHELBY_TOLERANCE,
        format!("relative strain deviation {rel:.3e} over 50 points (tol {ESHELBY_TOLERANCE:e})"),
    ))
}

fn self_convergence() -> anyhow::Result<CriterionResult> {
    let pair = ContrastPair::new(background(), LameParams::planar(1.0, 2.0)?);
    let kite = Curve::kite();
    let h = BackgroundField::shear();
    let coarse = solve_transmission(&pair, &[sample_grid(&kite, 128)?], &h)?;
    let fine = solve_transmission(&pair, &[sample_grid(&kite, 512)?], &h)?;
    let d_phi = sobolev_norm(&coarse.phi[0].sub(&fine.phi[0].restrict(4)), -0.5);
    let d_psi = sobolev_norm(&coarse.psi[0].sub(&fine.psi[0].restrict(4)), -0.5);
    let d = d_phi.max(d_psi);
    Ok(result(
        3,
        d <= SELF_CONVERGENCE_TOLERANCE,
        format!("|phi_128 - phi_512| = {d_phi:.3e}, |psi_128 - psi_512| = {d_psi:.3e} (tol {SELF_CONVERGENCE_TOLERANCE:e})"),
    ))
}

fn emt_structure() -> anyhow::Result<CriterionResult> {
    let p0 = background();
    let disk = sample_grid(&Curve::circle(1.0)?, 256)?;
    let kite = sample_grid(&Curve::kite(), 256)?;
    let pair = ContrastPair::new(p0, LameParams::planar(1.0, 2.0)?);
    let mut asym: f64 = 0.0;
    for b in [&disk, &kite] {
        let m = emt_as_tensor(&compute_emt(&pair, b)?)?;
        asym = asym.max(major_asymmetry(&m) / tensor_norm(&m));
    }
    let zero = compute_emt(&ContrastPair::new(p0, p0), &disk)?.max_abs();
    let m = emt_as_tensor(&compute_emt(&pair, &disk)?)?;
    let rot = tensor_distance(&rotate_tensor(&m, FRAC_PI_2), &m) / tensor_norm(&m);
    Ok(result(
        7,
        asym <= EMT_SYMMETRY_TOLERANCE && zero <= EMT_ZERO_TOLERANCE && rot <= EMT_SYMMETRY_TOLERANCE,
        format!("major asymmetry {asym:.3e}, zero-contrast max {zero:.3e}, disk rotation defect {rot:.3e}"),
    ))
}

fn two_route() -> anyhow::Result<CriterionResult> {
    let p0 = background();
    let omega = sample_grid(&Curve::circle(3.0)?, 256)?;
    let g = point_source_traction(&p0, &omega, &Point::new(4.5, 2.0), &Point::new(1.0, 0.5));
    let d = sample_grid(&Curve::circle(0.3)?.with_center(Point::new(0.3, -0.2)), 128)?;
    let pair = ContrastPair::new(p0, LameParams::planar(1.0, 2.0)?);
    let sol = solve_with_inclusion(&pair, &omega, std::slice::from_ref(&d), &g)?;
    let op = BackgroundOperator::new(&p0, &omega)?;
    let route = op.solve(&g)?.trace.sub(&op.neumann_potential(&d, &sol.phi[0])?);
    let rel = route.sub(&sol.trace).max_abs() / sol.trace.max_abs();
    Ok(result(
        8,
        rel <= TWO_ROUTE_TOLERANCE,
        format!("relative trace difference {rel:.3e} (tol {TWO_ROUTE_TOLERANCE:e})"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_is_exact_for_cubics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<Point> = x.iter().map(|t| Point::new(2.0 - t + t * t * t, 0.5 * t)).collect();
        let v = extrapolate_to_zero(&x, &y);
        assert!((v - Point::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        assert!(run_all(&[12], |_| {}).is_err());
        assert!(Suite::default().run(0).is_err());
    }
}
