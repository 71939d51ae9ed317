//! The sweep experiments. Each produces a [`Table`]; the verdicts in
//! [`verdicts`] are recomputed from the table alone.

use std::time::Instant;

use anyhow::Context;
use elastobie_core::asymptotics::{evaluate_expansion, expansion_error, ExpansionData, ExpansionInput};
use elastobie_core::bvp::{make_h, point_source_traction, solve_limit_bvp, solve_with_inclusion, BackgroundOperator};
use elastobie_core::emt::{compute_emt, emt_as_tensor, major_asymmetry, tensor_norm, EmtTable};
use elastobie_core::freespace::{energy_default, solve_limit, BackgroundField, LimitMode, LimitSolution, TransmissionOperator};
use elastobie_core::geometry::{place, InclusionPlacement};
use elastobie_core::potentials::{rigid_pairings, sobolev_norm, Density};
use elastobie_core::{sample_grid, BoundaryGrid, ContrastPair, LameParams, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DataKind, ExperimentConfig, ExperimentKind};
use crate::fit::fit_rate;
use crate::records::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    /// Structured text for experiments that have one (the EMT table).
    pub text: Option<String>,
    pub verdicts: Vec<Verdict>,
    pub seconds: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} rows, {} failed, {:.1} s\n",
            self.table.schema,
            self.table.rows.len(),
            self.table.failures(),
            self.seconds
        );
        for v in &self.verdicts {
            s += &format!("  {} {}: {}\n", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        s
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let (table, text) = match cfg.experiment {
        ExperimentKind::MuSweep => (mu_sweep(cfg)?, None),
        ExperimentKind::SoftSweep => (soft_sweep(cfg)?, None),
        ExperimentKind::EpsilonSweep => (epsilon_sweep(cfg)?, None),
        ExperimentKind::UniformitySweep => (uniformity_sweep(cfg)?, None),
        ExperimentKind::BvpCheck => (bvp_check(cfg)?, None),
        ExperimentKind::Emt => {
            let (table, emt) = emt_experiment(cfg)?;
            (table, Some(emt.to_text()))
        }
    };
    let verdicts = verdicts(cfg.experiment, &table)?;
    Ok(Outcome {
        table,
        text,
        verdicts,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn schema(kind: ExperimentKind) -> String {
    format!("{}.v1", kind.name())
}

fn grids(cfg: &ExperimentConfig, n: usize) -> anyhow::Result<Vec<BoundaryGrid>> {
    cfg.inclusion_curves()?
        .iter()
        .enumerate()
        .map(|(k, c)| sample_grid(c, n).with_context(|| format!("geometry.inclusions[{k}]")))
        .collect()
}

fn free_data(cfg: &ExperimentConfig, p0: &LameParams) -> BackgroundField {
    match cfg.data_kind() {
        DataKind::Shear => BackgroundField::shear(),
        DataKind::PointSource => {
            let (source, force) = cfg.source();
            BackgroundField::PointSource {
                params: *p0,
                source,
                force,
            }
        }
    }
}

fn bvp_data(cfg: &ExperimentConfig, p0: &LameParams, omega: &BoundaryGrid) -> Density {
    match cfg.data_kind() {
        DataKind::Shear => BackgroundField::shear().conormal(p0, omega),
        DataKind::PointSource => {
            let (source, force) = cfg.source();
            point_source_traction(p0, omega, &source, &force)
        }
    }
}

/// Truncation radius for `J`: comfortably past twice the inclusion extent.
pub fn energy_radius(grids: &[BoundaryGrid]) -> f64 {
    let extent = grids
        .iter()
        .flat_map(|g| g.points().iter().map(|x| x.norm()))
        .fold(0.0, f64::max);
    2.5 * extent
}

/// `sum_j |phi_j - phi_lim_j|_{-1/2}`.
pub fn density_distance(phi: &[Density], limit: &[Density]) -> f64 {
    phi.iter().zip(limit).map(|(a, b)| sobolev_norm(&a.sub(b), -0.5)).sum()
}

/// Rows `[key, r, r_scaled, energy]` for a family of inclusion parameters
/// compared against one limit solution.
fn limit_sweep(
    cfg: &ExperimentConfig,
    table: &mut Table,
    keys: &[f64],
    params: impl Fn(f64) -> elastobie_core::Result<LameParams> + Sync,
    scale: impl Fn(&LameParams) -> f64 + Sync,
    mode: LimitMode,
) -> anyhow::Result<()> {
    let p0 = cfg.background()?;
    let grids = grids(cfg, cfg.n())?;
    let h = free_data(cfg, &p0);
    let limit: LimitSolution = solve_limit(&p0, &grids, &h, mode)?;
    let radius = energy_radius(&grids);
    let rows: Vec<_> = keys
        .par_iter()
        .map(|&key| -> elastobie_core::Result<Vec<f64>> {
            let p1 = params(key)?;
            let op = TransmissionOperator::new(ContrastPair::new(p0, p1), grids.clone())?;
            let sol = op.solve(&h)?;
            let r = density_distance(&sol.phi, &limit.phi);
            let energy = energy_default(&sol, radius)?.total();
            Ok(vec![key, r, r * scale(&p1), energy])
        })
        .collect();
    for (key, row) in keys.iter().zip(rows) {
        match row {
            Ok(v) => table.push(v),
            Err(e) => table.push_failed(&[*key], e.to_string()),
        }
    }
    Ok(())
}

pub fn mu_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let mut table = Table::new(&schema(ExperimentKind::MuSweep), &["mu", "r", "r_sqrt_mu", "energy"]);
    let lambda = cfg.sweep_lambda();
    limit_sweep(
        cfg,
        &mut table,
        &cfg.mu_values(),
        |mu| LameParams::planar(lambda, mu),
        |p| p.mu().sqrt(),
        LimitMode::Hard,
    )?;
    Ok(table)
}

pub fn soft_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let mut table = Table::new(&schema(ExperimentKind::SoftSweep), &["s", "r", "r_scaled", "energy"]);
    limit_sweep(
        cfg,
        &mut table,
        &cfg.soft_values(),
        |s| LameParams::from_bulk_shear(s, s),
        |p| (p.kappa() + p.mu()).powf(-0.25),
        LimitMode::Soft,
    )?;
    Ok(table)
}

/// Inclusion-independent pieces shared by the expansion experiments.
struct ExpansionSetup {
    p0: LameParams,
    omega: BoundaryGrid,
    g: Density,
    data: ExpansionData,
}

impl ExpansionSetup {
    fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let p0 = cfg.background()?;
        let omega = sample_grid(&cfg.omega()?, cfg.n()).context("geometry.omega")?;
        let g = bvp_data(cfg, &p0, &omega);
        let op = BackgroundOperator::new(&p0, &omega)?;
        let u = op.solve(&g)?;
        let data = ExpansionData::new(&op, &u, &cfg.z0())?;
        Ok(Self { p0, omega, g, data })
    }

    /// `(|E|_inf, |E_leading|_inf)` at one `epsilon`.
    fn errors(&self, cfg: &ExperimentConfig, pair: &ContrastPair, emt: &EmtTable, eps: f64) -> elastobie_core::Result<(f64, f64)> {
        let curve = place(&InclusionPlacement {
            reference: cfg.reference().expect("validated"),
            z0: self.data.z0,
            epsilon: eps,
        })?;
        let d = sample_grid(&curve, cfg.inclusion_n())?;
        let u = solve_with_inclusion(pair, &self.omega, &[d], &self.g)?.trace;
        let full = evaluate_expansion(&ExpansionInput::full(&self.data, emt, eps))?;
        let lead = evaluate_expansion(&ExpansionInput {
            data: &self.data,
            emt,
            epsilon: eps,
            blocks: &[(1, 1)],
        })?;
        Ok((expansion_error(&u, &full), expansion_error(&u, &lead)))
    }
}

pub fn epsilon_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let mut table = Table::new(
        &schema(ExperimentKind::EpsilonSweep),
        &["epsilon", "error", "error_over_eps4", "error_leading"],
    );
    let setup = ExpansionSetup::new(cfg)?;
    let pair = ContrastPair::new(setup.p0, cfg.inclusion()?);
    let b = sample_grid(&cfg.reference()?, cfg.inclusion_n())?;
    let emt = compute_emt(&pair, &b)?;
    let eps = cfg.epsilons();
    let rows: Vec<_> = eps.par_iter().map(|&e| setup.errors(cfg, &pair, &emt, e)).collect();
    for (&e, row) in eps.iter().zip(rows) {
        match row {
            Ok((err, lead)) => table.push(vec![e, err, err / e.powi(4), lead]),
            Err(err) => table.push_failed(&[e], err.to_string()),
        }
    }
    Ok(table)
}

/// The inclusion parameters of a uniformity sweep: `(lambda, mu)` for each
/// `mu`, then `kappa = mu = s` for each soft value.
pub fn uniformity_params(cfg: &ExperimentConfig) -> elastobie_core::Result<Vec<LameParams>> {
    let lambda = cfg.sweep_lambda();
    let mut out = Vec::new();
    for mu in cfg.mu_values() {
        out.push(LameParams::planar(lambda, mu)?);
    }
    for s in cfg.soft_values() {
        out.push(LameParams::from_bulk_shear(s, s)?);
    }
    Ok(out)
}

pub fn uniformity_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let mut table = Table::new(
        &schema(ExperimentKind::UniformitySweep),
        &["lambda", "mu", "epsilon", "error", "c"],
    );
    let setup = ExpansionSetup::new(cfg)?;
    let b = sample_grid(&cfg.reference()?, cfg.inclusion_n())?;
    let eps = cfg.epsilons();
    let params = uniformity_params(cfg)?;
    for p1 in &params {
        let pair = ContrastPair::new(setup.p0, *p1);
        if !pair.admissible() {
            log::warn!(
                "inclusion (lambda, mu) = ({}, {}) is not admissible against the background",
                p1.lambda(),
                p1.mu()
            );
        }
    }
    let rows: Vec<_> = params
        .par_iter()
        .map(|p1| {
            let pair = ContrastPair::new(setup.p0, *p1);
            let emt = compute_emt(&pair, &b)?;
            eps.iter()
                .map(|&e| setup.errors(cfg, &pair, &emt, e).map(|(err, _)| err))
                .collect::<elastobie_core::Result<Vec<f64>>>()
        })
        .collect();
    for (p1, row) in params.iter().zip(rows) {
        match row {
            Ok(errs) => {
                for (&e, err) in eps.iter().zip(errs) {
                    table.push(vec![p1.lambda(), p1.mu(), e, err, err / e.powi(4)]);
                }
            }
            Err(err) => {
                for &e in &eps {
                    table.push_failed(&[p1.lambda(), p1.mu(), e], err.to_string());
                }
            }
        }
    }
    Ok(table)
}

/// The EMT of `geometry.reference` for `background -> parameters.inclusion`.
pub fn emt_experiment(cfg: &ExperimentConfig) -> anyhow::Result<(Table, EmtTable)> {
    let pair = ContrastPair::new(cfg.background()?, cfg.inclusion()?);
    let b = sample_grid(&cfg.reference()?, cfg.n())?;
    let emt = compute_emt(&pair, &b)?;
    let m = emt_as_tensor(&emt)?;
    let norm = tensor_norm(&m);
    let orth = emt
        .entries()
        .filter_map(|((alpha, _, j), _)| emt.density(*alpha, *j))
        .map(|phi| {
            let s = sobolev_norm(phi, -0.5).max(f64::MIN_POSITIVE);
            rigid_pairings(&b, phi).iter().map(|v| v.abs() / s).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut table = Table::new(&schema(ExperimentKind::Emt), &["nodes", "tensor_norm", "major_asymmetry", "psi_orthogonality"]);
    table.push(vec![b.len() as f64, norm, major_asymmetry(&m), orth]);
    Ok((table, emt))
}

/// Seeded test points inside `omega`, away from every inclusion.
pub fn interior_points(omega: &BoundaryGrid, grids: &[BoundaryGrid], count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = omega.curve().max_radius();
    let c = omega.curve().center();
    let margin = 0.1 * r;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = c + Point::new(rng.random_range(-r..r), rng.random_range(-r..r));
        if omega.contains(&x)
            && omega.distance(&x) > margin
            && grids.iter().all(|g| !g.contains(&x) && g.distance(&x) > margin)
        {
            out.push(x);
        }
    }
    out
}

pub fn bvp_check(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let mut table = Table::new(
        &schema(ExperimentKind::BvpCheck),
        &["mu", "energy", "trace_diff", "trace_diff_sqrt_mu", "two_route", "h_sup"],
    );
    let p0 = cfg.background()?;
    let omega = sample_grid(&cfg.omega()?, cfg.n()).context("geometry.omega")?;
    let grids = grids(cfg, cfg.inclusion_n())?;
    let g = bvp_data(cfg, &p0, &omega);
    let op = BackgroundOperator::new(&p0, &omega)?;
    let u = op.solve(&g)?;
    let limit = solve_limit_bvp(&p0, &omega, &grids, &g, LimitMode::Hard)?;
    let points = interior_points(&omega, &grids, 20, cfg.seed);
    let lambda = cfg.sweep_lambda();
    let mus = cfg.mu_values();
    let rows: Vec<_> = mus
        .par_iter()
        .map(|&mu| -> elastobie_core::Result<Vec<f64>> {
            let pair = ContrastPair::new(p0, LameParams::planar(lambda, mu)?);
            let sol = solve_with_inclusion(&pair, &omega, &grids, &g)?;
            let mut route = u.trace.clone();
            for (d, phi) in grids.iter().zip(&sol.phi) {
                route = route.sub(&op.neumann_potential(d, phi)?);
            }
            let two_route = route.sub(&sol.trace).max_abs() / sol.trace.max_abs();
            let diff = sol.trace.sub(&limit.trace).max_abs();
            let h = make_h(&sol);
            let h_sup = points.iter().map(|x| h.value(x).norm()).fold(0.0, f64::max);
            Ok(vec![mu, sol.energy(), diff, diff * mu.sqrt(), two_route, h_sup])
        })
        .collect();
    for (&mu, row) in mus.iter().zip(rows) {
        match row {
            Ok(v) => table.push(v),
            Err(e) => table.push_failed(&[mu], e.to_string()),
        }
    }
    Ok(table)
}

pub const RATE_BOUND_FACTOR: f64 = 1.5;
pub const ENERGY_RATIO_BOUND: f64 = 10.0;
pub const MIN_EXPANSION_SLOPE: f64 = 3.5;
pub const UNIFORMITY_RATIO_BOUND: f64 = 20.0;
pub const TWO_ROUTE_TOLERANCE: f64 = 1e-6;
pub const H_SUP_RATIO_BOUND: f64 = 3.0;
pub const EMT_SYMMETRY_TOLERANCE: f64 = 1e-8;

fn ratio(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn complete(table: &Table) -> Verdict {
    let failed = table.failures();
    Verdict::new(
        "all rows solved",
        failed == 0 && !table.rows.is_empty(),
        format!("{failed} of {} rows failed", table.rows.len()),
    )
}

/// `v[k] <= factor * v[0]` for every `k`.
fn bounded_by_first(name: &str, v: &[f64], factor: f64) -> Verdict {
    let worst = v.iter().map(|x| x / v[0]).fold(0.0, f64::max);
    Verdict::new(name, v.len() > 1 && worst <= factor, format!("max ratio to first row {worst:.4} (bound {factor})"))
}

fn ratio_bound(name: &str, v: &[f64], bound: f64) -> Verdict {
    let r = ratio(v);
    Verdict::new(name, !v.is_empty() && r <= bound, format!("max/min = {r:.4} (bound {bound})"))
}

/// Verdicts recomputed from the rows of `table`.
pub fn verdicts(kind: ExperimentKind, table: &Table) -> anyhow::Result<Vec<Verdict>> {
    let mut out = vec![complete(table)];
    match kind {
        ExperimentKind::MuSweep => {
            let r = table.column("r")?;
            let decreasing = r.windows(2).all(|w| w[1] < w[0]);
            out.push(Verdict::new(
                "r strictly decreasing",
                decreasing && r.len() > 1,
                format!("r = {}", list(&r)),
            ));
            out.push(bounded_by_first("r sqrt(mu) bounded", &table.column("r_sqrt_mu")?, RATE_BOUND_FACTOR));
            out.push(ratio_bound("energy bounded", &table.column("energy")?, ENERGY_RATIO_BOUND));
        }
        ExperimentKind::SoftSweep => {
            out.push(bounded_by_first(
                "r (kappa + mu)^(-1/4) bounded",
                &table.column("r_scaled")?,
                RATE_BOUND_FACTOR,
            ));
        }
        ExperimentKind::EpsilonSweep => {
            let fit = fit_rate(table, "epsilon", "error");
            let (pass, detail) = match fit {
                Ok(f) => (f.slope >= MIN_EXPANSION_SLOPE, format!("slope {:.4} (min {MIN_EXPANSION_SLOPE})", f.slope)),
                Err(e) => (false, format!("{e:#}")),
            };
            out.push(Verdict::new("expansion order", pass, detail));
        }
        ExperimentKind::UniformitySweep => {
            out.push(ratio_bound("error constant uniform", &table.column("c")?, UNIFORMITY_RATIO_BOUND));
        }
        ExperimentKind::Emt => {
            let norm = table.column("tensor_norm")?;
            let asym = table.column("major_asymmetry")?;
            let rel = asym.first().zip(norm.first()).map(|(a, n)| a / n.max(f64::MIN_POSITIVE));
            out.push(Verdict::new(
                "major symmetry",
                rel.is_some_and(|r| r <= EMT_SYMMETRY_TOLERANCE),
                format!("relative asymmetry {:.3e}", rel.unwrap_or(f64::NAN)),
            ));
        }
        ExperimentKind::BvpCheck => {
            out.push(ratio_bound("energy bounded", &table.column("energy")?, ENERGY_RATIO_BOUND));
            out.push(bounded_by_first(
                "trace difference sqrt(mu) bounded",
                &table.column("trace_diff_sqrt_mu")?,
                RATE_BOUND_FACTOR,
            ));
            let worst = table.column("two_route")?.into_iter().fold(0.0, f64::max);
            out.push(Verdict::new(
                "two-route trace agreement",
                worst <= TWO_ROUTE_TOLERANCE,
                format!("max relative difference {worst:.3e} (tol {TWO_ROUTE_TOLERANCE:e})"),
            ));
            out.push(ratio_bound("h bounded", &table.column("h_sup")?, H_SUP_RATIO_BOUND));
        }
    }
    Ok(out)
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

/// One transmission solve with `parameters.inclusion`: the boundary densities
/// on every node of every inclusion.
pub fn solve_single(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let p0 = cfg.background()?;
    let pair = ContrastPair::new(p0, cfg.inclusion()?);
    if !pair.admissible() {
        log::warn!("contrast pair is not admissible");
    }
    let grids = grids(cfg, cfg.n())?;
    let sol = TransmissionOperator::new(pair, grids.clone())?.solve(&free_data(cfg, &p0))?;
    let mut table = Table::new(
        "solve.v1",
        &["component", "t", "x1", "x2", "phi1", "phi2", "psi1", "psi2"],
    );
    let mut orth: f64 = 0.0;
    for (k, g) in grids.iter().enumerate() {
        let (phi, psi) = (&sol.phi[k], &sol.psi[k]);
        let s = sobolev_norm(phi, -0.5).max(f64::MIN_POSITIVE);
        orth = rigid_pairings(g, phi).iter().fold(orth, |m, v| m.max(v.abs() / s));
        for m in 0..g.len() {
            let (x, f, p) = (g.points()[m], phi.values()[m], psi.values()[m]);
            table.push(vec![k as f64, g.params()[m], x.x, x.y, f.x, f.y, p.x, p.y]);
        }
    }
    let energy = energy_default(&sol, energy_radius(&grids))?.total();
    let verdicts = vec![
        Verdict::new(
            "psi orthogonality",
            orth <= 1e-9,
            format!("max |<phi, psi_l>| / |phi| = {orth:.3e}"),
        ),
        Verdict::new("energy finite", energy.is_finite(), format!("J = {energy:.10e}")),
    ];
    Ok(Outcome {
        table,
        text: None,
        verdicts,
        seconds: start.elapsed().as_secs_f64(),
    })
}
