use elastobie_core::emt::{compute_emt, emt_as_tensor, major_asymmetry, tensor_norm};
use elastobie_core::freespace::{solve_limit, solve_transmission, BackgroundField, LimitMode, TransmissionOperator};
use elastobie_core::potentials::{conormal_trace, rigid_pairings, sobolev_norm, Density, Side};
use elastobie_core::{sample_grid, BoundaryGrid, ContrastPair, Curve, LameParams, Matrix2, Point};
use proptest::prelude::*;

fn background() -> LameParams {
    LameParams::planar(0.5, 1.0).unwrap()
}

fn ellipse(a: f64, b: f64, n: usize) -> BoundaryGrid {
    sample_grid(&Curve::ellipse(a, b).unwrap(), n).unwrap()
}

fn linear(g: [f64; 4], c: [f64; 2]) -> BackgroundField {
    BackgroundField::Linear {
        offset: Point::new(c[0], c[1]),
        gradient: Matrix2::new(g[0], g[1], g[2], g[3]),
    }
}

fn inclusion() -> impl Strategy<Value = LameParams> {
    (-0.5f64..5.0, 0.05f64..50.0).prop_filter_map("strongly convex", |(l, m)| LameParams::planar(l, m).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn transmission_conditions_hold(
        p1 in inclusion(),
        a in 0.5f64..1.2,
        b in 0.3f64..0.9,
        g in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let grid = ellipse(a, b, 96);
        let h = linear(g, [0.2, -0.1]);
        let sol = solve_transmission(&ContrastPair::new(background(), p1), &[grid.clone()], &h).unwrap();
        let tr = &sol.boundary[0];
        let scale = 1.0 + sol.phi[0].max_abs() + sol.psi[0].max_abs();
        let jump_u = tr.u_minus.sub(&tr.v_plus).sub(&h.trace(&grid)).max_abs();
        let jump_t = tr.t_minus.sub(&tr.tv_plus).sub(&h.conormal(&background(), &grid)).max_abs();
        prop_assert!(jump_u <= 1e-9 * scale, "{jump_u:e}");
        prop_assert!(jump_t <= 1e-9 * scale, "{jump_t:e}");
        let norm = sobolev_norm(&sol.phi[0], -0.5);
        for v in rigid_pairings(&grid, &sol.phi[0]) {
            prop_assert!(v.abs() <= 1e-9 * norm.max(1e-300));
        }
    }

    #[test]
    fn solutions_are_linear_in_the_data(
        p1 in inclusion(),
        g1 in prop::array::uniform4(-1.0f64..1.0),
        g2 in prop::array::uniform4(-1.0f64..1.0),
        s in -2.0f64..2.0,
    ) {
        let op = TransmissionOperator::new(ContrastPair::new(background(), p1), vec![ellipse(1.0, 0.6, 64)]).unwrap();
        let a = op.solve(&linear(g1, [0.0; 2])).unwrap();
        let b = op.solve(&linear(g2, [0.0; 2])).unwrap();
        let sum = op
            .solve(&BackgroundField::Combination(vec![(1.0, linear(g1, [0.0; 2])), (s, linear(g2, [0.0; 2]))]))
            .unwrap();
        let expect = a.phi[0].add(&b.phi[0].scale(s));
        prop_assert!(sum.phi[0].sub(&expect).max_abs() <= 1e-10 * (1.0 + expect.max_abs()));
    }

    #[test]
    fn rigid_data_is_invisible(p1 in inclusion(), c in prop::array::uniform3(-1.0f64..1.0)) {
        let grid = ellipse(0.8, 0.5, 64);
        let sol = solve_transmission(&ContrastPair::new(background(), p1), &[grid.clone()], &BackgroundField::Rigid(c)).unwrap();
        prop_assert!(sol.phi[0].max_abs() <= 1e-10);
        for mode in [LimitMode::Hard, LimitMode::Soft] {
            let lim = solve_limit(&background(), &[grid.clone()], &BackgroundField::Rigid(c), mode).unwrap();
            prop_assert!(lim.phi[0].max_abs() <= 1e-10);
        }
    }

    #[test]
    fn side_traces_differ_by_the_density(k in 1usize..6, c in prop::array::uniform2(-2.0f64..2.0)) {
        let grid = ellipse(1.0, 0.6, 128);
        let phi = Density::from_fn(&grid, |t, _| Point::new(c[0] * (k as f64 * t).cos(), c[1] * ((k + 1) as f64 * t).sin()));
        let ext = conormal_trace(&background(), &grid, &phi, Side::Exterior).unwrap();
        let int = conormal_trace(&background(), &grid, &phi, Side::Interior).unwrap();
        prop_assert!(ext.sub(&int).sub(&phi).max_abs() <= 1e-12);
    }

    #[test]
    fn emt_has_major_symmetry(p1 in inclusion(), a in 0.5f64..1.2, b in 0.3f64..0.9) {
        let m = emt_as_tensor(&compute_emt(&ContrastPair::new(background(), p1), &ellipse(a, b, 96)).unwrap()).unwrap();
        let norm = tensor_norm(&m);
        prop_assert!(major_asymmetry(&m) <= 1e-8 * norm.max(1e-300));
    }
}

#[test]
fn hard_and_soft_limits_are_approached() {
    let grid = ellipse(0.5, 0.3, 128);
    let h = BackgroundField::shear();
    let hard = solve_limit(&background(), &[grid.clone()], &h, LimitMode::Hard).unwrap();
    let soft = solve_limit(&background(), &[grid.clone()], &h, LimitMode::Soft).unwrap();
    let dist = |p1: LameParams, lim: &Density| {
        let sol = solve_transmission(&ContrastPair::new(background(), p1), &[grid.clone()], &h).unwrap();
        sobolev_norm(&sol.phi[0].sub(lim), -0.5)
    };
    let h1 = dist(LameParams::planar(1.0, 1e2).unwrap(), &hard.phi[0]);
    let h2 = dist(LameParams::planar(1.0, 1e4).unwrap(), &hard.phi[0]);
    assert!(h2 < 0.02 * h1, "{h1:e} {h2:e}");
    let s1 = dist(LameParams::from_bulk_shear(1e-2, 1e-2).unwrap(), &soft.phi[0]);
    let s2 = dist(LameParams::from_bulk_shear(1e-4, 1e-4).unwrap(), &soft.phi[0]);
    assert!(s2 < 0.02 * s1, "{s1:e} {s2:e}");
}

#[test]
fn two_inclusions_decouple_when_far_apart() {
    let pair = ContrastPair::new(background(), LameParams::planar(1.0, 3.0).unwrap());
    let disk = |c: Point| sample_grid(&Curve::circle(0.2).unwrap().with_center(c), 64).unwrap();
    let h = BackgroundField::shear();
    let single = solve_transmission(&pair, &[disk(Point::zeros())], &h).unwrap();
    let pair_sol = solve_transmission(&pair, &[disk(Point::zeros()), disk(Point::new(40.0, 0.0))], &h).unwrap();
    // The far inclusion sees a uniform strain plus an O(r^-2) correction.
    let d = pair_sol.phi[0].sub(&single.phi[0]).max_abs();
    assert!(d < 1e-3 * single.phi[0].max_abs(), "{d:e}");
}
