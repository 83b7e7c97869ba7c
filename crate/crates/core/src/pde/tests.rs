use super::*;
use crate::measure::{Sign, SpaceTimeMeasure, SpatialMeasure};
use crate::quad::adaptive;
use proptest::prelude::*;

fn zero_mu(dim: usize) -> SignedMeasure {
    SignedMeasure::zero(dim)
}

fn heat_run(cells: usize, steps: usize) -> (GridSolution, f64) {
    let (t0, t1) = (0.05, 0.25);
    let geom = Geometry::Line { a: -3.0, b: 3.0 };
    let cfg = SolverConfig::new(2.0, geom, cells, t0, (t1 - t0) / steps as f64, steps);
    let sol = solve(&cfg, &|x| heat_kernel(1, x, t0), &|x, t| heat_kernel(1, x, t), &zero_mu(1)).unwrap();
    let err = (0..sol.nodes)
        .map(|i| (sol.level(steps)[i] - heat_kernel(1, sol.coord(i), t1)).abs())
        .fold(0.0, f64::max);
    (sol, err)
}

#[test]
fn zero_data_stays_zero() {
    let cfg = SolverConfig::new(3.0, Geometry::Line { a: 0.0, b: 1.0 }, 16, 0.0, 0.01, 10);
    let sol = solve(&cfg, &|_| 0.0, &|_, _| 0.0, &zero_mu(1)).unwrap();
    assert!(sol.u.iter().all(|&v| v == 0.0));
}

#[test]
fn heat_kernel_values() {
    assert!((heat_kernel(1, 0.0, 1.0 / (4.0 * std::f64::consts::PI)) - 1.0).abs() < 1e-15);
    assert_eq!(heat_kernel(2, 0.3, 0.7), heat_kernel(2, -0.3, 0.7));
    for t in [0.01, 0.5, 3.0] {
        let m = adaptive(&|x| heat_kernel(1, x, t), -40.0, 40.0, 1e-12, 1e-12, 40);
        assert!((m - 1.0).abs() < 1e-6, "{m}");
        let geom = Geometry::Radial { dim: 3, r_max: 1.0 };
        let m3 = adaptive(&|r| heat_kernel(3, r, t) * geom.face_area(r), 0.0, 40.0, 1e-12, 1e-12, 40);
        assert!((m3 - 1.0).abs() < 1e-6, "{m3}");
    }
}

#[test]
fn heat_kernel_convergence() {
    let errs: Vec<f64> = [(60, 20), (120, 80), (240, 320)].iter().map(|&(c, s)| heat_run(c, s).1).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 2e-3, "{errs:?}");
}

fn barenblatt_mass(p: f64, dim: usize, c: f64, t: f64) -> f64 {
    let geom = Geometry::Radial { dim, r_max: 1.0 };
    let (lambda, k) = barenblatt_constants(p, dim);
    let edge = (c / k).powf((p - 1.0) / p) * t.powf(1.0 / lambda);
    let f = |r: f64| barenblatt(p, dim, c, r, t) * geom.face_area(r);
    let m = adaptive(&f, 0.0, edge, 1e-13, 1e-12, 40);
    if dim == 1 {
        2.0 * m / geom.face_area(1.0)
    } else {
        m
    }
}

#[test]
fn barenblatt_mass_is_conserved() {
    for (p, dim) in [(3.0, 1), (3.0, 2), (4.0, 3), (2.5, 1)] {
        let m1 = barenblatt_mass(p, dim, 0.7, 0.3);
        let m2 = barenblatt_mass(p, dim, 0.7, 2.9);
        assert!((m1 - m2).abs() <= 1e-4 * m1, "p={p} N={dim}: {m1} vs {m2}");
        assert_eq!(barenblatt(p, dim, 0.7, 1e3, 1.0), 0.0);
    }
}

/// Strong residual `u_t - r^{1-N} (r^{N-1} |u_r|^{p-2} u_r)_r` by central
/// differences inside the support.
fn barenblatt_strong_residual(p: f64, dim: usize, h: f64) -> f64 {
    let (c, t) = (1.0, 1.0);
    let u = |r: f64, t: f64| barenblatt(p, dim, c, r, t);
    let (_, k) = barenblatt_constants(p, dim);
    let edge = (c / k).powf((p - 1.0) / p);
    let flux = |r: f64| {
        let g = (u(r + 0.5 * h, t) - u(r - 0.5 * h, t)) / h;
        r.powi(dim as i32 - 1) * g.abs().powf(p - 2.0) * g
    };
    let mut worst = 0.0f64;
    for i in 1..20 {
        let r = 0.2 * edge + 0.5 * edge * i as f64 / 20.0;
        let ut = (u(r, t + h) - u(r, t - h)) / (2.0 * h);
        let lap = (flux(r + 0.5 * h) - flux(r - 0.5 * h)) / h / r.powi(dim as i32 - 1);
        worst = worst.max((ut - lap).abs());
    }
    worst
}

#[test]
fn barenblatt_constants_solve_the_equation() {
    for (p, dim) in [(3.0, 1), (3.0, 2), (4.0, 3), (2.5, 2)] {
        let coarse = barenblatt_strong_residual(p, dim, 1e-2);
        let fine = barenblatt_strong_residual(p, dim, 1e-3);
        assert!(fine < 1e-4 && fine < coarse, "p={p} N={dim}: {coarse} -> {fine}");
    }
    // a wrong constant is detected
    let (lambda, k) = barenblatt_constants(3.0, 1);
    let bad = |r: f64, t: f64| {
        t.powf(-1.0 / lambda) * (1.0 - 1.1 * k * (r * t.powf(-1.0 / lambda)).powf(1.5)).max(0.0).powi(2)
    };
    let (r, t, h) = (0.3, 1.0, 1e-3);
    let ut = (bad(r, t + h) - bad(r, t - h)) / (2.0 * h);
    let fl = |r: f64| {
        let g = (bad(r + 0.5 * h, t) - bad(r - 0.5 * h, t)) / h;
        g.abs() * g
    };
    assert!((ut - (fl(r + 0.5 * h) - fl(r - 0.5 * h)) / h).abs() > 1e-2);
}

fn barenblatt_run(p: f64, cells: usize, steps: usize) -> (GridSolution, f64) {
    let (t0, t1) = (0.1, 0.6);
    let exact = ExactSolution::Barenblatt { p, dim: 1, c: 0.2 };
    let mut cfg = SolverConfig::new(p, Geometry::Line { a: -2.0, b: 2.0 }, cells, t0, (t1 - t0) / steps as f64, steps);
    cfg.boundary = BoundaryKind::ZeroFlux;
    let sol = solve(&cfg, &|x| exact.eval(x.abs(), t0), &|_, _| 0.0, &zero_mu(1)).unwrap();
    let err = (0..sol.nodes)
        .map(|i| (sol.level(steps)[i] - exact.eval(sol.coord(i).abs(), t1)).abs())
        .fold(0.0, f64::max);
    (sol, err)
}

#[test]
fn barenblatt_convergence_and_mass() {
    let runs: Vec<(GridSolution, f64)> = [(64, 50), (128, 100), (256, 200)].iter().map(|&(c, s)| barenblatt_run(3.0, c, s)).collect();
    let errs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    for (sol, _) in &runs {
        let (m0, m1) = (sol.mass(0), sol.mass(sol.levels - 1));
        assert!((m1 - m0).abs() <= 1e-3 * m0, "{m0} {m1}");
        assert!(sol.u.iter().all(|&v| v >= -1e-12));
        assert_eq!(sol.stats.unconverged_steps, 0);
    }
}

#[test]
fn radial_barenblatt_tracks_exact() {
    let (p, dim, t0, t1) = (3.0, 2, 0.1, 0.4);
    let exact = ExactSolution::Barenblatt { p, dim, c: 0.3 };
    let mut cfg = SolverConfig::new(p, Geometry::Radial { dim, r_max: 2.5 }, 200, t0, 0.0025, 120);
    cfg.boundary = BoundaryKind::ZeroFlux;
    let sol = solve(&cfg, &|r| exact.eval(r, t0), &|_, _| 0.0, &zero_mu(dim)).unwrap();
    let peak = exact.eval(0.0, t1);
    let err = (0..sol.nodes).map(|i| (sol.level(120)[i] - exact.eval(sol.coord(i), t1)).abs()).fold(0.0, f64::max);
    assert!(err < 0.05 * peak, "{err} vs {peak}");
    assert!((sol.mass(0) - sol.mass(120)).abs() < 1e-9 * sol.mass(0));
}

#[test]
fn sources_add_mass() {
    // constant unit source on the whole line with zero flux: mass grows by |Ω| t
    let mut cfg = SolverConfig::new(3.0, Geometry::Line { a: 0.0, b: 2.0 }, 40, 0.0, 0.01, 50);
    cfg.boundary = BoundaryKind::ZeroFlux;
    let mu = SignedMeasure::positive(SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1)));
    let sol = solve(&cfg, &|_| 0.0, &|_, _| 0.0, &mu).unwrap();
    assert!((sol.mass(50) - 2.0 * 0.5).abs() < 1e-9, "{}", sol.mass(50));
    // an impulse of weight 3 at t = 0.105
    let atoms = SpaceTimeMeasure::atoms(1, vec![crate::measure::SpaceTimeAtom { position: vec![1.03], time: 0.105, weight: 3.0 }]).unwrap();
    let sol = solve(&cfg, &|_| 0.0, &|_, _| 0.0, &SignedMeasure::positive(atoms)).unwrap();
    assert_eq!(sol.mass(10), 0.0);
    assert!((sol.mass(11) - 3.0).abs() < 1e-9 && (sol.mass(50) - 3.0).abs() < 1e-9);
}

#[test]
fn non_finite_data_aborts() {
    let cfg = SolverConfig::new(3.0, Geometry::Line { a: 0.0, b: 1.0 }, 8, 0.0, 0.1, 3);
    let err = solve(&cfg, &|x| if x > 0.5 { f64::NAN } else { 0.0 }, &|_, _| 0.0, &zero_mu(1)).unwrap_err();
    assert!(matches!(err, PdeError::NonFinite { step: 0, .. }));
    let err = solve(&cfg, &|_| 0.0, &|_, t| if t > 0.15 { f64::INFINITY } else { 0.0 }, &zero_mu(1)).unwrap_err();
    assert!(matches!(err, PdeError::NonFinite { step: 2, .. }));
    let mut bad = cfg.clone();
    bad.p = 1.5;
    assert!(matches!(solve(&bad, &|_| 0.0, &|_, _| 0.0, &zero_mu(1)), Err(PdeError::InvalidConfig(_))));
}

#[test]
fn weak_residual_of_constant() {
    let sol = GridSolution::from_fn(Geometry::Line { a: 0.0, b: 1.0 }, 3.0, 50, 0.0, 0.01, 100, |_, _| 2.5).unwrap();
    let bump = Bump { center: 0.5, t_center: 0.5, radius: 0.3, t_radius: 0.3 };
    let r = weak_residual(&sol, &zero_mu(1), &bump).unwrap();
    assert!(r.residual.abs() < 1e-12, "{r:?}");
    let outside = Bump { center: 0.9, ..bump };
    assert!(matches!(weak_residual(&sol, &zero_mu(1), &outside), Err(PdeError::OutsideGrid(_))));
}

#[test]
fn weak_residual_of_heat_kernel_refines() {
    let bump = Bump { center: 0.4, t_center: 0.15, radius: 0.8, t_radius: 0.08 };
    let mut last = f64::INFINITY;
    for (c, s) in [(60, 20), (120, 80), (240, 320)] {
        let (sol, _) = heat_run(c, s);
        let r = weak_residual(&sol, &zero_mu(1), &bump).unwrap();
        assert!(r.residual.abs() <= 10.0 * r.truncation_estimate, "{r:?}");
        assert!(r.residual.abs() < last, "{r:?}");
        last = r.residual.abs();
    }
}

#[test]
fn bump_profile_bounds() {
    let mut max_d = 0.0f64;
    for i in 0..=10_000 {
        let r = i as f64 / 10_000.0 * 1.2;
        max_d = max_d.max(bump_profile_derivative(r).0.abs());
        let (d, _) = bump_profile_derivative(r);
        let fd = (bump_profile(r + 1e-6) - bump_profile(r - 1e-6)) / 2e-6;
        assert!((d - fd).abs() < 1e-5, "{r}: {d} {fd}");
    }
    assert!((max_d - 3.75).abs() < 1e-6 && max_d < 4.0);
    assert_eq!(bump_profile(0.5), 1.0);
    assert_eq!(bump_profile(1.0), 0.0);
}

#[test]
fn lebesgue_values() {
    let geom = Geometry::Line { a: -1.0, b: 1.0 };
    let c = GridSolution::from_fn(geom, 2.0, 40, 0.0, 0.05, 20, |_, _| 1.75).unwrap();
    let rhos = [0.4, 0.2, 0.1, 0.05];
    let lp = lebesgue_point_value(&c, &[0.1], 0.5, &rhos, &|v| v).unwrap();
    assert!((lp.value - 1.75).abs() < 1e-12 && lp.is_lebesgue);

    let smooth = GridSolution::from_fn(geom, 2.0, 400, 0.0, 0.005, 200, |x, t| (x + t).sin()).unwrap();
    let lp = lebesgue_point_value(&smooth, &[0.1], 0.5, &rhos, &|v| v).unwrap();
    assert!((lp.value - 0.6f64.sin()).abs() < 1e-3, "{lp:?}");

    // half-space indicator, interface half-way between nodes
    let step = GridSolution::from_fn(geom, 2.0, 40, 0.0, 0.05, 20, |x, _| if x > 0.025 { 1.0 } else { 0.0 }).unwrap();
    let lp = lebesgue_point_value(&step, &[0.025], 0.5, &rhos, &|v| v).unwrap();
    assert!((lp.value - 0.5).abs() < 1e-12 && !lp.is_lebesgue, "{lp:?}");
    let off = lebesgue_point_value(&step, &[0.6], 0.5, &[0.2, 0.1, 0.05], &|v| v.max(0.0)).unwrap();
    assert!((off.value - 1.0).abs() < 1e-14 && off.is_lebesgue);
    assert!(matches!(lebesgue_point_value(&step, &[0.9], 0.5, &rhos, &|v| v), Err(PdeError::OutsideGrid(_))));
}

#[test]
fn cylinder_average_power_examples() {
    let geom = Geometry::Line { a: -2.0, b: 2.0 };
    let c = 1.3;
    let u = GridSolution::from_fn(geom, 3.0, 40, 0.0, 0.1, 40, |_, _| c).unwrap();
    let v = cylinder_average_power(&u, &[0.0], 2.0, 1.0, 1.0, 0.5, 3.0, Sign::Plus).unwrap();
    assert!((v - (4.0 * c * c * c).sqrt()).abs() < 1e-12, "{v}");
    assert_eq!(cylinder_average_power(&u, &[0.0], 2.0, 1.0, 1.0, 0.5, 3.0, Sign::Minus).unwrap(), 0.0);
    let z = GridSolution::from_fn(geom, 3.0, 40, 0.0, 0.1, 40, |_, _| 0.0).unwrap();
    assert_eq!(cylinder_average_power(&z, &[0.0], 2.0, 1.0, 1.0, 0.5, 3.0, Sign::Plus).unwrap(), 0.0);
    assert!(cylinder_average_power(&u, &[0.0], 2.0, 1.0, 0.5, 0.5, 2.0, Sign::Plus).is_err());
}

#[test]
fn radial_quadrature_volumes() {
    for dim in [2usize, 3, 4] {
        let geom = Geometry::Radial { dim, r_max: 3.0 };
        let exact = crate::geometry::unit_ball_volume(dim) * 0.7f64.powi(dim as i32);
        for y in [vec![0.0; dim], { let mut v = vec![0.0; dim]; v[0] = 1.1; v }] {
            let q = CylinderQuadrature::new(&geom, &y, 0.7, 64).unwrap();
            assert!((q.volume() - exact).abs() < 1e-10 * exact, "N={dim}");
            // ∫ |x|² over B_ρ(y) = |B|(|y|² + N ρ²/(N+2))
            let m2: f64 = q.nodes.iter().map(|n| n.weight * n.coord * n.coord).sum();
            let want = exact * (y[0] * y[0] + dim as f64 * 0.49 / (dim as f64 + 2.0));
            assert!((m2 - want).abs() < 1e-3 * want, "N={dim}: {m2} vs {want}");
        }
    }
}

#[test]
fn snapshot_csv_format() {
    let u = GridSolution::from_fn(Geometry::Line { a: 0.0, b: 1.0 }, 2.0, 2, 0.0, 0.5, 1, |x, t| x + t).unwrap();
    let mut buf = Vec::new();
    u.write_snapshots(&mut buf, &[1]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t,x1,u\n5e-1,0e0,5e-1\n5e-1,5e-1,1e0\n5e-1,1e0,1.5e0\n");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn positivity_and_mass(
        data in proptest::collection::vec(0.0..2.0f64, 17),
        p in 2.0..4.0f64,
    ) {
        let mut cfg = SolverConfig::new(p, Geometry::Line { a: 0.0, b: 1.0 }, 16, 0.0, 0.002, 25);
        cfg.boundary = BoundaryKind::ZeroFlux;
        let init = |x: f64| data[((x * 16.0).round() as usize).min(16)];
        let sol = solve(&cfg, &init, &|_, _| 0.0, &zero_mu(1)).unwrap();
        prop_assert!(sol.u.iter().all(|&v| v >= -1e-12));
        let (m0, m1) = (sol.mass(0), sol.mass(25));
        prop_assert!((m0 - m1).abs() <= 1e-8 * (1.0 + m0));
        // Dirichlet zero boundary with nonnegative data stays nonnegative too
        cfg.boundary = BoundaryKind::Dirichlet;
        let sol = solve(&cfg, &init, &|_, _| 0.0, &zero_mu(1)).unwrap();
        prop_assert!(sol.u.iter().all(|&v| v >= -1e-12));
    }
}
