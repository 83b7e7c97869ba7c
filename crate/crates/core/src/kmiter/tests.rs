use super::*;
use crate::pde::{heat_kernel, ExactSolution, Geometry};
use crate::quad::adaptive;

fn fd(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = 1e-5 * (1.0 + s);
    (f(s + h) - f(s - h)) / (2.0 * h)
}

#[test]
fn scalar_function_examples() {
    assert_eq!((g(0.5), g(2.0), g(-1.0)), (0.25, 2.0, 0.0));
    let f = ScalarFns::new(0.5, 3.0).unwrap();
    assert!((f.psi(3.0) - 1.0).abs() < 1e-15);
    assert_eq!(f.psi(0.0), 0.0);
    assert_eq!(f.phi(0.0), 0.0);
    assert!((f.phi(1e12) - 2.0).abs() < 1e-5);
    let one = ScalarFns { lambda: 1.0, p: 3.0 };
    assert!((one.phi(1.0) - 0.5).abs() < 1e-15);
    assert!(ScalarFns::new(1.0, 3.0).is_err());
}

#[test]
fn derivative_identities() {
    for (lambda, p) in [(0.5, 3.0), (0.2, 2.0), (0.9, 4.5)] {
        let f = ScalarFns::new(lambda, p).unwrap();
        for s in [0.1, 0.3, 0.7, 1.0, 2.0, 3.5, 5.0, 10.0, 30.0, 100.0] {
            let pairs = [
                (f.psi_prime(s), fd(|x| f.psi(x), s)),
                (f.phi_prime(s), fd(|x| f.phi(x), s)),
                (f.phi(s), fd(|x| f.big_phi(x), s)),
            ];
            for (exact, num) in pairs {
                assert!((exact - num).abs() <= 1e-6 * exact.abs(), "λ={lambda} p={p} s={s}: {exact} vs {num}");
            }
        }
        // the unscaled derivative (1+s)^{-(1+λ)/p} is off by the factor 1-(1+λ)/p
        let s = 1.0f64;
        let unscaled = (1.0 + s).powf(-(1.0 + lambda) / p);
        assert!((unscaled - fd(|x| f.psi(x), s)).abs() > 1e-3);
        // Φ is the integral of φ
        let q = adaptive(|x| f.phi(x), 0.0, 7.0, 1e-13, 1e-13, 30);
        assert!((q - f.big_phi(7.0)).abs() < 1e-10);
    }
}

#[test]
fn big_phi_comparability() {
    for lambda in [0.05, 0.3, 0.5, 0.99] {
        let f = ScalarFns::new(lambda, 3.0).unwrap();
        let lower = 2f64.powf(-2.0 - lambda);
        let mut upper_fails = false;
        for i in 1..=20_000 {
            let s = 100.0 * i as f64 / 20_000.0;
            let (big, gs) = (f.big_phi(s), g(s));
            assert!(lower * gs <= big * (1.0 + 1e-12), "λ={lambda} s={s}");
            assert!(big <= gs / lambda * (1.0 + 1e-12), "λ={lambda} s={s}");
            upper_fails |= gs > big;
        }
        // G ≤ Φ does not hold pointwise
        assert!(upper_fails);
    }
}

#[test]
fn cutoff_shape_and_bounds() {
    assert_eq!(unit_cutoff(0.49, -0.5), 1.0);
    assert_eq!(unit_cutoff(1.0, 0.0), 0.0);
    assert_eq!(unit_cutoff(0.2, 1.01), 0.0);
    for p in [2.0, 2.5, 3.0, 4.0] {
        let (rho, delta, s) = (0.3, 0.7, 1.0);
        let half = intrinsic_halfheight(p, rho, delta);
        let (mut gx, mut gt) = (0.0f64, 0.0f64);
        for i in 0..=2000 {
            let r = 1.1 * rho * i as f64 / 2000.0;
            gx = gx.max(fd(|x| cutoff_xi(p, rho, delta, s, x, s), r).abs());
            let t = s + 1.1 * half * i as f64 / 2000.0;
            gt = gt.max(((cutoff_xi(p, rho, delta, s, 0.0, t + 1e-7 * half) - cutoff_xi(p, rho, delta, s, 0.0, t - 1e-7 * half)) / (2e-7 * half)).abs());
        }
        assert!(gx <= 4.0 / rho, "p={p}: {gx}");
        assert!(gt <= 8.0 * delta.powf(p - 2.0) * rho.powf(-p), "p={p}: {gt}");
        assert!((cutoff_xi(p, rho, delta, s, 0.4 * rho, s + 0.45 * half) - 1.0).abs() < 1e-15);
    }
}

fn line_solution(p: f64, f: impl Fn(f64, f64) -> f64) -> GridSolution {
    GridSolution::from_fn(Geometry::Line { a: -2.0, b: 2.0 }, p, 400, 0.0, 0.0025, 800, f).unwrap()
}

#[test]
fn a_j_calibration() {
    let (p, l, delta) = (3.0, 0.4, 0.25);
    let u = line_solution(p, |_, _| l + delta);
    let params = PotentialParams::new(p, 1).unwrap();
    let settings = KmSettings { space_cells: 256, time_nodes: 256, ..Default::default() };
    let rho = 0.5;
    let level = Level::new(&u, &params, &settings, &[0.1], 1.0, 0, rho, l).unwrap();
    let integral = |q: f64| adaptive(|r| bump_profile(r).powf(q), 0.0, 1.0, 1e-14, 1e-14, 40);
    let m = params.m;
    let want = 4.0 * integral(m - p) * integral(m - p) + 2.0 * integral(m);
    let got = level.a(delta).unwrap();
    assert!((got - want).abs() < 1e-4 * want, "{got} vs {want}");

    let below = Level::new(&u, &params, &settings, &[0.1], 1.0, 0, rho, l + 2.0 * delta).unwrap();
    assert_eq!(below.a(delta).unwrap(), 0.0);
}

#[test]
fn a_j_vanishes_for_large_delta() {
    let p = 3.0;
    let u = line_solution(p, |x, t| (1.0 - x * x).max(0.0) * (1.0 + t));
    let params = PotentialParams::new(p, 1).unwrap();
    let level = Level::new(&u, &params, &KmSettings::default(), &[0.0], 1.0, 0, 0.5, 0.0).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=6 {
        let a = level.a(10f64.powi(k)).unwrap();
        assert!(a < last);
        last = a;
    }
    assert!(last < 1e-6, "{last}");
}

#[test]
fn nonpositive_data_halves() {
    let p = 3.0;
    let u = line_solution(p, |x, _| -x * x);
    let params = PotentialParams::new(p, 1).unwrap();
    let mu = SpaceTimeMeasure::zero(1);
    let (rho, theta) = (0.5, 0.5);
    let r = run(&u, &mu, &params, &KmSettings::default(), &[0.2], 1.0, rho, theta).unwrap();
    let drt = delta_rho_theta(p, rho, theta);
    assert!(r.converged && !r.hit_j_max);
    assert!((r.l_inf - 2.0 * drt).abs() <= 1e-10, "{} vs {}", r.l_inf, 2.0 * drt);
    for (j, st) in r.states.iter().enumerate() {
        assert_eq!(st.branch, Branch::Hat);
        assert_eq!(st.a_j, 0.0);
        assert!(st.tau_j.is_infinite() && st.ihat == 0.0);
        assert!((st.delta_j - drt * 0.5f64.powi(j as i32)).abs() <= 1e-15 * drt);
    }
    assert!(check_trace(&r, &params, theta).passes(1e-6));
}

#[test]
fn heat_kernel_is_dominated() {
    let t0 = 0.05;
    let u = GridSolution::from_fn(Geometry::Line { a: -3.0, b: 3.0 }, 2.0, 600, t0, 0.0025, 400, |x, t| heat_kernel(1, x, t)).unwrap();
    let params = PotentialParams::new(2.0, 1).unwrap();
    let mu = SpaceTimeMeasure::zero(1);
    for (y, s) in [(0.0, 0.5), (0.4, 0.3), (-1.0, 0.8)] {
        let (rho, theta) = (0.25, 0.0625);
        let r = run(&u, &mu, &params, &KmSettings::default(), &[y], s, rho, theta).unwrap();
        let exact = heat_kernel(1, y, s);
        assert!(r.l_inf >= exact, "y={y} s={s}: {} < {exact}", r.l_inf);
        assert!(r.l_inf.is_finite() && r.converged);
        let c = check_trace(&r, &params, theta);
        assert!(c.passes(1e-6), "{c:?}");
        assert!(r.states.iter().any(|s| s.branch == Branch::Root));
    }
}

#[test]
fn barenblatt_is_dominated() {
    let (p, t0) = (3.0, 0.1);
    let exact = ExactSolution::Barenblatt { p, dim: 1, c: 0.2 };
    let u = GridSolution::from_fn(Geometry::Line { a: -2.0, b: 2.0 }, p, 800, t0, 0.0025, 400, |x, t| exact.eval(x.abs(), t)).unwrap();
    let params = PotentialParams::new(p, 1).unwrap();
    let mu = SpaceTimeMeasure::zero(1);
    let (y, s, rho) = (0.2, 0.6, 0.2f64);
    let theta = 0.4 * rho.powf(p);
    let r = run(&u, &mu, &params, &KmSettings::default(), &[y], s, rho, theta).unwrap();
    assert!(r.l_inf >= exact.eval(y, s) && r.l_inf.is_finite());
    assert!(check_trace(&r, &params, theta).passes(1e-6));
}

#[test]
fn zero_iterations_give_empty_trace() {
    let u = line_solution(3.0, |_, _| 1.0);
    let params = PotentialParams::new(3.0, 1).unwrap();
    let settings = KmSettings { j_max: 0, ..Default::default() };
    let r = run(&u, &SpaceTimeMeasure::zero(1), &params, &settings, &[0.0], 1.0, 0.5, 0.5).unwrap();
    assert!(r.states.is_empty() && r.l_inf == 0.0);
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &r).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "j,rho_j,tau_j,ihat,delta_hat,delta_j,l_j,A_j,branch\n");
}

#[test]
fn setup_errors() {
    let u = line_solution(2.0, |_, _| 1.0);
    let params = PotentialParams::new(2.0, 1).unwrap();
    let mu = SpaceTimeMeasure::zero(1);
    // ρ² > θ
    assert!(run(&u, &mu, &params, &KmSettings::default(), &[0.0], 1.0, 0.5, 0.1).is_err());
    // leaves the grid
    assert!(run(&u, &mu, &params, &KmSettings::default(), &[1.9], 1.0, 0.5, 0.5).is_err());
}

#[test]
fn theorem_check_ratios() {
    let zero = line_solution(3.0, |_, _| 0.0);
    let params = PotentialParams::new(3.0, 1).unwrap();
    let r = theorem_check(&zero, &SignedMeasure::zero(1), &[0.0], 1.0, 0.5, 0.5, &params, Sign::Plus).unwrap();
    assert_eq!((r.lhs, r.ratio), (0.0, 0.0));

    let t0 = 0.05;
    let u = GridSolution::from_fn(Geometry::Line { a: -3.0, b: 3.0 }, 2.0, 600, t0, 0.0025, 400, |x, t| heat_kernel(1, x, t)).unwrap();
    let params = PotentialParams::new(2.0, 1).unwrap();
    let ratios: Vec<f64> = (0..6)
        .map(|k| {
            let rho = 0.4 * 0.5f64.powi(k);
            theorem_check(&u, &SignedMeasure::zero(1), &[0.3], 0.5, rho, rho * rho, &params, Sign::Plus).unwrap().ratio
        })
        .collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 4.0 && max <= 10.0, "{ratios:?}");
}
