//! Small numerical kernels shared by the evaluators: Gauss-Legendre panels,
//! an adaptive bisection integrator built on them, and golden-section search.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Nodes and weights of a Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitRule {
    pub fn new(degree: usize) -> Self {
        let degree = NonZeroUsize::new(degree.max(1)).expect("degree >= 1");
        let rule = GaussLegendre::new(degree);
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Iterates `(x, w)` pairs of the rule mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + len * x, len * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn rule10() -> &'static UnitRule {
    static RULE: OnceLock<UnitRule> = OnceLock::new();
    RULE.get_or_init(|| UnitRule::new(10))
}

/// Shared Gauss-Legendre rule of the given degree (cached for 8, 16 and 32).
pub fn unit_rule(degree: usize) -> &'static UnitRule {
    static R8: OnceLock<UnitRule> = OnceLock::new();
    static R16: OnceLock<UnitRule> = OnceLock::new();
    static R32: OnceLock<UnitRule> = OnceLock::new();
    match degree {
        0..=8 => R8.get_or_init(|| UnitRule::new(8)),
        9..=16 => R16.get_or_init(|| UnitRule::new(16)),
        _ => R32.get_or_init(|| UnitRule::new(32)),
    }
}

/// Adaptive bisection with a 10-point Gauss-Legendre panel. A panel is
/// accepted when it agrees with the sum of its two halves to
/// `max(abs_tol, rel_tol * |estimate|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let rule = rule10();
    let whole = rule.integrate(a, b, &mut f);
    adaptive_step(&mut f, rule, a, b, whole, abs_tol, rel_tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    rule: &UnitRule,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let refined = left + right;
    let tol = abs_tol.max(rel_tol * refined.abs());
    if depth == 0 || (refined - whole).abs() <= tol {
        return refined;
    }
    adaptive_step(f, rule, a, mid, left, 0.5 * abs_tol, rel_tol, depth - 1)
        + adaptive_step(f, rule, mid, b, right, 0.5 * abs_tol, rel_tol, depth - 1)
}

/// Adaptive integration over `[a, b]` split at the given interior breakpoints.
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| *x > a && *x < b && x.is_finite())
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pieces = (pts.len() - 1).max(1) as f64;
    pts.windows(2)
        .map(|w| adaptive(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, max_depth))
        .sum()
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
/// Returns the best abscissa seen and its value.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..max_iter {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd <= best_f {
                best_x = d;
                best_f = fd;
            }
        }
    }
    (best_x, best_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rule_integrates_polynomials() {
        let rule = UnitRule::new(8);
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(5) - 3.0 * x * x);
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13, 1e-13, 40);
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        let w = adaptive_with_breaks(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-14, 1e-14, 10);
        assert!((w - exact).abs() < 1e-14);
    }

    #[test]
    fn adaptive_sqrt_endpoint() {
        let v = adaptive(|x: f64| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-12, 1e-12, 40);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.25).powi(2) + 3.0, -4.0, 7.0, 1e-10, 200);
        assert!((x - 1.25).abs() < 1e-7);
        assert!((fx - 3.0).abs() < 1e-12);
    }
}
