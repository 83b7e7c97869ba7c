use serde::{Deserialize, Serialize};

/// Closed-form radial solutions, evaluated at `r = |x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSolution {
    /// Heat kernel of unit mass (`p = 2`).
    HeatKernel { dim: usize },
    /// Barenblatt profile with free constant `c > 0` (`p > 2`).
    Barenblatt { p: f64, dim: usize, c: f64 },
}

impl ExactSolution {
    pub fn dim(&self) -> usize {
        match *self {
            ExactSolution::HeatKernel { dim } | ExactSolution::Barenblatt { dim, .. } => dim,
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            ExactSolution::HeatKernel { .. } => 2.0,
            ExactSolution::Barenblatt { p, .. } => p,
        }
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        match *self {
            ExactSolution::HeatKernel { dim } => heat_kernel(dim, r, t),
            ExactSolution::Barenblatt { p, dim, c } => barenblatt(p, dim, c, r, t),
        }
    }
}

/// `(4πt)^{-N/2} exp(-r²/4t)`; zero for `t ≤ 0`.
pub fn heat_kernel(dim: usize, r: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (4.0 * std::f64::consts::PI * t).powf(-0.5 * dim as f64) * (-r * r / (4.0 * t)).exp()
}

/// `(λ, k)` with `λ = N(p-2)+p` and `k = (p-2)/p · λ^{-1/(p-1)}`.
pub fn barenblatt_constants(p: f64, dim: usize) -> (f64, f64) {
    let lambda = dim as f64 * (p - 2.0) + p;
    (lambda, (p - 2.0) / p * lambda.powf(-1.0 / (p - 1.0)))
}

/// `t^{-N/λ} (c - k (r t^{-1/λ})^{p/(p-1)})_+^{(p-1)/(p-2)}` for `p > 2`.
pub fn barenblatt(p: f64, dim: usize, c: f64, r: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (lambda, k) = barenblatt_constants(p, dim);
    let z = r.abs() * t.powf(-1.0 / lambda);
    let base = c - k * z.powf(p / (p - 1.0));
    if base <= 0.0 {
        0.0
    } else {
        t.powf(-(dim as f64) / lambda) * base.powf((p - 1.0) / (p - 2.0))
    }
}
