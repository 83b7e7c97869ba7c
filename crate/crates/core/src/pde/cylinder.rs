//! Quadrature over cylinders `B_ρ(y) × [s - H, s + H]` for grid solutions.
//!
//! Spatial nodes carry the stored coordinate at which `u` is interpolated
//! and the distance `|x - y|` (needed by cutoffs). On a line and for radial
//! solutions centred at the origin the ball is cut into slabs or shells; for
//! a radial solution queried off the origin the ball is parameterised in
//! polar coordinates about `y`, so `|x|² = |y|² + r² + 2|y| r cos ψ`.

use super::{Geometry, GridSolution, PdeError, Result};
use crate::quad::unit_rule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialNode {
    /// Stored coordinate (`x` on a line, `|x|` radially).
    pub coord: f64,
    /// `|x - y|`.
    pub dist: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderQuadrature {
    pub nodes: Vec<SpatialNode>,
    pub rho: f64,
}

impl CylinderQuadrature {
    /// Midpoint-type rule with `m` radial (or slab) cells on `B_ρ(y)`.
    pub fn new(geometry: &Geometry, y: &[f64], rho: f64, m: usize) -> Result<Self> {
        if y.len() != geometry.dim() {
            return Err(PdeError::InvalidArgument(format!(
                "point has dimension {}, solution has {}",
                y.len(),
                geometry.dim()
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::InvalidArgument(format!("bad ball radius {rho}")));
        }
        let m = m.max(2);
        let (lo, hi) = geometry.interval();
        let c = geometry.coordinate(y);
        let slack = 1e-12 * (hi - lo).max(1.0);
        let inside = match geometry {
            Geometry::Line { .. } => c - rho >= lo - slack && c + rho <= hi + slack,
            Geometry::Radial { .. } => c + rho <= hi + slack,
        };
        if !inside {
            return Err(PdeError::OutsideGrid(format!("ball of radius {rho} about {y:?}")));
        }
        let dr = rho / m as f64;
        let mut nodes = Vec::new();
        match *geometry {
            Geometry::Line { .. } | Geometry::Radial { dim: 1, .. } => {
                let w = 2.0 * rho / (2 * m) as f64;
                for i in 0..2 * m {
                    let x = c - rho + (i as f64 + 0.5) * w;
                    let coord = if matches!(geometry, Geometry::Line { .. }) { x } else { x.abs() };
                    nodes.push(SpatialNode { coord, dist: (x - c).abs(), weight: w });
                }
            }
            Geometry::Radial { .. } if c == 0.0 => {
                for i in 0..m {
                    let r = (i as f64 + 0.5) * dr;
                    let weight = geometry.shell_volume(i as f64 * dr, (i + 1) as f64 * dr);
                    nodes.push(SpatialNode { coord: r, dist: r, weight });
                }
            }
            Geometry::Radial { dim, .. } => {
                let angles = (m / 4).clamp(8, 64);
                let fractions = angular_fractions(dim, angles);
                let dpsi = std::f64::consts::PI / angles as f64;
                for i in 0..m {
                    let r = (i as f64 + 0.5) * dr;
                    let shell = geometry.shell_volume(i as f64 * dr, (i + 1) as f64 * dr);
                    for (a, frac) in fractions.iter().enumerate() {
                        let psi = (a as f64 + 0.5) * dpsi;
                        let coord = (c * c + r * r + 2.0 * c * r * psi.cos()).max(0.0).sqrt();
                        nodes.push(SpatialNode { coord, dist: r, weight: shell * frac });
                    }
                }
            }
        }
        Ok(Self { nodes, rho })
    }

    /// Resolution matched to the solution grid.
    pub fn for_solution(u: &GridSolution, y: &[f64], rho: f64) -> Result<Self> {
        let cells = (rho / u.h).ceil() as usize;
        Self::new(&u.geometry, y, rho, (2 * cells).clamp(32, 256))
    }

    pub fn volume(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Fractions of `S^{N-1}` between polar angles `[a dψ, (a+1) dψ]`, `dψ = π/angles`.
fn angular_fractions(dim: usize, angles: usize) -> Vec<f64> {
    let dpsi = std::f64::consts::PI / angles as f64;
    let rule = unit_rule(16);
    let raw: Vec<f64> = (0..angles)
        .map(|a| {
            let lo = a as f64 * dpsi;
            rule.integrate(lo, lo + dpsi, |t| t.sin().powi(dim as i32 - 2))
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Midpoint time nodes on `[s - H, s + H]`: `(t, weight)`.
pub(crate) fn time_nodes(s: f64, half: f64, m: usize) -> Vec<(f64, f64)> {
    let w = 2.0 * half / m as f64;
    (0..m).map(|i| (s - half + (i as f64 + 0.5) * w, w)).collect()
}

pub(crate) fn check_time_window(u: &GridSolution, s: f64, half: f64) -> Result<()> {
    let tslack = 1e-12 * (u.t_end() - u.t0).max(1.0);
    if !(half >= 0.0 && s - half >= u.t0 - tslack && s + half <= u.t_end() + tslack) {
        return Err(PdeError::OutsideGrid(format!(
            "time window [{}, {}] not inside [{}, {}]",
            s - half,
            s + half,
            u.t0,
            u.t_end()
        )));
    }
    Ok(())
}

pub(crate) fn time_count(u: &GridSolution, half: f64) -> usize {
    let steps = (2.0 * half / u.k).ceil();
    if steps.is_finite() {
        (2 * steps as usize).clamp(16, 256)
    } else {
        256
    }
}

/// `∬ f(u) dx dt` over `B_ρ(y) × [s - H, s + H]`.
pub(crate) fn integrate_power(
    u: &GridSolution,
    quad: &CylinderQuadrature,
    s: f64,
    half: f64,
    f: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    check_time_window(u, s, half)?;
    let mut acc = 0.0;
    for (t, wt) in time_nodes(s, half, time_count(u, half)) {
        for n in &quad.nodes {
            let v = u.interp(n.coord, t).ok_or_else(|| PdeError::OutsideGrid(format!("({}, {t})", n.coord)))?;
            acc += wt * n.weight * f(v);
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LebesguePoint {
    /// Extrapolated limit of the cylinder averages.
    pub value: f64,
    /// `(ρ, average)` per scale.
    pub averages: Vec<(f64, f64)>,
    /// Mean oscillation `⨍|u - avg|` on the smallest cylinder.
    pub oscillation: f64,
    /// False when the oscillation does not die out at the smallest scale.
    pub is_lebesgue: bool,
}

/// Averages of `g(u)` over `B_ρ(y) × [s - ρ^p, s + ρ^p]` for the given
/// radii, extrapolated (Aitken) from the last three.
pub fn lebesgue_point_value(
    u: &GridSolution,
    y: &[f64],
    s: f64,
    rhos: &[f64],
    g: &dyn Fn(f64) -> f64,
) -> Result<LebesguePoint> {
    if rhos.is_empty() {
        return Err(PdeError::InvalidArgument("empty radius sequence".into()));
    }
    let mut averages = Vec::with_capacity(rhos.len());
    let mut oscillation = 0.0;
    let mut scale = 0.0f64;
    for (idx, &rho) in rhos.iter().enumerate() {
        let quad = CylinderQuadrature::for_solution(u, y, rho)?;
        let half = rho.powf(u.p);
        let vol = quad.volume() * 2.0 * half;
        let avg = integrate_power(u, &quad, s, half, g)? / vol;
        averages.push((rho, avg));
        if idx + 1 == rhos.len() {
            oscillation = integrate_power(u, &quad, s, half, &|v| (g(v) - avg).abs())? / vol;
            scale = integrate_power(u, &quad, s, half, &|v| g(v).abs())? / vol;
        }
    }
    let value = extrapolate(&averages);
    let is_lebesgue = oscillation <= 0.05 * scale.max(value.abs()) || oscillation <= 1e-12;
    Ok(LebesguePoint { value, averages, oscillation, is_lebesgue })
}

fn extrapolate(averages: &[(f64, f64)]) -> f64 {
    let n = averages.len();
    let last = averages[n - 1].1;
    if n < 3 {
        return last;
    }
    let (a0, a1, a2) = (averages[n - 3].1, averages[n - 2].1, last);
    let d1 = a1 - a0;
    let d2 = a2 - a1;
    let denom = d2 - d1;
    // only accelerate a monotone, contracting sequence
    if denom == 0.0 || d1 * d2 <= 0.0 || d2.abs() >= d1.abs() {
        return last;
    }
    let acc = a2 - d2 * d2 / denom;
    if acc.is_finite() && (acc - a2).abs() <= 4.0 * d2.abs() {
        acc
    } else {
        last
    }
}

/// `(ρ^{-(N+p)} ∬_{Q_{ρ,θ}} u_±^{(1+λ)(p-1)})^{1/(1+λ(p-1))}`.
#[allow(clippy::too_many_arguments)]
pub fn cylinder_average_power(
    u: &GridSolution,
    y: &[f64],
    s: f64,
    rho: f64,
    theta: f64,
    lambda: f64,
    p: f64,
    sign: crate::measure::Sign,
) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(PdeError::InvalidArgument(format!("bad time half-height {theta}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) || !(p >= 2.0) {
        return Err(PdeError::InvalidArgument(format!("bad exponents p = {p}, λ = {lambda}")));
    }
    if p == 2.0 && rho * rho > theta {
        return Err(PdeError::InvalidArgument(format!("p = 2 requires ρ² ≤ θ (ρ = {rho}, θ = {theta})")));
    }
    let quad = CylinderQuadrature::for_solution(u, y, rho)?;
    let q = (1.0 + lambda) * (p - 1.0);
    let part = |v: f64| match sign {
        crate::measure::Sign::Plus => v.max(0.0),
        crate::measure::Sign::Minus => (-v).max(0.0),
    };
    let integral = integrate_power(u, &quad, s, theta, &|v| part(v).powf(q))?;
    let n = u.dim() as f64;
    Ok((rho.powf(-(n + p)) * integral).powf(1.0 / (1.0 + lambda * (p - 1.0))))
}
