//! Weak-form residual against separable smoothstep bumps.
//!
//! For a test function `θ` supported inside the grid the residual is
//! `∬ F(∇u)·∇θ - ∬ u ∂_tθ - ∬ θ dμ` with `F(g) = |g|^{p-2} g`, evaluated on
//! the solver grid: fluxes at face midpoints from neighbouring node values,
//! `u ∂_tθ` by control volumes with the right-endpoint rule in time, and the
//! source with the solver's own per-step masses. Derivatives of `θ` are
//! exact.

use serde::{Deserialize, Serialize};

use super::{control_volumes, Geometry, GridSolution, PdeError, Result, Sources};
use crate::measure::SignedMeasure;

/// `1` on `[0, ½]`, `1 - S(2r - 1)` on `[½, 1]`, `0` beyond, with the
/// quintic smoothstep `S(z) = 6z⁵ - 15z⁴ + 10z³`. `|η'| ≤ 15/4`.
pub fn bump_profile(r: f64) -> f64 {
    let r = r.abs();
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let z = 2.0 * r - 1.0;
        1.0 - z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
    }
}

/// `(η'(r), η''(r))` for `r ≥ 0`.
pub fn bump_profile_derivative(r: f64) -> (f64, f64) {
    let r = r.abs();
    if r <= 0.5 || r >= 1.0 {
        return (0.0, 0.0);
    }
    let z = 2.0 * r - 1.0;
    let s1 = 30.0 * z * z * (1.0 - z) * (1.0 - z);
    let s2 = 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
    (-2.0 * s1, -4.0 * s2)
}

/// `θ(c, t) = η(|c - c₀|/R) η(|t - t₀|/T)` in the stored coordinate `c`.
/// Radially, the bump must be centred at the origin or stay away from it,
/// so that it is `C¹` as a function on `ℝ^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub t_center: f64,
    pub radius: f64,
    pub t_radius: f64,
}

impl Bump {
    fn factors(&self, c: f64) -> (f64, f64) {
        let d = c - self.center;
        let (e1, _) = bump_profile_derivative(d / self.radius);
        (bump_profile(d / self.radius), e1 * d.signum() / self.radius)
    }

    fn time_factors(&self, t: f64) -> (f64, f64, f64) {
        let d = t - self.t_center;
        let (e1, e2) = bump_profile_derivative(d / self.t_radius);
        (bump_profile(d / self.t_radius), e1 * d.signum() / self.t_radius, e2 / (self.t_radius * self.t_radius))
    }

    pub fn value(&self, c: f64, t: f64) -> f64 {
        self.factors(c).0 * self.time_factors(t).0
    }

    fn check(&self, u: &GridSolution) -> Result<()> {
        if !(self.radius > 0.0 && self.t_radius > 0.0 && self.center.is_finite() && self.t_center.is_finite()) {
            return Err(PdeError::InvalidArgument(format!("degenerate bump {self:?}")));
        }
        let (lo, hi) = u.geometry.interval();
        let radial = matches!(u.geometry, Geometry::Radial { .. });
        if radial && self.center != 0.0 && self.center < self.radius {
            return Err(PdeError::InvalidArgument("radial bump must be centred at 0 or avoid the origin".into()));
        }
        let inside = (radial && self.center == 0.0 || self.center - self.radius >= lo)
            && self.center + self.radius <= hi
            && self.t_center - self.t_radius >= u.t0
            && self.t_center + self.t_radius <= u.t_end();
        if !inside {
            return Err(PdeError::OutsideGrid(format!("bump support {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// `∬ F·∇θ - ∬ u θ_t - ∬ θ dμ`.
    pub residual: f64,
    /// Size-of-terms estimate of the discretisation error (see `weak_residual`).
    pub truncation_estimate: f64,
    pub flux_term: f64,
    pub time_term: f64,
    pub source_term: f64,
}

/// Residual of the integral identity against `θ`.
///
/// The truncation estimate is
/// `k ∬ (|u_t||θ_t| + |u||θ_tt|) + (h/R)² ∬ (|F||∇θ| + |u||θ_t| + |θ| d|μ|) + ∬ |F_ε - F||∇θ|`,
/// i.e. first order in time, second order in space relative to the bump
/// radius, plus the regularisation defect.
pub fn weak_residual(u: &GridSolution, mu: &SignedMeasure, theta: &Bump) -> Result<WeakResidual> {
    theta.check(u)?;
    let sources = Sources::new(u.geometry, u.h, u.nodes, mu)?;
    let abs_sources = Sources::new(u.geometry, u.h, u.nodes, &SignedMeasure::positive(mu.abs()))?;
    let vol = control_volumes(&u.geometry, u.h, u.nodes);
    let (lo, _) = u.geometry.interval();
    let faces: Vec<(f64, f64)> =
        (0..u.nodes - 1).map(|f| {
            let c = lo + (f as f64 + 0.5) * u.h;
            (c, u.geometry.face_area(c))
        }).collect();
    let pexp = u.p - 2.0;
    let (h, k, eps) = (u.h, u.k, u.eps);

    let mut flux_term = 0.0;
    let mut time_term = 0.0;
    let mut source_term = 0.0;
    let mut e_time = 0.0;
    let mut e_space = 0.0;
    let mut e_reg = 0.0;
    let mut src = vec![0.0; u.nodes];
    let mut abs_src = vec![0.0; u.nodes];

    for n in 1..u.levels {
        let t = u.time(n);
        let (th_t, dth_t, d2th_t) = theta.time_factors(t);
        if th_t == 0.0 && dth_t == 0.0 && d2th_t == 0.0 {
            continue;
        }
        let cur = u.level(n);
        let prev = u.level(n - 1);
        for (f, &(c, area)) in faces.iter().enumerate() {
            let (_, dx) = theta.factors(c);
            if dx == 0.0 {
                continue;
            }
            let g = (cur[f + 1] - cur[f]) / h;
            let flux = g.abs().powf(pexp) * g;
            let flux_eps = (g * g + eps * eps).powf(0.5 * pexp) * g;
            let w = k * area * h;
            flux_term += w * flux * dx * th_t;
            e_space += w * (flux * dx * th_t).abs();
            e_reg += w * ((flux_eps - flux) * dx * th_t).abs();
        }
        sources.step(u.time(n - 1), t, &mut src);
        abs_sources.step(u.time(n - 1), t, &mut abs_src);
        for i in 0..u.nodes {
            let (th_x, _) = theta.factors(u.coord(i));
            if th_x == 0.0 {
                continue;
            }
            let w = k * vol[i];
            time_term += w * cur[i] * th_x * dth_t;
            source_term += src[i] * th_x * th_t;
            let ut = (cur[i] - prev[i]) / k;
            e_time += w * k * ((ut * th_x * dth_t).abs() + (cur[i] * th_x * d2th_t).abs());
            e_space += w * (cur[i] * th_x * dth_t).abs() + (abs_src[i] * th_x * th_t).abs();
        }
    }
    let ratio = h / theta.radius;
    let residual = flux_term - time_term - source_term;
    Ok(WeakResidual {
        residual,
        truncation_estimate: e_time + ratio * ratio * e_space + e_reg,
        flux_term,
        time_term,
        source_term,
    })
}
