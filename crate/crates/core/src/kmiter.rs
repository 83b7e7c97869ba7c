//! The level iteration behind the pointwise potential estimate.
//!
//! Starting from `l_0 = 0`, `δ_{-1} = 2δ_{ρ,θ}`, each level `j` works on
//! `ρ_j = 2^{-j} ρ` and the intrinsic cylinder
//! `Q_j^δ = B_{ρ_j}(y) × (s - ε_p δ^{2-p} ρ_j^p, s + ε_p δ^{2-p} ρ_j^p)`.
//! With `τ_j` the largest minimiser of `D_p(ρ_j)` and
//! `δ̂_j = max(½δ_{j-1}, i_p(τ_j))`, the step is `δ_j = δ̂_j` when
//! `A_j(δ̂_j) ≤ ϰ` and otherwise the first root of `A_j(δ) = ϰ` above
//! `δ̂_j` (factor-2 scan, then bisection). Then `l_{j+1} = l_j + δ_j`.
//!
//! `A_j(δ)` is evaluated by a midpoint rule in normalised cylinder
//! coordinates with bilinear interpolation of the grid solution. The node
//! layout is fixed per level, so `A_j` is continuous in `δ`; the `sup` in
//! time is the maximum over the time nodes.
//!
//! The cutoff is `ξ(x, t) = η(|x|) η(|t|)` with the smoothstep profile `η`
//! of [`crate::pde::bump_profile`]: it is 1 on the half cylinder, vanishes
//! outside the unit cylinder and `|∇ξ|, |∂_tξ| ≤ 15/4`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Sign, SignedMeasure, SpaceTimeMeasure};
use crate::pde::{bump_profile, cylinder_average_power, lebesgue_point_value, CylinderQuadrature, GridSolution, LebesguePoint, PdeError};
use crate::potential::{dp, eps_p, i_p_unchecked, parabolic_potential, PotentialError, PotentialParams};

#[derive(Debug, Error)]
pub enum KmError {
    #[error("invalid iteration setup: {0}")]
    InvalidSetup(String),
    #[error("no root of A_j = ϰ below δ = {limit:e} at level {j}")]
    BracketFailure { j: usize, limit: f64 },
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

pub type Result<T> = std::result::Result<T, KmError>;

/// `G(s) = min(s_+², s_+)`.
pub fn g(s: f64) -> f64 {
    let s = s.max(0.0);
    (s * s).min(s)
}

/// The one-parameter family `ψ`, `φ`, `Φ` of the energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarFns {
    pub lambda: f64,
    pub p: f64,
}

impl ScalarFns {
    pub fn new(lambda: f64, p: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) || !(p >= 2.0 && p.is_finite()) {
            return Err(KmError::InvalidSetup(format!("need λ ∈ (0,1), p ≥ 2; got λ = {lambda}, p = {p}")));
        }
        Ok(Self { lambda, p })
    }

    pub fn g(&self, s: f64) -> f64 {
        g(s)
    }

    /// `ψ(s) = (1 + s_+)^{1-(1+λ)/p} - 1`.
    pub fn psi(&self, s: f64) -> f64 {
        (1.0 + s.max(0.0)).powf(1.0 - (1.0 + self.lambda) / self.p) - 1.0
    }

    /// `ψ'(s) = (1 - (1+λ)/p) (1 + s)^{-(1+λ)/p}` for `s > 0`.
    pub fn psi_prime(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let e = (1.0 + self.lambda) / self.p;
        (1.0 - e) * (1.0 + s).powf(-e)
    }

    /// `φ(s) = ∫_0^{s_+} (1+τ)^{-1-λ} dτ = (1 - (1+s_+)^{-λ}) / λ`.
    pub fn phi(&self, s: f64) -> f64 {
        (1.0 - (1.0 + s.max(0.0)).powf(-self.lambda)) / self.lambda
    }

    pub fn phi_prime(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            (1.0 + s).powf(-1.0 - self.lambda)
        }
    }

    /// `Φ(s) = ∫_0^s φ`.
    pub fn big_phi(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let l = self.lambda;
        if (l - 1.0).abs() < 1e-12 {
            s - s.ln_1p()
        } else {
            (s - ((1.0 + s).powf(1.0 - l) - 1.0) / (1.0 - l)) / l
        }
    }
}

/// Unit cutoff `ξ(x, t) = η(|x|) η(|t|)`.
pub fn unit_cutoff(x_norm: f64, t: f64) -> f64 {
    bump_profile(x_norm) * bump_profile(t)
}

/// Settings of the iteration beyond the potential parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmSettings {
    pub j_max: usize,
    /// Stop once `δ_j < term_tolerance · (l_j + δ_{ρ,θ} + 1)`.
    pub term_tolerance: f64,
    /// Relative bisection tolerance in `δ`.
    pub root_tolerance: f64,
    /// Root bracketing gives up beyond `bracket_limit · max(δ̂_j, 1 + ‖u‖_∞)`.
    pub bracket_limit: f64,
    /// Time nodes of the `A_j` quadrature.
    pub time_nodes: usize,
    /// Radial (or half-slab) cells of the spatial quadrature.
    pub space_cells: usize,
}

impl Default for KmSettings {
    fn default() -> Self {
        Self {
            j_max: 60,
            term_tolerance: 1e-8,
            root_tolerance: 1e-8,
            bracket_limit: 1e12,
            time_nodes: 64,
            space_cells: 64,
        }
    }
}

/// `ξ_{j,δ}` at `(x, t)` given `|x - y|`.
pub fn cutoff_xi(p: f64, rho_j: f64, delta: f64, s: f64, dist: f64, t: f64) -> f64 {
    let half = intrinsic_halfheight(p, rho_j, delta);
    unit_cutoff(dist / rho_j, (t - s) / half)
}

/// `ε_p δ^{2-p} ρ^p`.
pub fn intrinsic_halfheight(p: f64, rho: f64, delta: f64) -> f64 {
    let e = if p == 2.0 { 1.0 } else { (p - 2.0).powf(p - 2.0) };
    e * delta.powf(2.0 - p) * rho.powf(p)
}

/// `δ_{ρ,θ} = (ε_p ρ^p / θ)^{1/(p-2)}`, zero for `p = 2`.
pub fn delta_rho_theta(p: f64, rho: f64, theta: f64) -> f64 {
    if p == 2.0 {
        0.0
    } else {
        ((p - 2.0).powf(p - 2.0) * rho.powf(p) / theta).powf(1.0 / (p - 2.0))
    }
}

/// `ε_{ρ,θ} = ρ^{p/(p-2)} θ^{-1/(p-2)}`, zero for `p = 2`.
pub fn eps_rho_theta(p: f64, rho: f64, theta: f64) -> f64 {
    if p == 2.0 {
        0.0
    } else {
        rho.powf(p / (p - 2.0)) * theta.powf(-1.0 / (p - 2.0))
    }
}

/// Everything `A_j` needs at a fixed level.
pub struct Level<'a> {
    pub u: &'a GridSolution,
    pub params: &'a PotentialParams,
    pub y: &'a [f64],
    pub s: f64,
    pub j: usize,
    pub rho_j: f64,
    pub l_j: f64,
    quad: CylinderQuadrature,
    time_nodes: usize,
}

impl<'a> Level<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        u: &'a GridSolution,
        params: &'a PotentialParams,
        settings: &KmSettings,
        y: &'a [f64],
        s: f64,
        j: usize,
        rho_j: f64,
        l_j: f64,
    ) -> Result<Self> {
        let quad = CylinderQuadrature::new(&u.geometry, y, rho_j, settings.space_cells)?;
        Ok(Self { u, params, y, s, j, rho_j, l_j, quad, time_nodes: settings.time_nodes.max(2) })
    }

    /// `A_j(δ)`.
    pub fn a(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(KmError::InvalidSetup(format!("δ must be positive, got {delta}")));
        }
        let p = self.params.p;
        let n = self.u.dim() as f64;
        let half = intrinsic_halfheight(p, self.rho_j, delta);
        let (t_lo, t_hi) = (self.s - half, self.s + half);
        let tslack = 1e-12 * (self.u.t_end() - self.u.t0).max(1.0);
        if t_lo < self.u.t0 - tslack || t_hi > self.u.t_end() + tslack {
            return Err(PdeError::OutsideGrid(format!("Q_{}^δ time window [{t_lo}, {t_hi}] at δ = {delta:e}", self.j)).into());
        }
        let q = (1.0 + self.params.lambda) * (p - 1.0);
        let m = self.params.m;
        let wt = 2.0 / self.time_nodes as f64;
        let rho_n = self.rho_j.powf(n);
        let mut first = 0.0;
        let mut sup = 0.0f64;
        for it in 0..self.time_nodes {
            let tau = -1.0 + (it as f64 + 0.5) * wt;
            let t = self.s + half * tau;
            let eta_t = bump_profile(tau);
            let mut slice1 = 0.0;
            let mut slice2 = 0.0;
            for node in &self.quad.nodes {
                let v = self.u.interp(node.coord, t).ok_or_else(|| PdeError::OutsideGrid(format!("({}, {t})", node.coord)))?;
                let z = (v - self.l_j) / delta;
                if z <= 0.0 {
                    continue;
                }
                let xi = bump_profile(node.dist / self.rho_j) * eta_t;
                if xi == 0.0 {
                    continue;
                }
                slice1 += node.weight * z.powf(q) * xi.powf(m - p);
                slice2 += node.weight * g(z) * xi.powf(m);
            }
            first += wt * slice1;
            sup = sup.max(slice2);
        }
        // δ^{p-2} / (ε_p ρ^{N+p}) × (half-height · normalised integral) = ρ^{-N} × normalised integral
        Ok((first + sup) / rho_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `A_j(δ̂_j) ≤ ϰ`, so `δ_j = δ̂_j`.
    Hat,
    /// `δ_j` solves `A_j(δ_j) = ϰ`.
    Root,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Hat => "hat",
            Branch::Root => "root",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub j: usize,
    pub rho_j: f64,
    pub tau_j: f64,
    /// `i_p(τ_j)`.
    pub ihat: f64,
    pub delta_hat: f64,
    pub delta_j: f64,
    /// Level before the step.
    pub l_j: f64,
    pub a_j: f64,
    pub branch: Branch,
    /// `D_p(ρ_j)` for `μ_+`.
    pub dp_j: f64,
    /// Half-height of the realised `Q_j`.
    pub halfheight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryComponents {
    pub two_delta_rho_theta: f64,
    pub average_term: f64,
    pub dp_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub states: Vec<IterationState>,
    /// `Σ δ_j` plus `tail`.
    pub l_inf: f64,
    /// Sum of the halving continuation `Σ_{i ≥ 1} 2^{-i} δ_last = δ_last`,
    /// the least the remaining steps can contribute.
    pub tail: f64,
    pub converged: bool,
    /// Stopped at `j_max` instead of the term tolerance.
    pub hit_j_max: bool,
    pub delta_rho_theta: f64,
    pub corollary: CorollaryComponents,
}

/// One step of the recursion from `(l_j, δ_{j-1})`.
#[allow(clippy::too_many_arguments)]
pub fn next_level(
    u: &GridSolution,
    mu_plus: &SpaceTimeMeasure,
    params: &PotentialParams,
    settings: &KmSettings,
    y: &[f64],
    s: f64,
    rho: f64,
    j: usize,
    l_j: f64,
    delta_prev: f64,
) -> Result<IterationState> {
    let p = params.p;
    let rho_j = rho * 0.5f64.powi(j as i32);
    let d = dp(params, mu_plus, y, s, rho_j)?;
    let ihat = i_p_unchecked(p, d.tau_star);
    let delta_hat = (0.5 * delta_prev).max(ihat);
    if !delta_hat.is_finite() {
        return Err(KmError::InvalidSetup(format!("i_p(τ_{j}) is infinite")));
    }
    let level = Level::new(u, params, settings, y, s, j, rho_j, l_j)?;
    let kappa = params.kappa;

    let start = if delta_hat > 0.0 { delta_hat } else { f64::EPSILON * (1.0 + u.max_abs()) };
    let a_start = level.a(start)?;
    let (delta_j, a_j, branch) = if a_start <= kappa {
        let a_hat = if delta_hat > 0.0 { a_start } else { 0.0 };
        (delta_hat, a_hat, Branch::Hat)
    } else {
        let limit = settings.bracket_limit * start.max(1.0 + u.max_abs());
        let (mut lo, mut hi) = (start, 2.0 * start);
        let mut a_hi = level.a(hi)?;
        while a_hi > kappa {
            lo = hi;
            hi *= 2.0;
            if hi > limit {
                return Err(KmError::BracketFailure { j, limit });
            }
            a_hi = level.a(hi)?;
        }
        while hi - lo > settings.root_tolerance * hi && (a_hi - kappa).abs() > 1e-9 * kappa {
            let mid = 0.5 * (lo + hi);
            let a_mid = level.a(mid)?;
            if a_mid > kappa {
                lo = mid;
            } else {
                hi = mid;
                a_hi = a_mid;
            }
        }
        (hi, a_hi, Branch::Root)
    };
    Ok(IterationState {
        j,
        rho_j,
        tau_j: d.tau_star,
        ihat,
        delta_hat,
        delta_j,
        l_j,
        a_j,
        branch,
        dp_j: d.value,
        halfheight: intrinsic_halfheight(p, rho_j, delta_j.max(f64::MIN_POSITIVE)),
    })
}

fn check_base_cylinder(u: &GridSolution, p: f64, y: &[f64], s: f64, rho: f64, theta: f64) -> Result<()> {
    if !(rho > 0.0 && theta > 0.0 && rho.is_finite() && theta.is_finite()) {
        return Err(KmError::InvalidSetup(format!("bad cylinder ρ = {rho}, θ = {theta}")));
    }
    if p == 2.0 && rho * rho > theta {
        return Err(KmError::InvalidSetup(format!("p = 2 requires ρ² ≤ θ (ρ = {rho}, θ = {theta})")));
    }
    CylinderQuadrature::new(&u.geometry, y, rho, 2)?;
    if s - theta < u.t0 || s + theta > u.t_end() {
        return Err(PdeError::OutsideGrid(format!("[{}, {}] not inside [{}, {}]", s - theta, s + theta, u.t0, u.t_end())).into());
    }
    Ok(())
}

/// Runs the recursion on `Q_{ρ,θ}(y, s)`.
#[allow(clippy::too_many_arguments)]
pub fn run(
    u: &GridSolution,
    mu_plus: &SpaceTimeMeasure,
    params: &PotentialParams,
    settings: &KmSettings,
    y: &[f64],
    s: f64,
    rho: f64,
    theta: f64,
) -> Result<IterationResult> {
    params.validate()?;
    if params.p != u.p || params.n != u.dim() || mu_plus.dim() != u.dim() {
        return Err(KmError::InvalidSetup(format!(
            "parameters (p = {}, N = {}) do not match the solution (p = {}, N = {}) or the measure",
            params.p,
            params.n,
            u.p,
            u.dim()
        )));
    }
    check_base_cylinder(u, params.p, y, s, rho, theta)?;
    let drt = delta_rho_theta(params.p, rho, theta);
    let mut states = Vec::new();
    let mut l = 0.0;
    let mut delta_prev = 2.0 * drt;
    let mut converged = false;
    for j in 0..settings.j_max {
        let st = next_level(u, mu_plus, params, settings, y, s, rho, j, l, delta_prev)?;
        l += st.delta_j;
        delta_prev = st.delta_j;
        states.push(st);
        if delta_prev < settings.term_tolerance * (l + drt + 1.0) {
            converged = true;
            break;
        }
    }
    let tail = states.last().map_or(0.0, |s| s.delta_j);
    let average_term = cylinder_average_power(u, y, s, rho, theta, params.lambda, params.p, Sign::Plus)?;
    let dp_sum = states.iter().map(|s| s.dp_j).sum();
    Ok(IterationResult {
        l_inf: l + tail,
        tail,
        converged,
        hit_j_max: !converged && settings.j_max > 0,
        delta_rho_theta: drt,
        corollary: CorollaryComponents { two_delta_rho_theta: 2.0 * drt, average_term, dp_sum },
        states,
    })
}

/// Exact checks of the nesting properties along a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    /// `Q_j ⊂ ½Q_{j-1}` (and `Q_0 ⊂ Q_{ρ,θ}`).
    pub nested: bool,
    /// `Q_j ⊂ Q_{ρ_j, τ_j ρ_j^p}`.
    pub inside_potential_cylinder: bool,
    pub halving: bool,
    /// Largest `|A_j(δ_j) - ϰ| / ϰ` over root steps.
    pub worst_root_defect: f64,
}

impl TraceCheck {
    pub fn passes(&self, root_tol: f64) -> bool {
        self.nested && self.inside_potential_cylinder && self.halving && self.worst_root_defect <= root_tol
    }
}

pub fn check_trace(r: &IterationResult, params: &PotentialParams, theta: f64) -> TraceCheck {
    let p = params.p;
    let eps = eps_p(p).unwrap_or(1.0);
    let rel = 1e-12;
    let mut c = TraceCheck { nested: true, inside_potential_cylinder: true, halving: true, worst_root_defect: 0.0 };
    let mut prev_h = theta / 0.25; // so that the first test reads Q_0 ⊂ Q_{ρ,θ}
    let mut prev_delta = 2.0 * r.delta_rho_theta;
    for st in &r.states {
        if st.delta_j < 0.5 * prev_delta * (1.0 - rel) {
            c.halving = false;
        }
        if st.delta_j > 0.0 {
            let h = intrinsic_halfheight(p, st.rho_j, st.delta_j);
            if h > 0.25 * prev_h * (1.0 + rel) {
                c.nested = false;
            }
            if st.tau_j.is_finite() && eps * st.delta_j.powf(2.0 - p) > st.tau_j * (1.0 + rel) {
                c.inside_potential_cylinder = false;
            }
            prev_h = h;
        }
        if st.branch == Branch::Root {
            c.worst_root_defect = c.worst_root_defect.max((st.a_j - params.kappa).abs() / params.kappa);
        }
        prev_delta = st.delta_j;
    }
    c
}

/// Per-step trace, header `j,rho_j,tau_j,ihat,delta_hat,delta_j,l_j,A_j,branch`.
pub fn write_trace_csv<W: Write>(out: W, r: &IterationResult) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "rho_j", "tau_j", "ihat", "delta_hat", "delta_j", "l_j", "A_j", "branch"])?;
    for s in &r.states {
        w.write_record([
            s.j.to_string(),
            format!("{:e}", s.rho_j),
            format!("{:e}", s.tau_j),
            format!("{:e}", s.ihat),
            format!("{:e}", s.delta_hat),
            format!("{:e}", s.delta_j),
            format!("{:e}", s.l_j),
            format!("{:e}", s.a_j),
            s.branch.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Both sides of the pointwise estimate at `(y, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub lhs: f64,
    pub eps_term: f64,
    pub average_term: f64,
    pub potential_term: f64,
    /// `lhs / (eps_term + average_term + potential_term)`, 0 when both vanish.
    pub ratio: f64,
    pub lebesgue_ok: bool,
}

/// Pointwise check pairing `u_±` with `μ_±`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_check(
    u: &GridSolution,
    mu: &SignedMeasure,
    y: &[f64],
    s: f64,
    rho: f64,
    theta: f64,
    params: &PotentialParams,
    sign: Sign,
) -> Result<TheoremReport> {
    theorem_check_paired(u, mu, y, s, rho, theta, params, sign, sign)
}

/// As [`theorem_check`] with the measure part chosen independently.
#[allow(clippy::too_many_arguments)]
pub fn theorem_check_paired(
    u: &GridSolution,
    mu: &SignedMeasure,
    y: &[f64],
    s: f64,
    rho: f64,
    theta: f64,
    params: &PotentialParams,
    u_sign: Sign,
    mu_sign: Sign,
) -> Result<TheoremReport> {
    params.validate()?;
    check_base_cylinder(u, params.p, y, s, rho, theta)?;
    let part = move |v: f64| match u_sign {
        Sign::Plus => v.max(0.0),
        Sign::Minus => (-v).max(0.0),
    };
    let rhos: Vec<f64> = (3..7).map(|k| rho * 0.5f64.powi(k)).collect();
    let lp: LebesguePoint = lebesgue_point_value(u, y, s, &rhos, &part)?;
    let eps_term = eps_rho_theta(params.p, rho, theta);
    let average_term = cylinder_average_power(u, y, s, rho, theta, params.lambda, params.p, u_sign)?;
    let potential_term = parabolic_potential(params, mu.part(mu_sign), y, s, rho)?.value;
    let denom = eps_term + average_term + potential_term;
    let lhs = lp.value.max(0.0);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / denom };
    Ok(TheoremReport { lhs, eps_term, average_term, potential_term, ratio, lebesgue_ok: lp.is_lebesgue })
}

#[cfg(test)]
mod tests;
