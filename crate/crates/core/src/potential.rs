//! The parabolic Wolff potential `P_p^μ(x0,t0;ρ) = Σ_j D_p(2^{-j}ρ)`, the
//! elliptic Wolff potential, the `p = 2` Riesz integral and the auxiliary
//! upper-bound sum.
//!
//! `D_p(ρ) = inf_{τ>0} { i_p(τ) + ρ^{-N} μ(Q_{ρ,τρ^p}) / (2(p-1)^{p-1}) }`.
//! The objective is a nonincreasing function of `τ` plus a nondecreasing
//! one, so a fine logarithmic scan locates the global minimum; it is then
//! polished by golden-section search. For a time-independent measure
//! `ν ⊗ dt` the minimiser is explicit:
//!
//! ```text
//! A  = ρ^{p-N} ν(B_ρ) / (p-1)^{p-1}
//! τ* = A^{-(p-2)/(p-1)}
//! D_p(ρ) = (ρ^{p-N} ν(B_ρ))^{1/(p-1)}
//! ```
//!
//! (Beware: the exponent of the minimiser is negative. Writing it with a
//! positive exponent gives the right value for `D_p` only by accident of
//! algebra; the stationarity condition fixes the sign.)

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{CylinderProfile, MeasureError, SignedMeasure, SpaceTimeMeasure, SpatialMeasure};
use crate::quad;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("tau must be positive, got {0}")]
    InvalidTau(f64),
    #[error("tau scan bracket exhausted at rho = {rho:e}: minimum keeps sitting on the {edge} edge")]
    BracketExhausted { rho: f64, edge: &'static str },
    #[error("integral diverges: last dyadic shell carries {ratio:e} of the total")]
    Divergent { ratio: f64 },
    #[error("empty sample grid")]
    EmptySample,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub type Result<T> = std::result::Result<T, PotentialError>;

/// Logarithmic τ grid for the inner infimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauScan {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points_per_decade: usize,
}

impl Default for TauScan {
    fn default() -> Self {
        Self { tau_min: 1e-9, tau_max: 1e9, points_per_decade: 64 }
    }
}

/// Structural parameters `(p, N, λ, ϰ, m)` plus evaluator tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub p: f64,
    pub n: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub m: f64,
    pub tau_scan: TauScan,
    pub dyadic_max_terms: usize,
    pub term_tolerance: f64,
}

impl PotentialParams {
    /// Defaults: `λ = ½ min(1/(p-1), 1/N)`, `ϰ = 0.1`, `m = 2p`.
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(PotentialError::InvalidParam(format!("p must be >= 2, got {p}")));
        }
        if n == 0 {
            return Err(PotentialError::InvalidParam("N must be positive".into()));
        }
        let params = Self {
            p,
            n,
            lambda: 0.5 * lambda_max(p, n),
            kappa: 0.1,
            m: 2.0 * p,
            tau_scan: TauScan::default(),
            dyadic_max_terms: 48,
            term_tolerance: 1e-10,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PotentialError::InvalidParam(m));
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return bad(format!("p must be >= 2, got {}", self.p));
        }
        if self.n == 0 {
            return bad("N must be positive".into());
        }
        let lmax = lambda_max(self.p, self.n);
        if !(self.lambda > 0.0 && self.lambda <= lmax * (1.0 + 1e-15)) {
            return bad(format!("lambda must lie in (0, {lmax}], got {}", self.lambda));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa must lie in (0,1), got {}", self.kappa));
        }
        if !(self.m >= 2.0 * self.p && self.m.is_finite()) {
            return bad(format!("m must be >= 2p, got {}", self.m));
        }
        let s = &self.tau_scan;
        if !(s.tau_min > 0.0 && s.tau_max > s.tau_min && s.tau_max.is_finite() && s.points_per_decade >= 2) {
            return bad("tau_scan needs 0 < tau_min < tau_max < inf and >= 2 points per decade".into());
        }
        if self.dyadic_max_terms == 0 {
            return bad("dyadic_max_terms must be positive".into());
        }
        if !(self.term_tolerance > 0.0 && self.term_tolerance < 1.0) {
            return bad(format!("term_tolerance must lie in (0,1), got {}", self.term_tolerance));
        }
        Ok(())
    }

    /// Coefficient `1 / (2 (p-1)^{p-1})` of the mass term.
    pub fn mass_coefficient(&self) -> f64 {
        mass_coefficient(self.p)
    }
}

/// Upper end of the admissible λ range, `min(1/(p-1), 1/N)`.
pub fn lambda_max(p: f64, n: usize) -> f64 {
    (1.0 / (p - 1.0)).min(1.0 / n as f64)
}

pub(crate) fn mass_coefficient(p: f64) -> f64 {
    0.5 / (p - 1.0).powf(p - 1.0)
}

/// `i_p(τ)`: `(p-2) τ^{-1/(p-2)}` for `p > 2`; for `p = 2` it is `+∞` on
/// `(0,1)` and `0` on `[1,∞)`.
pub fn i_p(p: f64, tau: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(PotentialError::InvalidParam(format!("p must be >= 2, got {p}")));
    }
    if !(tau > 0.0) {
        return Err(PotentialError::InvalidTau(tau));
    }
    Ok(i_p_unchecked(p, tau))
}

pub(crate) fn i_p_unchecked(p: f64, tau: f64) -> f64 {
    if p == 2.0 {
        if tau < 1.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else if tau == f64::INFINITY {
        0.0
    } else {
        (p - 2.0) * tau.powf(-1.0 / (p - 2.0))
    }
}

/// `ε_p = (p-2)^{p-2}`, with `ε_2 = 1`.
pub fn eps_p(p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(PotentialError::InvalidParam(format!("p must be >= 2, got {p}")));
    }
    Ok(if p == 2.0 { 1.0 } else { (p - 2.0).powf(p - 2.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpResult {
    pub value: f64,
    /// Largest minimiser, `+∞` when the infimum is only approached.
    pub tau_star: f64,
    pub ip_part: f64,
    pub mass_part: f64,
}

fn check_radius(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(PotentialError::InvalidRadius(rho))
    }
}

/// `D_p(ρ)` at `(x0, t0)`.
pub fn dp(params: &PotentialParams, mu: &SpaceTimeMeasure, x0: &[f64], t0: f64, rho: f64) -> Result<DpResult> {
    check_radius(rho)?;
    let prof = mu.profile(x0, t0, rho)?;
    dp_from_profile(params, &prof, rho)
}

/// `D_p` for a precomputed cylinder profile at radius `ρ`.
pub fn dp_from_profile(params: &PotentialParams, prof: &CylinderProfile, rho: f64) -> Result<DpResult> {
    let p = params.p;
    let c = params.mass_coefficient();
    let rho_n = rho.powi(params.n as i32);
    let rho_p = rho.powf(p);
    let mass_term = |tau: f64| c * prof.mass(tau * rho_p) / rho_n;

    if p == 2.0 {
        // i_2 = ∞ below 1 and the mass term is nondecreasing: minimum at τ = 1
        let m = mass_term(1.0);
        return Ok(DpResult { value: m, tau_star: 1.0, ip_part: 0.0, mass_part: m });
    }
    if prof.is_zero() {
        return Ok(DpResult { value: 0.0, tau_star: f64::INFINITY, ip_part: 0.0, mass_part: 0.0 });
    }

    let f = |tau: f64| i_p_unchecked(p, tau) + mass_term(tau);
    let scan = &params.tau_scan;
    let ppd = scan.points_per_decade as f64;

    // Jumps and kinks of the mass profile, as τ values.
    let breaks: Vec<f64> = prof
        .breakpoints()
        .into_iter()
        .map(|s| s / rho_p)
        .filter(|t| *t > 0.0 && t.is_finite())
        .collect();

    let mut lo = scan.tau_min.log10();
    let mut hi = scan.tau_max.log10();
    if let (Some(first), Some(last)) = (breaks.first(), breaks.last()) {
        lo = lo.min(first.log10() - 1.0);
        hi = hi.max(last.log10() + 1.0);
    }
    const LIMIT: f64 = 300.0;
    const EXTEND: f64 = 8.0;
    lo = lo.max(-LIMIT);
    hi = hi.min(LIMIT);

    let mut samples: Vec<(f64, f64)> = Vec::new();
    let push_range = |samples: &mut Vec<(f64, f64)>, a: f64, b: f64| {
        let n = ((b - a) * ppd).ceil().max(1.0) as usize;
        for i in 0..=n {
            let tau = 10f64.powf(a + (b - a) * i as f64 / n as f64);
            samples.push((tau, f(tau)));
        }
    };
    push_range(&mut samples, lo, hi);
    let finite_total = prof.rate() == 0.0;
    loop {
        let (imin, _) = argmin(&samples);
        let tau_lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let tau_hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
        let at_lo = samples[imin].0 <= tau_lo;
        let at_hi = samples[imin].0 >= tau_hi;
        if at_lo {
            if lo <= -LIMIT {
                return Err(PotentialError::BracketExhausted { rho, edge: "lower" });
            }
            let new_lo = (lo - EXTEND).max(-LIMIT);
            push_range(&mut samples, new_lo, lo);
            lo = new_lo;
        } else if at_hi && !finite_total {
            if hi >= LIMIT {
                return Err(PotentialError::BracketExhausted { rho, edge: "upper" });
            }
            let new_hi = (hi + EXTEND).min(LIMIT);
            push_range(&mut samples, hi, new_hi);
            hi = new_hi;
        } else {
            break;
        }
    }
    samples.extend(breaks.iter().map(|&t| (t, f(t))));
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);

    let (_, best) = argmin(&samples);
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..samples.len() {
        let (t, v) = samples[i];
        let left = if i > 0 { samples[i - 1].1 } else { f64::INFINITY };
        let right = if i + 1 < samples.len() { samples[i + 1].1 } else { f64::INFINITY };
        if v <= left && v <= right && v <= best * 1.01 {
            if i > 0 && i + 1 < samples.len() {
                let a = samples[i - 1].0.ln();
                let b = samples[i + 1].0.ln();
                let (x, fx) = quad::golden_section(|x| f(x.exp()), a, b, 1e-13, 200);
                if fx < v {
                    candidates.push((x.exp(), fx));
                }
            }
            candidates.push((t, v));
        }
    }
    if finite_total {
        let total = prof.total();
        candidates.push((f64::INFINITY, c * total / rho_n));
    }
    let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    // i_p is strictly decreasing for p > 2, so only rounding-level ties exist
    let tol = 16.0 * f64::EPSILON * min.abs();
    let (tau_star, value) = candidates
        .iter()
        .filter(|c| c.1 <= min + tol)
        .copied()
        .fold((0.0, min), |acc, c| if c.0 > acc.0 { c } else { acc });
    let ip_part = i_p_unchecked(p, tau_star);
    Ok(DpResult { value, tau_star, ip_part, mass_part: value - ip_part })
}

fn argmin(s: &[(f64, f64)]) -> (usize, f64) {
    s.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &(_, v))| if v < acc.1 { (i, v) } else { acc })
}

/// Dyadic sum with its truncation bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialResult {
    pub value: f64,
    pub per_scale: Vec<(f64, DpResult)>,
    pub truncated_at: usize,
    pub tail_estimate: f64,
}

/// Sums `term(j, ρ_j)` over `j = 0, 1, …` until a term drops below
/// `term_tolerance · sum` or `dyadic_max_terms` terms are taken.
fn dyadic_sum<T>(
    params: &PotentialParams,
    rho: f64,
    mut term: impl FnMut(f64) -> Result<(f64, T)>,
) -> Result<(f64, Vec<(f64, T)>, usize, f64)> {
    check_radius(rho)?;
    let mut sum = 0.0;
    let mut terms = Vec::new();
    let mut last = 0.0;
    for j in 0..params.dyadic_max_terms {
        let rho_j = rho * 0.5f64.powi(j as i32);
        let (v, extra) = term(rho_j)?;
        sum += v;
        last = v;
        terms.push((rho_j, extra));
        if v <= params.term_tolerance * sum {
            break;
        }
    }
    let truncated_at = terms.len() - 1;
    Ok((sum, terms, truncated_at, last * params.dyadic_max_terms as f64))
}

/// `P_p^μ(x0, t0; ρ)`.
pub fn parabolic_potential(
    params: &PotentialParams,
    mu: &SpaceTimeMeasure,
    x0: &[f64],
    t0: f64,
    rho: f64,
) -> Result<PotentialResult> {
    let (value, per_scale, truncated_at, tail_estimate) = dyadic_sum(params, rho, |r| {
        let d = dp(params, mu, x0, t0, r)?;
        Ok((d.value, d))
    })?;
    Ok(PotentialResult { value, per_scale, truncated_at, tail_estimate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSum {
    pub value: f64,
    /// `(ρ_j, term_j)`.
    pub terms: Vec<(f64, f64)>,
    pub truncated_at: usize,
    pub tail_estimate: f64,
}

/// Truncated elliptic Wolff potential
/// `Σ_j (ν(B_{ρ_j}(x0)) / ρ_j^{N-βp})^{1/(p-1)}`, with `p` and the
/// truncation taken from `params`.
pub fn wolff_potential(
    params: &PotentialParams,
    nu: &SpatialMeasure,
    x0: &[f64],
    rho: f64,
    beta: f64,
) -> Result<DyadicSum> {
    let p = params.p;
    let n = nu.dim() as f64;
    if !beta.is_finite() {
        return Err(PotentialError::InvalidParam(format!("beta must be finite, got {beta}")));
    }
    let (value, terms, truncated_at, tail_estimate) = dyadic_sum(params, rho, |r| {
        let mass = nu.ball_mass(x0, r)?;
        let t = (mass * r.powf(beta * p - n)).powf(1.0 / (p - 1.0));
        Ok((t, t))
    })?;
    Ok(DyadicSum { value, terms, truncated_at, tail_estimate })
}

/// `∫_{r 2^{-J}}^{r} ρ^{-N} μ(Q_{ρ,ρ²}) dρ/ρ` with `J = dyadic_max_terms`,
/// integrated in `ln ρ` with `steps` Gauss-Legendre nodes per dyadic shell.
/// Reports divergence when the innermost shell still carries more than
/// `1e-8` of the total.
pub fn riesz_integral(
    params: &PotentialParams,
    mu: &SpaceTimeMeasure,
    x0: &[f64],
    t0: f64,
    r: f64,
    steps: usize,
) -> Result<f64> {
    check_radius(r)?;
    let n = mu.dim() as i32;
    let rule = quad::UnitRule::new(steps.max(2));
    let g = |rho: f64| -> Result<f64> {
        let prof = mu.profile(x0, t0, rho)?;
        Ok(prof.mass(rho * rho) / rho.powi(n))
    };
    let mut total = 0.0;
    let mut last = 0.0;
    for j in 0..params.dyadic_max_terms {
        let hi = (r * 0.5f64.powi(j as i32)).ln();
        let lo = hi - std::f64::consts::LN_2;
        let mut shell = 0.0;
        for (s, w) in rule.mapped(lo, hi) {
            shell += w * g(s.exp())?;
        }
        total += shell;
        last = shell;
    }
    if total > 0.0 && last > 1e-8 * total {
        return Err(PotentialError::Divergent { ratio: last / total });
    }
    Ok(total)
}

/// `τ(ρ) = (ρ^{-N} μ(Q_{ρ,ρ^p}))^{-(p-2)/(p-1)}`; `+∞` for zero mass.
/// For `p = 2` the exponent vanishes and `τ ≡ 1`.
pub fn tau_heuristic(params: &PotentialParams, mu: &SpaceTimeMeasure, x0: &[f64], t0: f64, rho: f64) -> Result<f64> {
    check_radius(rho)?;
    let p = params.p;
    if p == 2.0 {
        return Ok(1.0);
    }
    let prof = mu.profile(x0, t0, rho)?;
    let normalized = prof.mass(rho.powf(p)) / rho.powi(params.n as i32);
    if normalized == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(normalized.powf(-(p - 2.0) / (p - 1.0)))
}

/// `Σ_j [(ρ_j^{-N} μ(Q_{ρ_j,ρ_j^p}))^{1/(p-1)} + ρ_j^{-N} μ(Q_{ρ_j,τ(ρ_j)ρ_j^p})]`.
pub fn upper_bound_sum(params: &PotentialParams, mu: &SpaceTimeMeasure, x0: &[f64], t0: f64, rho: f64) -> Result<DyadicSum> {
    let p = params.p;
    let n = params.n as i32;
    let (value, terms, truncated_at, tail_estimate) = dyadic_sum(params, rho, |r| {
        let prof = mu.profile(x0, t0, r)?;
        let rp = r.powf(p);
        let rn = r.powi(n);
        let normalized = prof.mass(rp) / rn;
        let tau = if p == 2.0 {
            1.0
        } else if normalized == 0.0 {
            f64::INFINITY
        } else {
            normalized.powf(-(p - 2.0) / (p - 1.0))
        };
        let tall = if tau.is_infinite() { prof.total() } else { prof.mass(tau * rp) };
        let t = normalized.powf(1.0 / (p - 1.0)) + tall / rn;
        Ok((t, t))
    })?;
    Ok(DyadicSum { value, terms, truncated_at, tail_estimate })
}

/// Space-time box `[lo, hi] × [t_lo, t_hi]` sampled with `counts[k]`
/// points per spatial axis and `t_count` in time (endpoints included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub counts: Vec<usize>,
    pub t_count: usize,
}

impl SampleBox {
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        let coord = |a: f64, b: f64, n: usize, i: usize| {
            if n <= 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        };
        let total: usize = self.counts.iter().product::<usize>() * self.t_count;
        let mut out = Vec::with_capacity(total);
        if total == 0 {
            return out;
        }
        let mut idx = vec![0usize; self.counts.len()];
        for it in 0..self.t_count {
            let t = coord(self.t_lo, self.t_hi, self.t_count, it);
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                let x = (0..idx.len()).map(|k| coord(self.lo[k], self.hi[k], self.counts[k], idx[k])).collect();
                out.push((x, t));
                let mut k = idx.len();
                let done = loop {
                    if k == 0 {
                        break true;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < self.counts[k] {
                        break false;
                    }
                    idx[k] = 0;
                };
                if done {
                    break;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_t: f64,
    pub samples: usize,
}

/// `max` of `P_p^{|μ|}` over a sample grid, evaluated in parallel.
pub fn sup_potential(params: &PotentialParams, mu: &SignedMeasure, region: &SampleBox, rho: f64) -> Result<SupResult> {
    check_radius(rho)?;
    if region.lo.len() != mu.dim() || region.hi.len() != mu.dim() || region.counts.len() != mu.dim() {
        return Err(MeasureError::DimensionMismatch { expected: mu.dim(), found: region.lo.len() }.into());
    }
    let pts = region.points();
    if pts.is_empty() {
        return Err(PotentialError::EmptySample);
    }
    let abs = mu.abs();
    let values: Vec<f64> = pts
        .par_iter()
        .map(|(x, t)| parabolic_potential(params, &abs, x, *t, rho).map(|r| r.value))
        .collect::<Result<_>>()?;
    let (i, value) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(SupResult { value, argmax_x: pts[i].0.clone(), argmax_t: pts[i].1, samples: pts.len() })
}

/// JSON-friendly summary of one potential evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSummary {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub rho: f64,
    pub value: f64,
    pub truncated_at: usize,
    pub tail_estimate: f64,
}

impl PotentialSummary {
    pub fn new(x0: &[f64], t0: f64, rho: f64, r: &PotentialResult) -> Self {
        Self { x0: x0.to_vec(), t0, rho, value: r.value, truncated_at: r.truncated_at, tail_estimate: r.tail_estimate }
    }
}

/// CSV rows `x1..xN,t0,rho,j,rho_j,Dp_j,tau_j,partial_sum`.
pub fn write_potential_csv<W: Write>(
    out: W,
    rows: &[(Vec<f64>, f64, f64, PotentialResult)],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let dim = rows.first().map_or(0, |r| r.0.len());
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    header.extend(["t0", "rho", "j", "rho_j", "Dp_j", "tau_j", "partial_sum"].map(String::from));
    w.write_record(&header)?;
    for (x0, t0, rho, res) in rows {
        let mut partial = 0.0;
        for (j, (rho_j, d)) in res.per_scale.iter().enumerate() {
            partial += d.value;
            let mut rec: Vec<String> = x0.iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{t0:e}"));
            rec.push(format!("{rho:e}"));
            rec.push(j.to_string());
            rec.push(format!("{rho_j:e}"));
            rec.push(format!("{:e}", d.value));
            rec.push(if d.tau_star.is_infinite() { "inf".into() } else { format!("{:e}", d.tau_star) });
            rec.push(format!("{partial:e}"));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{SpaceTimeAtom, SpatialAtom};

    fn params(p: f64, n: usize) -> PotentialParams {
        PotentialParams::new(p, n).unwrap()
    }

    #[test]
    fn i_p_examples() {
        assert!((i_p(3.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(i_p(2.0, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(i_p(2.0, 1.0).unwrap(), 0.0);
        assert!((i_p(4.0, 0.25).unwrap() - 4.0).abs() < 1e-14);
        assert!(i_p(3.0, 0.0).is_err());
        assert!(i_p(3.0, -1.0).is_err());
    }

    #[test]
    fn eps_p_examples() {
        assert_eq!(eps_p(4.0).unwrap(), 4.0);
        assert_eq!(eps_p(2.0).unwrap(), 1.0);
        assert_eq!(eps_p(3.0).unwrap(), 1.0);
        assert!(eps_p(1.5).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = params(3.0, 2);
        assert!((p.lambda - 0.25).abs() < 1e-15);
        p.kappa = 1.0;
        assert!(p.validate().is_err());
        let mut p = params(3.0, 2);
        p.m = 5.0;
        assert!(p.validate().is_err());
        let mut p = params(3.0, 2);
        p.lambda = 0.6;
        assert!(p.validate().is_err());
        assert!(PotentialParams::new(1.9, 1).is_err());
    }

    #[test]
    fn dp_zero_measure() {
        let mu = SpaceTimeMeasure::zero(1);
        let d = dp(&params(3.0, 1), &mu, &[0.0], 0.0, 1.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.tau_star, f64::INFINITY);
        assert!(dp(&params(3.0, 1), &mu, &[0.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn dp_lebesgue_closed_form() {
        let mu = SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1));
        let d = dp(&params(3.0, 1), &mu, &[0.0], 0.0, 1.0).unwrap();
        assert!((d.value - 2f64.sqrt()).abs() < 1e-9 * 2f64.sqrt());
        // A = 2/4, tau* = A^{-1/2}
        assert!((d.tau_star - 2f64.sqrt()).abs() < 1e-6 * 2f64.sqrt(), "{}", d.tau_star);
    }

    #[test]
    fn dp_p2_is_half_normalized_mass() {
        let mu = SpaceTimeMeasure::atoms(
            2,
            vec![SpaceTimeAtom { position: vec![0.1, 0.0], time: 0.5, weight: 3.0 }],
        )
        .unwrap();
        let d = dp(&params(2.0, 2), &mu, &[0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(d.value, 1.5);
        assert_eq!(d.tau_star, 1.0);
    }

    #[test]
    fn dp_single_atom_is_attained_at_jump_or_infinity() {
        // Atom at time distance 1: f(τ) = i_p(τ) for τ ≤ 1, then + c·w.
        // With a heavy atom the infimum is i_p(1) = 1 at τ = 1.
        let mu = SpaceTimeMeasure::atoms(1, vec![SpaceTimeAtom { position: vec![0.0], time: 1.0, weight: 100.0 }])
            .unwrap();
        let d = dp(&params(3.0, 1), &mu, &[0.0], 0.0, 1.0).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12, "{d:?}");
        assert!((d.tau_star - 1.0).abs() < 1e-12);
        // A light atom: infimum c·w as τ → ∞.
        let light = mu.scaled(0.01);
        let d = dp(&params(3.0, 1), &light, &[0.0], 0.0, 1.0).unwrap();
        assert!((d.value - 0.125).abs() < 1e-12, "{d:?}");
        assert_eq!(d.tau_star, f64::INFINITY);
    }

    #[test]
    fn parabolic_potential_examples() {
        let p = params(2.0, 1);
        let leb = SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1));
        let r = parabolic_potential(&p, &leb, &[0.0], 0.0, 1.0).unwrap();
        assert!((r.value - 8.0 / 3.0).abs() < 1e-9, "{}", r.value);
        for (j, (rho_j, _)) in r.per_scale.iter().enumerate() {
            assert_eq!(*rho_j, 0.5f64.powi(j as i32));
        }

        let zero = parabolic_potential(&p, &SpaceTimeMeasure::zero(1), &[0.0], 0.0, 1.0).unwrap();
        assert_eq!(zero.value, 0.0);

        let p3 = params(3.0, 2);
        let pm = SpaceTimeMeasure::time_product(SpatialMeasure::point_mass(vec![0.0, 0.0], 1.0).unwrap());
        let r = parabolic_potential(&p3, &pm, &[0.0, 0.0], 0.0, 1.0).unwrap();
        let w = wolff_potential(&p3, &SpatialMeasure::point_mass(vec![0.0, 0.0], 1.0).unwrap(), &[0.0, 0.0], 1.0, 1.0)
            .unwrap();
        let geo = 1.0 / (1.0 - 0.5f64.sqrt());
        assert!((r.value - geo).abs() < 1e-5 * geo, "{}", r.value);
        assert!((r.value - w.value).abs() < 1e-8 * geo);
    }

    #[test]
    fn wolff_lebesgue_geometric() {
        let p = params(3.0, 1);
        let w = wolff_potential(&p, &SpatialMeasure::lebesgue(1), &[0.3], 1.0, 1.0).unwrap();
        let exact = 2f64.sqrt() / (1.0 - 2f64.powf(-1.5));
        assert!((w.value - exact).abs() < 1e-9 * exact);
        assert_eq!(wolff_potential(&p, &SpatialMeasure::zero(1), &[0.0], 1.0, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn riesz_examples() {
        let p = params(2.0, 1);
        let leb = SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1));
        let v = riesz_integral(&p, &leb, &[0.0], 0.0, 1.0, 8).unwrap();
        assert!((v - 2.0).abs() < 1e-4 * 2.0);
        assert_eq!(riesz_integral(&p, &SpaceTimeMeasure::zero(1), &[0.0], 0.0, 1.0, 8).unwrap(), 0.0);
        let atom =
            SpaceTimeMeasure::atoms(1, vec![SpaceTimeAtom { position: vec![0.0], time: 0.0, weight: 1.0 }]).unwrap();
        assert!(matches!(
            riesz_integral(&p, &atom, &[0.0], 0.0, 1.0, 8),
            Err(PotentialError::Divergent { .. })
        ));
    }

    #[test]
    fn tau_heuristic_examples() {
        let p3 = params(3.0, 1);
        // normalized mass: ρ^{-1}·ν(B_1)·2ρ^3 with density d → 4d; choose d = 1 → 4
        let leb = SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1));
        assert!((tau_heuristic(&p3, &leb, &[0.0], 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let quarter = SpaceTimeMeasure::time_product(SpatialMeasure::uniform(1, 0.25).unwrap());
        assert!((tau_heuristic(&p3, &quarter, &[0.0], 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(tau_heuristic(&p3, &SpaceTimeMeasure::zero(1), &[0.0], 0.0, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn upper_bound_p2_is_four_dp() {
        let p = params(2.0, 2);
        let mu = SpaceTimeMeasure::time_product(SpatialMeasure::uniform(2, 1.7).unwrap());
        let ub = upper_bound_sum(&p, &mu, &[0.0, 0.0], 0.0, 1.0).unwrap();
        let pp = parabolic_potential(&p, &mu, &[0.0, 0.0], 0.0, 1.0).unwrap();
        for ((_, t), (_, d)) in ub.terms.iter().zip(&pp.per_scale) {
            assert!((t - 4.0 * d.value).abs() <= 1e-14 * t);
        }
        assert_eq!(upper_bound_sum(&p, &SpaceTimeMeasure::zero(2), &[0.0, 0.0], 0.0, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn sup_potential_translation_invariant() {
        let p = params(3.0, 1);
        let mu = SignedMeasure::positive(SpaceTimeMeasure::time_product(SpatialMeasure::lebesgue(1)));
        let region = SampleBox { lo: vec![-1.0], hi: vec![1.0], t_lo: 0.0, t_hi: 1.0, counts: vec![3], t_count: 2 };
        let s = sup_potential(&p, &mu, &region, 0.5).unwrap();
        let single = parabolic_potential(&p, &mu.plus, &[0.0], 0.0, 0.5).unwrap().value;
        assert!((s.value - single).abs() < 1e-12 * single);
        assert_eq!(s.samples, 6);
        let empty = SampleBox { counts: vec![0], ..region.clone() };
        assert!(matches!(sup_potential(&p, &mu, &empty, 0.5), Err(PotentialError::EmptySample)));
        let zero = sup_potential(&p, &SignedMeasure::zero(1), &region, 0.5).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn sup_potential_away_from_atom_is_finite() {
        let p = params(3.0, 1);
        let atom = SpaceTimeMeasure::atoms(1, vec![SpaceTimeAtom { position: vec![5.0], time: 0.0, weight: 1.0 }])
            .unwrap();
        let region = SampleBox { lo: vec![-1.0], hi: vec![1.0], t_lo: 0.0, t_hi: 1.0, counts: vec![5], t_count: 3 };
        let s = sup_potential(&p, &SignedMeasure::positive(atom), &region, 0.5).unwrap();
        assert!(s.value.is_finite());
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn csv_rows() {
        let p = params(3.0, 1);
        let mu = SpaceTimeMeasure::time_product(SpatialMeasure::atoms(1, vec![SpatialAtom { position: vec![0.0], weight: 1.0 }]).unwrap());
        let r = parabolic_potential(&p, &mu, &[0.0], 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_potential_csv(&mut buf, &[(vec![0.0], 0.0, 1.0, r.clone())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,t0,rho,j,rho_j,Dp_j,tau_j,partial_sum\n"));
        assert_eq!(text.lines().count(), r.per_scale.len() + 1);
    }
}
