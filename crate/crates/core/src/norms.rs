//! Decreasing rearrangements, Lorentz and mixed Lebesgue norms of gridded
//! densities, and explicit upper bounds for `D_p` and `P_p` in terms of them.
//!
//! # Constants in the bounds
//!
//! With `a = 1 - 1/r`, `c = 1/(2(p-1)^{p-1})` and
//! `α = 1/(p - 1 - (p-2)/r)`, any mass bound `ρ^{-N} μ(Q_{ρ,τρ^p}) ≤ K τ^a`
//! gives, after minimising `i_p(τ) + c K τ^a` over `τ`,
//!
//! ```text
//! D_p(ρ) ≤ (p - 2 + 1/a) (a c K)^α        (p > 2, a > 0)
//! D_p(ρ) ≤ c K                            (p = 2, or a = 0)
//! ```
//!
//! Hölder's inequality in space and time gives, for `μ ∈ L^r_t(L^q_x)`,
//! `K = ω_N^{1-1/q} 2^{1-1/r} ρ^{p-p/r-N/q} ‖μ‖_{q,r}`; summing over
//! dyadic radii when `e = p - p/r - N/q > 0` adds a factor `1/(1-2^{-eα})`.
//!
//! For the Lorentz variant put `h(x) = ‖μ(x,·)‖_{L^{r,∞}_t}`. Then
//! `K = 2^{1-1/r} ω_N ρ^{p-p/r} h**(ω_N ρ^N)`, and comparing each dyadic
//! term with the integral over its shell gives
//! `P_p ≤ γ_D 2^{βα}/ln 2 · ∫_0^ρ K(s)^α ds/s` with `β = p - p/r` and
//! `γ_D` the `D_p` constant above.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axes::{Axis, CellAxes, SpaceTimeAxes};
use crate::geometry::unit_ball_volume;
use crate::measure::{GridDensity, MeasureError, SpaceTimeMeasure};
use crate::potential::{mass_coefficient, PotentialParams};
use crate::quad;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("non-finite grid value")]
    NonFinite,
    #[error("grid has {found} values, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub type Result<T> = std::result::Result<T, NormError>;

/// Piecewise-constant function on a space-time cell grid (time slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub axes: SpaceTimeAxes,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(axes: SpaceTimeAxes, values: Vec<f64>) -> Result<Self> {
        if values.len() != axes.len() {
            return Err(NormError::Shape { expected: axes.len(), found: values.len() });
        }
        if !axes.is_valid() {
            return Err(NormError::InvalidExponent("grid spacings must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NormError::NonFinite);
        }
        Ok(Self { axes, values })
    }

    /// Purely spatial function: a single unit time cell.
    pub fn spatial(space: CellAxes, values: Vec<f64>) -> Result<Self> {
        Self::new(SpaceTimeAxes::new(space, Axis::new(0.0, 1.0, 1)), values)
    }

    pub fn from_fn(axes: SpaceTimeAxes, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let ns = axes.space.cell_count();
        let mut values = Vec::with_capacity(axes.len());
        let mut idx = vec![0; axes.dim()];
        let mut x = vec![0.0; axes.dim()];
        for it in 0..axes.time.count {
            let t = 0.5 * (axes.time.lo(it) + axes.time.hi(it));
            for flat in 0..ns {
                axes.space.unflatten(flat, &mut idx);
                for (k, ax) in axes.space.axes.iter().enumerate() {
                    x[k] = 0.5 * (ax.lo(idx[k]) + ax.hi(idx[k]));
                }
                values.push(f(&x, t));
            }
        }
        Self::new(axes, values)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.space.cell_volume() * self.axes.time.spacing
    }

    /// `|f|` as a space-time measure with density.
    pub fn to_measure(&self) -> Result<SpaceTimeMeasure> {
        let g = GridDensity::new(self.axes.clone(), self.values.iter().map(|v| v.abs()).collect())?;
        Ok(SpaceTimeMeasure::grid(g))
    }
}

/// Step representation of `f*`: `f*(s) = values[k]` on
/// `[breakpoints[k-1], breakpoints[k])` (with `breakpoints[-1] = 0`) and
/// `0` beyond the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rearrangement {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫|f| = ∫ f*`.
    pub total_mass: f64,
    /// `∫_0^{breakpoints[k]} f*`.
    cumulative: Vec<f64>,
}

impl Rearrangement {
    /// Rearrangement of `|v_i|` on cells of measure `w_i`.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .zip(weights)
            .map(|(v, w)| (v.abs(), *w))
            .filter(|(v, w)| *v > 0.0 && *w > 0.0)
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut breakpoints = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut cumulative = Vec::new();
        let mut s = 0.0;
        let mut c = 0.0;
        for (v, w) in pairs {
            s += w;
            c += v * w;
            if vals.last() == Some(&v) {
                *breakpoints.last_mut().unwrap() = s;
                *cumulative.last_mut().unwrap() = c;
            } else {
                vals.push(v);
                breakpoints.push(s);
                cumulative.push(c);
            }
        }
        Self { breakpoints, values: vals, total_mass: c, cumulative }
    }

    /// Measure of the support of `f`.
    pub fn support(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn f_star(&self, s: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= s);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `|{f* > t}|`, which equals `|{|f| > t}|`.
    pub fn distribution(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v > t);
        if k == 0 {
            0.0
        } else {
            self.breakpoints[k - 1]
        }
    }

    /// `∫_0^s f*`.
    pub fn integral_to(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&b| b <= s);
        if k >= self.values.len() {
            return self.total_mass;
        }
        let (s0, c0) = if k == 0 { (0.0, 0.0) } else { (self.breakpoints[k - 1], self.cumulative[k - 1]) };
        c0 + self.values[k] * (s - s0)
    }

    /// Segments `(s_lo, s_hi, v, d)` on which `f**(s) = v + d/s`; the last
    /// one is the tail `(S, ∞, 0, total)`.
    fn segments(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut s0 = 0.0;
        let mut c0 = 0.0;
        for k in 0..self.values.len() {
            let v = self.values[k];
            out.push((s0, self.breakpoints[k], v, (c0 - v * s0).max(0.0)));
            s0 = self.breakpoints[k];
            c0 = self.cumulative[k];
        }
        out.push((s0, f64::INFINITY, 0.0, self.total_mass));
        out
    }
}

pub fn rearrange(f: &GridFunction) -> Rearrangement {
    let w = f.cell_volume();
    Rearrangement::from_weighted(&f.values, &vec![w; f.values.len()])
}

/// `f**(s) = (1/s) ∫_0^s f*`.
pub fn double_star(r: &Rearrangement, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(NormError::NonPositive(s));
    }
    Ok(r.integral_to(s) / s)
}

fn check_lorentz(q: f64, alpha: f64) -> Result<()> {
    if !(q > 0.0) || !(alpha > 0.0) {
        return Err(NormError::InvalidExponent(format!("need 0 < q, alpha <= inf (q = {q}, alpha = {alpha})")));
    }
    Ok(())
}

/// `‖f‖_{q,α}` built on `f**`. Divergent integrals come back as `+∞`.
pub fn lorentz_norm(f: &GridFunction, q: f64, alpha: f64) -> Result<f64> {
    check_lorentz(q, alpha)?;
    lorentz_norm_of(&rearrange(f), q, alpha)
}

pub fn lorentz_norm_of(r: &Rearrangement, q: f64, alpha: f64) -> Result<f64> {
    check_lorentz(q, alpha)?;
    if r.is_zero() {
        return Ok(0.0);
    }
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let segs = r.segments();
    if alpha.is_infinite() {
        // sup of φ(s) = v s^{1/q} + d s^{1/q - 1} over each segment
        let mut best: f64 = 0.0;
        for &(a, b, v, d) in &segs {
            let phi = |s: f64| v * s.powf(iq) + d * s.powf(iq - 1.0);
            if b.is_infinite() {
                // tail d s^{1/q-1}
                let val = if iq > 1.0 {
                    f64::INFINITY
                } else if iq == 1.0 {
                    d
                } else {
                    phi(a)
                };
                best = best.max(val);
                continue;
            }
            if a == 0.0 {
                // constant first segment: v s^{1/q}, largest at b (or v when q = ∞)
                best = best.max(if iq == 0.0 { v } else { v * b.powf(iq) });
                continue;
            }
            best = best.max(phi(a)).max(phi(b));
            if iq > 0.0 && iq < 1.0 && v > 0.0 {
                let s_star = d * (q - 1.0) / v;
                if s_star > a && s_star < b {
                    best = best.max(phi(s_star));
                }
            }
        }
        return Ok(best);
    }

    let mut total = 0.0;
    for &(a, b, v, d) in &segs {
        let piece = if b.is_infinite() {
            // ∫_S^∞ d^α s^{α/q - α - 1} ds
            let e = alpha * iq - alpha;
            if d == 0.0 {
                0.0
            } else if e >= 0.0 {
                f64::INFINITY
            } else {
                d.powf(alpha) * a.powf(e) / -e
            }
        } else if a == 0.0 {
            // ∫_0^b v^α s^{α/q - 1} ds
            if iq == 0.0 {
                f64::INFINITY
            } else {
                v.powf(alpha) * b.powf(alpha * iq) / (alpha * iq)
            }
        } else if d == 0.0 {
            let e = alpha * iq;
            if e == 0.0 {
                v.powf(alpha) * (b / a).ln()
            } else {
                v.powf(alpha) * (b.powf(e) - a.powf(e)) / e
            }
        } else if alpha == 1.0 {
            let vpart = if iq == 0.0 { v * (b / a).ln() } else { v * (b.powf(iq) - a.powf(iq)) / iq };
            let dpart = if iq == 1.0 {
                d * (b / a).ln()
            } else {
                d * (b.powf(iq - 1.0) - a.powf(iq - 1.0)) / (iq - 1.0)
            };
            vpart + dpart
        } else {
            // smooth integrand on [a, b] with a > 0: integrate in ln s
            let g = |x: f64| {
                let s = x.exp();
                (s.powf(iq) * (v + d / s)).powf(alpha)
            };
            let scale = g(a.ln()).max(g(b.ln())) * (b / a).ln();
            quad::adaptive(g, a.ln(), b.ln(), 1e-15 * scale, 1e-14, 40)
        };
        total += piece;
        if total.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total.powf(1.0 / alpha))
}

/// Which group of axes an exponent acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormAxis {
    Space,
    Time,
}

fn lp(values: impl Iterator<Item = f64>, weight: f64, exp: f64) -> f64 {
    if exp.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (values.map(|v| v.abs().powf(exp)).sum::<f64>() * weight).powf(1.0 / exp)
    }
}

/// Nested norm: the inner exponent over one axis group per slice, then the
/// outer exponent across slices. `(q, Space), (r, Time)` is `L^r_t(L^q_x)`.
pub fn mixed_norm(f: &GridFunction, inner: (f64, NormAxis), outer: (f64, NormAxis)) -> Result<f64> {
    for e in [inner.0, outer.0] {
        if !(e >= 1.0) {
            return Err(NormError::InvalidExponent(format!("mixed norm exponents must be >= 1, got {e}")));
        }
    }
    if inner.1 == outer.1 {
        return Err(NormError::InvalidExponent("inner and outer axes must differ".into()));
    }
    let ns = f.axes.space.cell_count();
    let nt = f.axes.time.count;
    let hx = f.axes.space.cell_volume();
    let ht = f.axes.time.spacing;
    let slices: Vec<f64> = match inner.1 {
        NormAxis::Space => (0..nt)
            .map(|it| lp(f.values[it * ns..(it + 1) * ns].iter().copied(), hx, inner.0))
            .collect(),
        NormAxis::Time => (0..ns)
            .map(|ix| lp((0..nt).map(|it| f.values[it * ns + ix]), ht, inner.0))
            .collect(),
    };
    let w = match outer.1 {
        NormAxis::Space => hx,
        NormAxis::Time => ht,
    };
    Ok(lp(slices.into_iter(), w, outer.0))
}

/// `inf_τ (i_p(τ) + c K τ^a)` in closed form.
fn inf_bound(p: f64, c: f64, k: f64, a: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    if k.is_infinite() {
        return f64::INFINITY;
    }
    if p == 2.0 || a == 0.0 {
        return c * k;
    }
    if a < 0.0 {
        return f64::INFINITY;
    }
    let alpha = 1.0 / (a * (p - 2.0) + 1.0);
    (p - 2.0 + 1.0 / a) * (a * c * k).powf(alpha)
}

/// Exponent `α = 1/(p - 1 - (p-2)/r)` shared by both bounds.
pub fn remark_exponent(p: f64, r: f64) -> f64 {
    1.0 / (p - 1.0 - (p - 2.0) / r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LebesgueBound {
    /// Bound on `D_p(ρ)`.
    pub dp_bound: f64,
    /// Bound on `P_p(·;ρ)`; `+∞` unless `1/r + N/(pq) < 1`.
    pub potential_bound: f64,
    pub exponent: f64,
}

/// Bounds for `μ ∈ L^r_t(L^q_x)` with `‖μ‖_{q,r} = norm`.
pub fn remark_bound_lebesgue(params: &PotentialParams, norm: f64, rho: f64, q: f64, r: f64) -> Result<LebesgueBound> {
    let p = params.p;
    let n = params.n as f64;
    if !(r > 1.0) {
        return Err(NormError::InvalidExponent(format!("need r > 1, got {r}")));
    }
    if !(q > n / p) {
        return Err(NormError::InvalidExponent(format!("need q > N/p = {}, got {q}", n / p)));
    }
    if !(rho > 0.0) {
        return Err(NormError::NonPositive(rho));
    }
    if !(norm >= 0.0) {
        return Err(NormError::NonPositive(norm));
    }
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let ir = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let a = 1.0 - ir;
    let e = p - p * ir - n * iq;
    let omega = unit_ball_volume(params.n);
    let k_of = |rho: f64| omega.powf(1.0 - iq) * 2f64.powf(1.0 - ir) * rho.powf(e) * norm;
    let c = mass_coefficient(p);
    let alpha = 1.0 / (a * (p - 2.0) + 1.0);
    let dp_bound = inf_bound(p, c, k_of(rho), a);
    let potential_bound = if e > 0.0 {
        dp_bound / (1.0 - 2f64.powf(-e * alpha))
    } else if norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(LebesgueBound { dp_bound, potential_bound, exponent: alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzBound {
    /// Bound on `D_p(ρ)`.
    pub dp_bound: f64,
    /// Bound on `P_p(·;ρ)` through `∫_0^ρ K(s)^α ds/s`.
    pub potential_bound: f64,
    /// The integral `∫_0^ρ [s^{p-p/r} h**(ω_N s^N)]^α ds/s`.
    pub integral: f64,
    pub alpha: f64,
    /// `q = N/(p - p/r)`.
    pub q: f64,
}

/// `x ↦ ‖f(x,·)‖_{L^{r,∞}_t}` as a spatial grid function.
pub fn time_lorentz_profile(f: &GridFunction, r: f64) -> Result<GridFunction> {
    let ns = f.axes.space.cell_count();
    let nt = f.axes.time.count;
    let ht = f.axes.time.spacing;
    let mut h = Vec::with_capacity(ns);
    for ix in 0..ns {
        let col: Vec<f64> = (0..nt).map(|it| f.values[it * ns + ix]).collect();
        let rr = Rearrangement::from_weighted(&col, &vec![ht; nt]);
        h.push(lorentz_norm_of(&rr, r, f64::INFINITY)?);
    }
    GridFunction::spatial(f.axes.space.clone(), h)
}

/// Bounds for a density with `h(x) = ‖μ(x,·)‖_{r,∞}` in a Lorentz space.
pub fn remark_bound_lorentz(params: &PotentialParams, f: &GridFunction, rho: f64, r: f64) -> Result<LorentzBound> {
    let p = params.p;
    let n = params.n;
    if f.axes.dim() != n {
        return Err(MeasureError::DimensionMismatch { expected: n, found: f.axes.dim() }.into());
    }
    if !(r > (p - 2.0) / (p - 1.0)) {
        return Err(NormError::InvalidExponent(format!("need r > (p-2)/(p-1), got {r}")));
    }
    if !(rho > 0.0) {
        return Err(NormError::NonPositive(rho));
    }
    let ir = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let a = 1.0 - ir;
    let beta = p - p * ir;
    let alpha = remark_exponent(p, r);
    let q = n as f64 / beta;
    let omega = unit_ball_volume(n);
    let c = mass_coefficient(p);
    let h = rearrange(&time_lorentz_profile(f, r)?);
    let hss = |u: f64| if u > 0.0 { h.integral_to(u) / u } else { h.values.first().copied().unwrap_or(0.0) };
    let k_of = |s: f64| 2f64.powf(1.0 - ir) * omega * s.powf(beta) * hss(omega * s.powi(n as i32));

    let dp_bound = inf_bound(p, c, k_of(rho), a);
    if h.is_zero() {
        return Ok(LorentzBound { dp_bound: 0.0, potential_bound: 0.0, integral: 0.0, alpha, q });
    }
    if a < 0.0 || dp_bound.is_infinite() {
        return Ok(LorentzBound { dp_bound, potential_bound: f64::INFINITY, integral: f64::INFINITY, alpha, q });
    }
    // γ_D from inf_bound with K = 1
    let gamma_d = inf_bound(p, c, 1.0, a);
    let integrand = |x: f64| {
        let s = x.exp();
        (s.powf(beta) * hss(omega * s.powi(n as i32))).powf(alpha)
    };
    // kinks where ω s^N crosses a breakpoint of h*
    let breaks: Vec<f64> = h
        .breakpoints
        .iter()
        .map(|&u| (u / omega).powf(1.0 / n as f64).ln())
        .collect();
    // below the first breakpoint h** is constant: the integrand is a pure power
    let s0 = (h.breakpoints[0] / omega).powf(1.0 / n as f64).min(rho);
    let head = (s0.powf(beta) * h.values[0]).powf(alpha) / (beta * alpha);
    let body = if rho > s0 {
        let scale = integrand(rho.ln()).max(integrand(s0.ln())) * (rho / s0).ln();
        quad::adaptive_with_breaks(integrand, s0.ln(), rho.ln(), &breaks, 1e-14 * scale, 1e-13, 40)
    } else {
        0.0
    };
    let integral = head + body;
    let kconst = (2f64.powf(1.0 - ir) * omega).powf(alpha);
    let potential_bound = gamma_d * 2f64.powf(beta * alpha) / std::f64::consts::LN_2 * kconst * integral;
    Ok(LorentzBound { dp_bound, potential_bound, integral, alpha, q })
}
