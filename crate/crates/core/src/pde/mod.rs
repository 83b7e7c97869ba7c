//! Desk-scale solver for `u_t - Δ_p u = μ` on a line or in radial symmetry.
//!
//! Vertex-centred finite volumes: node `i` sits at `lo + i h` and owns the
//! control volume between the neighbouring face midpoints (clipped to the
//! domain). In radial geometry volumes and face areas carry the
//! `|S^{N-1}| r^{N-1}` weight, so discrete integrals are true `ℝ^N`
//! integrals. Each step is backward Euler with the coefficient
//! `(g² + ε²)^{(p-2)/2}` lagged one Picard sweep behind; every sweep is a
//! tridiagonal solve. The system matrix is an M-matrix, so the scheme is
//! unconditionally stable and keeps nonnegative data nonnegative.
//!
//! Sources: continuous parts of `μ` contribute their control-volume mass
//! over each time step; space-time atoms are applied as an impulse in the
//! step containing their time, split between the two nearest nodes.

mod cylinder;
mod exact;
mod weak;

pub use cylinder::{
    cylinder_average_power, lebesgue_point_value, CylinderQuadrature, LebesguePoint, SpatialNode,
};
pub use exact::{barenblatt, barenblatt_constants, heat_kernel, ExactSolution};
pub use weak::{bump_profile, bump_profile_derivative, weak_residual, Bump, WeakResidual};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::unit_sphere_area;
use crate::measure::{MeasureError, SignedMeasure, SpaceTimeAtom, SpaceTimeKind, SpaceTimeMeasure, SpatialAtom};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value at step {step} (t = {time}), node {node}: aborting")]
    NonFinite { step: usize, time: f64, node: usize },
    #[error("query leaves the grid: {0}")]
    OutsideGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Potential(#[from] crate::potential::PotentialError),
}

pub type Result<T> = std::result::Result<T, PdeError>;

/// Spatial domain of the reduced problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    /// `[a, b] ⊂ ℝ`.
    Line { a: f64, b: f64 },
    /// Radially symmetric functions on the ball `B_R ⊂ ℝ^N`, stored on `r ∈ [0, R]`.
    Radial { dim: usize, r_max: f64 },
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Line { .. } => 1,
            Geometry::Radial { dim, .. } => *dim,
        }
    }

    /// Coordinate interval `[lo, hi]` of the stored variable (`x` or `r`).
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Geometry::Line { a, b } => (a, b),
            Geometry::Radial { r_max, .. } => (0.0, r_max),
        }
    }

    /// Stored coordinate of a point of `ℝ^N`.
    pub fn coordinate(&self, x: &[f64]) -> f64 {
        match self {
            Geometry::Line { .. } => x[0],
            Geometry::Radial { .. } => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Geometry::Line { a, b } => a.is_finite() && b.is_finite() && b > a,
            Geometry::Radial { dim, r_max } => dim >= 1 && r_max.is_finite() && r_max > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PdeError::InvalidConfig(format!("degenerate geometry {self:?}")))
        }
    }

    /// Measure of `{lo_c ≤ coordinate ≤ hi_c}` (a slab or a shell).
    pub fn shell_volume(&self, lo_c: f64, hi_c: f64) -> f64 {
        match *self {
            Geometry::Line { .. } => (hi_c - lo_c).max(0.0),
            Geometry::Radial { dim, .. } => {
                let n = dim as i32;
                unit_sphere_area(dim) * (hi_c.powi(n) - lo_c.max(0.0).powi(n)).max(0.0) / dim as f64
            }
        }
    }

    /// Area of the face at coordinate `c` (1 on a line).
    pub fn face_area(&self, c: f64) -> f64 {
        match *self {
            Geometry::Line { .. } => 1.0,
            Geometry::Radial { dim, .. } => unit_sphere_area(dim) * c.powi(dim as i32 - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// No flux through the outer faces.
    ZeroFlux,
    /// Values prescribed by the boundary function.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    pub geometry: Geometry,
    /// Number of cells; there are `cells + 1` nodes.
    pub cells: usize,
    pub t0: f64,
    pub k: f64,
    pub steps: usize,
    /// Regularisation; `None` means `ε = h`.
    pub eps: Option<f64>,
    pub boundary: BoundaryKind,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl SolverConfig {
    pub fn new(p: f64, geometry: Geometry, cells: usize, t0: f64, k: f64, steps: usize) -> Self {
        Self {
            p,
            geometry,
            cells,
            t0,
            k,
            steps,
            eps: None,
            boundary: BoundaryKind::Dirichlet,
            picard_tol: 1e-10,
            picard_max: 50,
        }
    }

    pub fn h(&self) -> f64 {
        let (lo, hi) = self.geometry.interval();
        (hi - lo) / self.cells as f64
    }

    fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let bad = |m: &str| Err(PdeError::InvalidConfig(m.into()));
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return bad("p must be >= 2");
        }
        if self.cells < 2 {
            return bad("need at least 2 cells");
        }
        if !(self.k > 0.0 && self.k.is_finite() && self.t0.is_finite()) {
            return bad("time step must be positive and finite");
        }
        if let Some(e) = self.eps {
            if !(e >= 0.0 && e.is_finite()) {
                return bad("regularisation must be nonnegative");
            }
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return bad("picard_tol must be positive and picard_max >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub picard_sweeps_total: usize,
    pub picard_sweeps_max: usize,
    /// Steps that hit `picard_max` before reaching `picard_tol`.
    pub unconverged_steps: usize,
    pub last_relative_update: f64,
}

/// Solution on a uniform space-time node grid, level-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub geometry: Geometry,
    pub p: f64,
    pub h: f64,
    pub k: f64,
    pub eps: f64,
    pub t0: f64,
    pub nodes: usize,
    pub levels: usize,
    pub u: Vec<f64>,
    pub stats: SolveStats,
}

impl GridSolution {
    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.levels - 1) as f64 * self.k
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.k
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.geometry.interval().0 + i as f64 * self.h
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.u[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Samples `f(coord, t)` on the grid.
    pub fn from_fn(
        geometry: Geometry,
        p: f64,
        cells: usize,
        t0: f64,
        k: f64,
        steps: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        geometry.validate()?;
        let (lo, hi) = geometry.interval();
        let h = (hi - lo) / cells as f64;
        let nodes = cells + 1;
        let mut u = Vec::with_capacity(nodes * (steps + 1));
        for n in 0..=steps {
            let t = t0 + n as f64 * k;
            for i in 0..nodes {
                u.push(f(lo + i as f64 * h, t));
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::InvalidArgument("sampled function is not finite".into()));
        }
        Ok(Self { geometry, p, h, k, eps: h, t0, nodes, levels: steps + 1, u, stats: SolveStats::default() })
    }

    /// Bilinear interpolation at stored coordinate `c` and time `t`.
    pub fn interp(&self, c: f64, t: f64) -> Option<f64> {
        let (lo, hi) = self.geometry.interval();
        let slack = 1e-12 * (hi - lo).max(1.0);
        let tslack = 1e-12 * (self.t_end() - self.t0).max(1.0);
        if !(c >= lo - slack && c <= hi + slack && t >= self.t0 - tslack && t <= self.t_end() + tslack) {
            return None;
        }
        let xs = ((c - lo) / self.h).clamp(0.0, (self.nodes - 1) as f64);
        let i = (xs.floor() as usize).min(self.nodes - 2);
        let fx = xs - i as f64;
        let (n, ft) = if self.levels == 1 {
            (0, 0.0)
        } else {
            let ts = ((t - self.t0) / self.k).clamp(0.0, (self.levels - 1) as f64);
            let n = (ts.floor() as usize).min(self.levels - 2);
            (n, ts - n as f64)
        };
        let at = |n: usize| {
            let row = self.level(n);
            row[i] * (1.0 - fx) + row[i + 1] * fx
        };
        Some(if self.levels == 1 { at(0) } else { at(n) * (1.0 - ft) + at(n + 1) * ft })
    }

    /// Value at a point of `ℝ^N`.
    pub fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        if x.len() != self.dim() {
            return None;
        }
        self.interp(self.geometry.coordinate(x), t)
    }

    /// Control-volume volumes of the nodes.
    pub fn volumes(&self) -> Vec<f64> {
        control_volumes(&self.geometry, self.h, self.nodes)
    }

    /// `∫ u(·, t_n)` over the domain.
    pub fn mass(&self, n: usize) -> f64 {
        self.volumes().iter().zip(self.level(n)).map(|(v, u)| v * u).sum()
    }

    /// Snapshot CSV with header `t,x1,u` (line) or `t,r,u` (radial).
    pub fn write_snapshots<W: Write>(&self, out: W, levels: &[usize]) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let name = match self.geometry {
            Geometry::Line { .. } => "x1",
            Geometry::Radial { .. } => "r",
        };
        w.write_record(["t", name, "u"])?;
        for &n in levels.iter().filter(|&&n| n < self.levels) {
            let t = self.time(n);
            for (i, u) in self.level(n).iter().enumerate() {
                w.write_record([format!("{t:e}"), format!("{:e}", self.coord(i)), format!("{u:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Run manifest written next to solver snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveManifest {
    pub p: f64,
    pub geometry: Geometry,
    pub h: f64,
    pub k: f64,
    pub eps: f64,
    pub t0: f64,
    pub steps: usize,
    pub stats: SolveStats,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub residual_norms: Vec<f64>,
}

impl SolveManifest {
    pub fn new(sol: &GridSolution, residual_norms: Vec<f64>) -> Self {
        Self {
            p: sol.p,
            geometry: sol.geometry,
            h: sol.h,
            k: sol.k,
            eps: sol.eps,
            t0: sol.t0,
            steps: sol.levels - 1,
            stats: sol.stats.clone(),
            mass_initial: sol.mass(0),
            mass_final: sol.mass(sol.levels - 1),
            residual_norms,
        }
    }
}

pub(crate) fn control_volumes(geom: &Geometry, h: f64, nodes: usize) -> Vec<f64> {
    let (lo, hi) = geom.interval();
    (0..nodes)
        .map(|i| {
            let c = lo + i as f64 * h;
            geom.shell_volume((c - 0.5 * h).max(lo), (c + 0.5 * h).min(hi))
        })
        .collect()
}

/// Per-step source masses (plus minus minus) on the nodes.
pub(crate) struct Sources {
    geometry: Geometry,
    lo: f64,
    h: f64,
    nodes: usize,
    /// `(time, coordinate, signed weight)`, sorted by time.
    impulses: Vec<(f64, f64, f64)>,
    /// Mass rate of stationary atoms and time-product densities.
    stationary_rate: Vec<f64>,
    gridded: Vec<(f64, SpaceTimeMeasure)>,
}

impl Sources {
    pub(crate) fn new(geometry: Geometry, h: f64, nodes: usize, mu: &SignedMeasure) -> Result<Self> {
        if mu.dim() != geometry.dim() {
            return Err(MeasureError::DimensionMismatch { expected: geometry.dim(), found: mu.dim() }.into());
        }
        let (lo, _) = geometry.interval();
        let mut s = Self {
            geometry,
            lo,
            h,
            nodes,
            impulses: Vec::new(),
            stationary_rate: vec![0.0; nodes],
            gridded: Vec::new(),
        };
        for (sign, part) in [(1.0, &mu.plus), (-1.0, &mu.minus)] {
            let mut atoms: Vec<SpaceTimeAtom> = Vec::new();
            part.collect_atoms(&mut atoms);
            for a in atoms {
                s.impulses.push((a.time, geometry.coordinate(&a.position), sign * a.weight));
            }
            let mut stationary: Vec<SpatialAtom> = Vec::new();
            part.collect_stationary_atoms(&mut stationary);
            for a in stationary {
                let c = geometry.coordinate(&a.position);
                let mut rate = std::mem::take(&mut s.stationary_rate);
                s.spread(c, sign * a.weight, &mut |i, m| rate[i] += m);
                s.stationary_rate = rate;
            }
            s.collect_continuous(part, sign);
        }
        s.impulses.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(s)
    }

    fn collect_continuous(&mut self, part: &SpaceTimeMeasure, sign: f64) {
        match part.kind() {
            SpaceTimeKind::Atoms(_) => {}
            SpaceTimeKind::Grid(_) => self.gridded.push((sign, part.clone())),
            SpaceTimeKind::TimeProduct(_) => {
                // unit time window gives the rate; atoms are excluded here
                for i in 0..self.nodes {
                    let (a, b) = self.cv(i);
                    self.stationary_rate[i] += sign * self.window_mass(part, a, b, 0.0, 1.0);
                }
            }
            SpaceTimeKind::Sum(parts) => {
                for p in parts {
                    self.collect_continuous(p, sign);
                }
            }
        }
    }

    fn cv(&self, i: usize) -> (f64, f64) {
        let (lo, hi) = self.geometry.interval();
        let c = lo + i as f64 * self.h;
        ((c - 0.5 * self.h).max(lo), (c + 0.5 * self.h).min(hi))
    }

    fn window_mass(&self, part: &SpaceTimeMeasure, a: f64, b: f64, t_lo: f64, t_hi: f64) -> f64 {
        match self.geometry {
            Geometry::Line { .. } => part.continuous_box_mass(&[a], &[b], t_lo, t_hi).unwrap_or(0.0),
            Geometry::Radial { .. } => part.continuous_shell_mass(a, b, t_lo, t_hi),
        }
    }

    /// Splits a point mass at coordinate `c` between the two nearest nodes.
    fn spread(&self, c: f64, w: f64, add: &mut dyn FnMut(usize, f64)) {
        let xs = (c - self.lo) / self.h;
        if xs < -1e-12 || xs > (self.nodes - 1) as f64 + 1e-12 {
            return;
        }
        let xs = xs.clamp(0.0, (self.nodes - 1) as f64);
        let i = (xs.floor() as usize).min(self.nodes - 2);
        let f = xs - i as f64;
        add(i, w * (1.0 - f));
        add(i + 1, w * f);
    }

    /// Source mass per node over `(t_a, t_b]`.
    pub(crate) fn step(&self, t_a: f64, t_b: f64, out: &mut [f64]) {
        let dt = t_b - t_a;
        for (o, r) in out.iter_mut().zip(&self.stationary_rate) {
            *o = r * dt;
        }
        for (sign, part) in &self.gridded {
            for i in 0..self.nodes {
                let (a, b) = self.cv(i);
                out[i] += sign * self.window_mass(part, a, b, t_a, t_b);
            }
        }
        let start = self.impulses.partition_point(|e| e.0 <= t_a);
        for &(t, c, w) in &self.impulses[start..] {
            if t > t_b {
                break;
            }
            self.spread(c, w, &mut |i, m| out[i] += m);
        }
    }
}

/// Backward-Euler / Picard solve from `initial(coord)` with boundary values
/// `boundary(coord, t)` (ignored for zero-flux boundaries).
pub fn solve(
    cfg: &SolverConfig,
    initial: &dyn Fn(f64) -> f64,
    boundary: &dyn Fn(f64, f64) -> f64,
    mu: &SignedMeasure,
) -> Result<GridSolution> {
    cfg.validate()?;
    let geom = cfg.geometry;
    let h = cfg.h();
    let eps = cfg.eps.unwrap_or(h);
    let nodes = cfg.cells + 1;
    let (lo, _) = geom.interval();
    let coord = |i: usize| lo + i as f64 * h;
    let vol = control_volumes(&geom, h, nodes);
    let area: Vec<f64> = (0..nodes - 1).map(|i| geom.face_area(coord(i) + 0.5 * h)).collect();
    let sources = Sources::new(geom, h, nodes, mu)?;
    let dirichlet_left = matches!(geom, Geometry::Line { .. }) && cfg.boundary == BoundaryKind::Dirichlet;
    let dirichlet_right = cfg.boundary == BoundaryKind::Dirichlet;
    let pexp = 0.5 * (cfg.p - 2.0);

    let mut u: Vec<f64> = Vec::with_capacity(nodes * (cfg.steps + 1));
    let mut cur: Vec<f64> = (0..nodes).map(|i| initial(coord(i))).collect();
    if let Some(i) = cur.iter().position(|v| !v.is_finite()) {
        return Err(PdeError::NonFinite { step: 0, time: cfg.t0, node: i });
    }
    u.extend_from_slice(&cur);

    let mut stats = SolveStats::default();
    let mut src = vec![0.0; nodes];
    let mut coef = vec![0.0; nodes - 1];
    let (mut sub, mut diag, mut sup, mut rhs) =
        (vec![0.0; nodes], vec![0.0; nodes], vec![0.0; nodes], vec![0.0; nodes]);
    let mut next = cur.clone();
    let mut scratch = vec![0.0; nodes];

    for n in 0..cfg.steps {
        let t_a = cfg.t0 + n as f64 * cfg.k;
        let t_b = t_a + cfg.k;
        sources.step(t_a, t_b, &mut src);
        let mut sweeps = 0;
        let mut rel;
        let mut iterate = cur.clone();
        loop {
            sweeps += 1;
            for f in 0..nodes - 1 {
                let g = (iterate[f + 1] - iterate[f]) / h;
                coef[f] = if pexp == 0.0 { 1.0 } else { (g * g + eps * eps).powf(pexp) };
                coef[f] *= area[f] / h;
            }
            for i in 0..nodes {
                let left = if i > 0 { coef[i - 1] } else { 0.0 };
                let right = if i + 1 < nodes { coef[i] } else { 0.0 };
                sub[i] = -left;
                sup[i] = -right;
                diag[i] = vol[i] / cfg.k + left + right;
                rhs[i] = (vol[i] * cur[i] + src[i]) / cfg.k;
            }
            if dirichlet_left {
                sub[0] = 0.0;
                sup[0] = 0.0;
                diag[0] = 1.0;
                rhs[0] = boundary(coord(0), t_b);
            }
            if dirichlet_right {
                let l = nodes - 1;
                sub[l] = 0.0;
                sup[l] = 0.0;
                diag[l] = 1.0;
                rhs[l] = boundary(coord(l), t_b);
            }
            thomas(&sub, &diag, &sup, &rhs, &mut next, &mut scratch);
            if let Some(i) = next.iter().position(|v| !v.is_finite()) {
                return Err(PdeError::NonFinite { step: n + 1, time: t_b, node: i });
            }
            let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let upd = next.iter().zip(&iterate).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            rel = upd / scale;
            std::mem::swap(&mut iterate, &mut next);
            if pexp == 0.0 || rel <= cfg.picard_tol {
                break;
            }
            if sweeps >= cfg.picard_max {
                stats.unconverged_steps += 1;
                break;
            }
        }
        stats.picard_sweeps_total += sweeps;
        stats.picard_sweeps_max = stats.picard_sweeps_max.max(sweeps);
        stats.last_relative_update = rel;
        cur = iterate;
        u.extend_from_slice(&cur);
    }

    Ok(GridSolution { geometry: geom, p: cfg.p, h, k: cfg.k, eps, t0: cfg.t0, nodes, levels: cfg.steps + 1, u, stats })
}

/// Thomas algorithm for a diagonally dominant tridiagonal system.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], x: &mut [f64], c: &mut [f64]) {
    let n = diag.len();
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
}

#[cfg(test)]
mod tests;
