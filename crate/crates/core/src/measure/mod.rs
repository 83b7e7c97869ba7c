//! Nonnegative and signed space-time measures with cylinder-mass queries.
//!
//! Cylinders are `Q_{ρ,s}(x0,t0) = {|x - x0| ≤ ρ} × (t0 - s, t0 + s)`: the
//! spatial ball is closed and the time interval is open. An atom sitting on
//! the sphere counts, an atom at `t0 ± s` does not.

mod io;
mod profile;

pub use io::{
    format_grid_density, load_measure, parse_atoms_csv, parse_grid_density, write_atoms_csv, MeasureFormat,
};
pub use profile::CylinderProfile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axes::{CellAxes, SpaceTimeAxes};
use crate::geometry;
use crate::quad;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("radius and half-height must be positive (got radius {radius}, half-height {halfheight})")]
    InvalidCylinder { radius: f64, halfheight: f64 },
    #[error("invalid weight {0}: nonnegative parts need positive weights")]
    InvalidWeight(f64),
    #[error("invalid density value {0}")]
    InvalidDensity(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MeasureError::NonFinite(what))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(MeasureError::DimensionMismatch { expected, found })
    }
}

/// Space-time cylinder `B_ρ(center_x) × (center_t - s, center_t + s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center_x: Vec<f64>,
    pub center_t: f64,
    pub radius: f64,
    pub halfheight: f64,
}

impl Cylinder {
    pub fn new(center_x: Vec<f64>, center_t: f64, radius: f64, halfheight: f64) -> Result<Self> {
        check_finite(&center_x, "cylinder center")?;
        check_finite(&[center_t], "cylinder time")?;
        if !(radius > 0.0 && halfheight > 0.0) || radius.is_nan() || halfheight.is_nan() {
            return Err(MeasureError::InvalidCylinder { radius, halfheight });
        }
        Ok(Self { center_x, center_t, radius, halfheight })
    }

    pub fn dim(&self) -> usize {
        self.center_x.len()
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        dist2(x, &self.center_x) <= self.radius * self.radius
            && (t - self.center_t).abs() < self.halfheight
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialAtom {
    pub position: Vec<f64>,
    pub weight: f64,
}

/// Piecewise-constant nonnegative density on a tensor grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub axes: CellAxes,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(axes: CellAxes, values: Vec<f64>) -> Result<Self> {
        if values.len() != axes.cell_count() {
            return Err(MeasureError::InvalidGrid(format!(
                "expected {} values, found {}",
                axes.cell_count(),
                values.len()
            )));
        }
        if !axes.axes.iter().all(|a| a.is_valid()) {
            return Err(MeasureError::InvalidGrid("non-positive spacing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(MeasureError::InvalidDensity(*v));
        }
        Ok(Self { axes, values })
    }

    /// Mass of the closed ball, cell by cell (exact geometry).
    fn ball_mass(&self, x0: &[f64], rho: f64) -> f64 {
        let lo: Vec<f64> = x0.iter().map(|c| c - rho).collect();
        let hi: Vec<f64> = x0.iter().map(|c| c + rho).collect();
        let mut acc = 0.0;
        self.axes.for_each_cell_in_box(&lo, &hi, |flat, idx| {
            let v = self.values[flat];
            if v > 0.0 {
                let (clo, chi) = self.axes.cell_bounds(idx);
                acc += v * geometry::ball_box_volume(x0, rho, &clo, &chi);
            }
        });
        acc
    }

    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.axes.for_each_cell_in_box(lo, hi, |flat, idx| {
            let (clo, chi) = self.axes.cell_bounds(idx);
            let vol: f64 = (0..lo.len())
                .map(|k| (chi[k].min(hi[k]) - clo[k].max(lo[k])).max(0.0))
                .product();
            acc += self.values[flat] * vol;
        });
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpatialKind {
    Atoms(Vec<SpatialAtom>),
    /// Constant multiple of Lebesgue measure.
    Uniform(f64),
    Grid(DensityGrid),
    Sum(Vec<SpatialMeasure>),
}

/// Nonnegative measure on ℝ^N with finite mass on every ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMeasure {
    dim: usize,
    kind: SpatialKind,
}

impl SpatialMeasure {
    pub fn zero(dim: usize) -> Self {
        Self { dim, kind: SpatialKind::Atoms(Vec::new()) }
    }

    pub fn atoms(dim: usize, atoms: Vec<SpatialAtom>) -> Result<Self> {
        for a in &atoms {
            check_dim(dim, a.position.len())?;
            check_finite(&a.position, "atom position")?;
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(MeasureError::InvalidWeight(a.weight));
            }
        }
        Ok(Self { dim, kind: SpatialKind::Atoms(atoms) })
    }

    pub fn point_mass(position: Vec<f64>, weight: f64) -> Result<Self> {
        let dim = position.len();
        Self::atoms(dim, vec![SpatialAtom { position, weight }])
    }

    pub fn lebesgue(dim: usize) -> Self {
        Self { dim, kind: SpatialKind::Uniform(1.0) }
    }

    pub fn uniform(dim: usize, density: f64) -> Result<Self> {
        if !(density.is_finite() && density >= 0.0) {
            return Err(MeasureError::InvalidDensity(density));
        }
        Ok(Self { dim, kind: SpatialKind::Uniform(density) })
    }

    pub fn grid(grid: DensityGrid) -> Self {
        Self { dim: grid.axes.dim(), kind: SpatialKind::Grid(grid) }
    }

    pub fn sum(dim: usize, parts: Vec<SpatialMeasure>) -> Result<Self> {
        for p in &parts {
            check_dim(dim, p.dim)?;
        }
        Ok(Self { dim, kind: SpatialKind::Sum(parts) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SpatialKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SpatialKind::Atoms(a) => a.is_empty(),
            SpatialKind::Uniform(c) => *c == 0.0,
            SpatialKind::Grid(g) => g.values.iter().all(|v| *v == 0.0),
            SpatialKind::Sum(parts) => parts.iter().all(SpatialMeasure::is_zero),
        }
    }

    /// `c · ν` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            SpatialKind::Atoms(atoms) => {
                if c == 0.0 {
                    SpatialKind::Atoms(Vec::new())
                } else {
                    SpatialKind::Atoms(
                        atoms
                            .iter()
                            .map(|a| SpatialAtom { position: a.position.clone(), weight: c * a.weight })
                            .collect(),
                    )
                }
            }
            SpatialKind::Uniform(d) => SpatialKind::Uniform(c * d),
            SpatialKind::Grid(g) => SpatialKind::Grid(DensityGrid {
                axes: g.axes.clone(),
                values: g.values.iter().map(|v| c * v).collect(),
            }),
            SpatialKind::Sum(parts) => SpatialKind::Sum(parts.iter().map(|p| p.scaled(c)).collect()),
        };
        Self { dim: self.dim, kind }
    }

    /// `ν(B_ρ(x0))` over the closed ball.
    pub fn ball_mass(&self, x0: &[f64], rho: f64) -> Result<f64> {
        check_dim(self.dim, x0.len())?;
        check_finite(x0, "ball center")?;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(MeasureError::InvalidCylinder { radius: rho, halfheight: 1.0 });
        }
        Ok(self.ball_mass_unchecked(x0, rho, true))
    }

    pub(crate) fn ball_mass_unchecked(&self, x0: &[f64], rho: f64, with_atoms: bool) -> f64 {
        match &self.kind {
            SpatialKind::Atoms(atoms) => {
                if !with_atoms {
                    return 0.0;
                }
                let r2 = rho * rho;
                atoms
                    .iter()
                    .filter(|a| dist2(&a.position, x0) <= r2)
                    .map(|a| a.weight)
                    .sum()
            }
            SpatialKind::Uniform(c) => c * geometry::unit_ball_volume(self.dim) * rho.powi(self.dim as i32),
            SpatialKind::Grid(g) => g.ball_mass(x0, rho),
            SpatialKind::Sum(parts) => parts
                .iter()
                .map(|p| p.ball_mass_unchecked(x0, rho, with_atoms))
                .sum(),
        }
    }

    /// Mass of the closed box `[lo, hi]`, optionally skipping atoms.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64], with_atoms: bool) -> Result<f64> {
        check_dim(self.dim, lo.len())?;
        check_dim(self.dim, hi.len())?;
        Ok(self.box_mass_unchecked(lo, hi, with_atoms))
    }

    fn box_mass_unchecked(&self, lo: &[f64], hi: &[f64], with_atoms: bool) -> f64 {
        match &self.kind {
            SpatialKind::Atoms(atoms) => {
                if !with_atoms {
                    return 0.0;
                }
                atoms
                    .iter()
                    .filter(|a| a.position.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| x >= l && x <= h))
                    .map(|a| a.weight)
                    .sum()
            }
            SpatialKind::Uniform(c) => c * lo.iter().zip(hi).map(|(l, h)| (h - l).max(0.0)).product::<f64>(),
            SpatialKind::Grid(g) => g.box_mass(lo, hi),
            SpatialKind::Sum(parts) => parts.iter().map(|p| p.box_mass_unchecked(lo, hi, with_atoms)).sum(),
        }
    }

    /// All atoms of the measure, flattened out of sums.
    pub fn collect_atoms(&self, out: &mut Vec<SpatialAtom>) {
        match &self.kind {
            SpatialKind::Atoms(atoms) => out.extend(atoms.iter().cloned()),
            SpatialKind::Sum(parts) => parts.iter().for_each(|p| p.collect_atoms(out)),
            _ => {}
        }
    }

    /// `∫ f dν` over the box `[lo, hi]` (atoms inside the box included).
    fn integrate_box(&self, f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
        match &self.kind {
            SpatialKind::Atoms(atoms) => atoms
                .iter()
                .filter(|a| a.position.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| x >= l && x <= h))
                .map(|a| a.weight * f(&a.position))
                .sum(),
            SpatialKind::Uniform(c) => c * tensor_integrate(f, lo, hi, panels),
            SpatialKind::Grid(g) => {
                let mut acc = 0.0;
                g.axes.for_each_cell_in_box(lo, hi, |flat, idx| {
                    let v = g.values[flat];
                    if v == 0.0 {
                        return;
                    }
                    let (clo, chi) = g.axes.cell_bounds(idx);
                    let blo: Vec<f64> = clo.iter().zip(lo).map(|(a, b)| a.max(*b)).collect();
                    let bhi: Vec<f64> = chi.iter().zip(hi).map(|(a, b)| a.min(*b)).collect();
                    if blo.iter().zip(&bhi).all(|(a, b)| b > a) {
                        acc += v * tensor_integrate(f, &blo, &bhi, 1);
                    }
                });
                acc
            }
            SpatialKind::Sum(parts) => parts.iter().map(|p| p.integrate_box(f, lo, hi, panels)).sum(),
        }
    }
}

/// Composite tensor Gauss-Legendre integration over a box.
fn tensor_integrate(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
    let rule = quad::unit_rule(8);
    let n = lo.len();
    if n == 0 {
        return f(&[]);
    }
    let panels = panels.max(1);
    let per_axis: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|k| {
            let h = (hi[k] - lo[k]) / panels as f64;
            (0..panels)
                .flat_map(|i| rule.mapped(lo[k] + i as f64 * h, lo[k] + (i + 1) as f64 * h).collect::<Vec<_>>())
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..n {
            let (xk, wk) = per_axis[k][idx[k]];
            x[k] = xk;
            w *= wk;
        }
        acc += w * f(&x);
        let mut k = n;
        loop {
            if k == 0 {
                return acc;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_axis[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeAtom {
    pub position: Vec<f64>,
    pub time: f64,
    pub weight: f64,
}

/// Piecewise-constant nonnegative density on a space-time cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub axes: SpaceTimeAxes,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(axes: SpaceTimeAxes, values: Vec<f64>) -> Result<Self> {
        if !axes.is_valid() {
            return Err(MeasureError::InvalidGrid("non-positive spacing".into()));
        }
        if values.len() != axes.len() {
            return Err(MeasureError::InvalidGrid(format!(
                "expected {} values, found {}",
                axes.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(MeasureError::InvalidDensity(*v));
        }
        Ok(Self { axes, values })
    }

    /// Builds a grid by evaluating `f(x_center, t_center)` at cell centres.
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceTimeKind {
    Atoms(Vec<SpaceTimeAtom>),
    Grid(GridDensity),
    /// `ν ⊗ dt`: a time-independent spatial measure times Lebesgue in time.
    TimeProduct(SpatialMeasure),
    Sum(Vec<SpaceTimeMeasure>),
}

/// Nonnegative space-time Radon measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeMeasure {
    dim: usize,
    kind: SpaceTimeKind,
}

impl SpaceTimeMeasure {
    pub fn zero(dim: usize) -> Self {
        Self { dim, kind: SpaceTimeKind::Atoms(Vec::new()) }
    }

    pub fn atoms(dim: usize, atoms: Vec<SpaceTimeAtom>) -> Result<Self> {
        for a in &atoms {
            check_dim(dim, a.position.len())?;
            check_finite(&a.position, "atom position")?;
            check_finite(&[a.time], "atom time")?;
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(MeasureError::InvalidWeight(a.weight));
            }
        }
        Ok(Self { dim, kind: SpaceTimeKind::Atoms(atoms) })
    }

    pub fn grid(grid: GridDensity) -> Self {
        Self { dim: grid.axes.dim(), kind: SpaceTimeKind::Grid(grid) }
    }

    pub fn time_product(spatial: SpatialMeasure) -> Self {
        Self { dim: spatial.dim(), kind: SpaceTimeKind::TimeProduct(spatial) }
    }

    pub fn sum(dim: usize, parts: Vec<SpaceTimeMeasure>) -> Result<Self> {
        for p in &parts {
            check_dim(dim, p.dim)?;
        }
        Ok(Self { dim, kind: SpaceTimeKind::Sum(parts) })
    }

    /// `self ⊎ other`.
    pub fn union(&self, other: &SpaceTimeMeasure) -> Result<Self> {
        Self::sum(self.dim, vec![self.clone(), other.clone()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SpaceTimeKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SpaceTimeKind::Atoms(a) => a.is_empty(),
            SpaceTimeKind::Grid(g) => g.values.iter().all(|v| *v == 0.0),
            SpaceTimeKind::TimeProduct(s) => s.is_zero(),
            SpaceTimeKind::Sum(parts) => parts.iter().all(SpaceTimeMeasure::is_zero),
        }
    }

    /// True when every part is time-independent (a `TimeProduct`).
    pub fn is_time_independent(&self) -> bool {
        match &self.kind {
            SpaceTimeKind::TimeProduct(_) => true,
            SpaceTimeKind::Atoms(a) => a.is_empty(),
            SpaceTimeKind::Grid(g) => g.values.iter().all(|v| *v == 0.0),
            SpaceTimeKind::Sum(parts) => parts.iter().all(SpaceTimeMeasure::is_time_independent),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            SpaceTimeKind::Atoms(atoms) => {
                if c == 0.0 {
                    SpaceTimeKind::Atoms(Vec::new())
                } else {
                    SpaceTimeKind::Atoms(
                        atoms
                            .iter()
                            .map(|a| SpaceTimeAtom { weight: c * a.weight, ..a.clone() })
                            .collect(),
                    )
                }
            }
            SpaceTimeKind::Grid(g) => SpaceTimeKind::Grid(GridDensity {
                axes: g.axes.clone(),
                values: g.values.iter().map(|v| c * v).collect(),
            }),
            SpaceTimeKind::TimeProduct(s) => SpaceTimeKind::TimeProduct(s.scaled(c)),
            SpaceTimeKind::Sum(parts) => SpaceTimeKind::Sum(parts.iter().map(|p| p.scaled(c)).collect()),
        };
        Self { dim: self.dim, kind }
    }

    /// Mass of `B_ρ(x0) × (t0 - s, t0 + s)` as a function of `s`.
    pub fn profile(&self, x0: &[f64], t0: f64, rho: f64) -> Result<CylinderProfile> {
        check_dim(self.dim, x0.len())?;
        check_finite(x0, "cylinder center")?;
        check_finite(&[t0], "cylinder time")?;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(MeasureError::InvalidCylinder { radius: rho, halfheight: 1.0 });
        }
        let mut prof = CylinderProfile::default();
        self.accumulate_profile(x0, t0, rho, &mut prof);
        prof.finish();
        Ok(prof)
    }

    fn accumulate_profile(&self, x0: &[f64], t0: f64, rho: f64, prof: &mut CylinderProfile) {
        match &self.kind {
            SpaceTimeKind::Atoms(atoms) => {
                let r2 = rho * rho;
                for a in atoms {
                    if dist2(&a.position, x0) <= r2 {
                        prof.add_step((a.time - t0).abs(), a.weight);
                    }
                }
            }
            SpaceTimeKind::TimeProduct(spatial) => {
                prof.add_rate(2.0 * spatial.ball_mass_unchecked(x0, rho, true));
            }
            SpaceTimeKind::Grid(g) => {
                let space = &g.axes.space;
                let lo: Vec<f64> = x0.iter().map(|c| c - rho).collect();
                let hi: Vec<f64> = x0.iter().map(|c| c + rho).collect();
                let mut cells = Vec::new();
                space.for_each_cell_in_box(&lo, &hi, |flat, idx| {
                    let (clo, chi) = space.cell_bounds(idx);
                    let vol = geometry::ball_box_volume(x0, rho, &clo, &chi);
                    if vol > 0.0 {
                        cells.push((flat, vol));
                    }
                });
                if cells.is_empty() {
                    return;
                }
                let ns = space.cell_count();
                for it in 0..g.axes.time.count {
                    let rate: f64 = cells.iter().map(|&(flat, vol)| g.values[it * ns + flat] * vol).sum();
                    if rate > 0.0 {
                        prof.add_slab(g.axes.time.lo(it) - t0, g.axes.time.hi(it) - t0, rate);
                    }
                }
            }
            SpaceTimeKind::Sum(parts) => {
                for p in parts {
                    p.accumulate_profile(x0, t0, rho, prof);
                }
            }
        }
    }

    /// `μ(Q)` for a cylinder.
    pub fn cylinder_mass(&self, q: &Cylinder) -> Result<f64> {
        check_dim(self.dim, q.dim())?;
        Ok(self.profile(&q.center_x, q.center_t, q.radius)?.mass(q.halfheight))
    }

    /// Mass of the non-atomic parts on the box `[lo, hi] × (t_lo, t_hi)`,
    /// with spatial atoms of time products excluded as well.
    pub fn continuous_box_mass(&self, lo: &[f64], hi: &[f64], t_lo: f64, t_hi: f64) -> Result<f64> {
        check_dim(self.dim, lo.len())?;
        check_dim(self.dim, hi.len())?;
        Ok(self.continuous_box_mass_unchecked(lo, hi, t_lo, t_hi))
    }

    fn continuous_box_mass_unchecked(&self, lo: &[f64], hi: &[f64], t_lo: f64, t_hi: f64) -> f64 {
        let dt = (t_hi - t_lo).max(0.0);
        match &self.kind {
            SpaceTimeKind::Atoms(_) => 0.0,
            SpaceTimeKind::TimeProduct(s) => dt * s.box_mass_unchecked(lo, hi, false),
            SpaceTimeKind::Grid(g) => {
                let ns = g.axes.space.cell_count();
                let mut acc = 0.0;
                for it in g.axes.time.cells_meeting(t_lo, t_hi) {
                    let ov = (g.axes.time.hi(it).min(t_hi) - g.axes.time.lo(it).max(t_lo)).max(0.0);
                    if ov == 0.0 {
                        continue;
                    }
                    g.axes.space.for_each_cell_in_box(lo, hi, |flat, idx| {
                        let (clo, chi) = g.axes.space.cell_bounds(idx);
                        let vol: f64 = (0..lo.len())
                            .map(|k| (chi[k].min(hi[k]) - clo[k].max(lo[k])).max(0.0))
                            .product();
                        acc += g.values[it * ns + flat] * vol * ov;
                    });
                }
                acc
            }
            SpaceTimeKind::Sum(parts) => parts
                .iter()
                .map(|p| p.continuous_box_mass_unchecked(lo, hi, t_lo, t_hi))
                .sum(),
        }
    }

    /// Non-atomic mass of the spherical shell `{r_lo < |x| ≤ r_hi} × (t_lo, t_hi)`.
    pub fn continuous_shell_mass(&self, r_lo: f64, r_hi: f64, t_lo: f64, t_hi: f64) -> f64 {
        let origin = vec![0.0; self.dim];
        let ball = |r: f64| {
            if r <= 0.0 {
                0.0
            } else {
                self.continuous_ball_window(&origin, r, t_lo, t_hi)
            }
        };
        (ball(r_hi) - ball(r_lo)).max(0.0)
    }

    fn continuous_ball_window(&self, x0: &[f64], r: f64, t_lo: f64, t_hi: f64) -> f64 {
        let dt = (t_hi - t_lo).max(0.0);
        match &self.kind {
            SpaceTimeKind::Atoms(_) => 0.0,
            SpaceTimeKind::TimeProduct(s) => dt * s.ball_mass_unchecked(x0, r, false),
            SpaceTimeKind::Grid(_) => {
                let mid = 0.5 * (t_lo + t_hi);
                let mut prof = CylinderProfile::default();
                self.accumulate_profile(x0, mid, r, &mut prof);
                prof.finish();
                prof.mass(0.5 * dt)
            }
            SpaceTimeKind::Sum(parts) => parts.iter().map(|p| p.continuous_ball_window(x0, r, t_lo, t_hi)).sum(),
        }
    }

    /// Space-time atoms, flattened out of sums.
    pub fn collect_atoms(&self, out: &mut Vec<SpaceTimeAtom>) {
        match &self.kind {
            SpaceTimeKind::Atoms(a) => out.extend(a.iter().cloned()),
            SpaceTimeKind::Sum(parts) => parts.iter().for_each(|p| p.collect_atoms(out)),
            _ => {}
        }
    }

    /// Spatial atoms of time-product parts (stationary point sources).
    pub fn collect_stationary_atoms(&self, out: &mut Vec<SpatialAtom>) {
        match &self.kind {
            SpaceTimeKind::TimeProduct(s) => s.collect_atoms(out),
            SpaceTimeKind::Sum(parts) => parts.iter().for_each(|p| p.collect_stationary_atoms(out)),
            _ => {}
        }
    }

    /// `∫ f dμ` over `[lo, hi] × [t_lo, t_hi]`.
    pub fn integrate(
        &self,
        f: &dyn Fn(&[f64], f64) -> f64,
        lo: &[f64],
        hi: &[f64],
        t_lo: f64,
        t_hi: f64,
        panels: usize,
    ) -> Result<f64> {
        check_dim(self.dim, lo.len())?;
        check_dim(self.dim, hi.len())?;
        Ok(self.integrate_unchecked(f, lo, hi, t_lo, t_hi, panels))
    }

    fn integrate_unchecked(
        &self,
        f: &dyn Fn(&[f64], f64) -> f64,
        lo: &[f64],
        hi: &[f64],
        t_lo: f64,
        t_hi: f64,
        panels: usize,
    ) -> f64 {
        let rule = quad::unit_rule(8);
        match &self.kind {
            SpaceTimeKind::Atoms(atoms) => atoms
                .iter()
                .filter(|a| {
                    a.time >= t_lo
                        && a.time <= t_hi
                        && a.position.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| x >= l && x <= h)
                })
                .map(|a| a.weight * f(&a.position, a.time))
                .sum(),
            SpaceTimeKind::TimeProduct(s) => {
                let panels = panels.max(1);
                let h = (t_hi - t_lo) / panels as f64;
                let mut acc = 0.0;
                for i in 0..panels {
                    for (t, w) in rule.mapped(t_lo + i as f64 * h, t_lo + (i + 1) as f64 * h) {
                        acc += w * s.integrate_box(&|x| f(x, t), lo, hi, panels);
                    }
                }
                acc
            }
            SpaceTimeKind::Grid(g) => {
                let ns = g.axes.space.cell_count();
                let mut acc = 0.0;
                for it in g.axes.time.cells_meeting(t_lo, t_hi) {
                    let a = g.axes.time.lo(it).max(t_lo);
                    let b = g.axes.time.hi(it).min(t_hi);
                    if b <= a {
                        continue;
                    }
                    let slice = DensityGrid {
                        axes: g.axes.space.clone(),
                        values: g.values[it * ns..(it + 1) * ns].to_vec(),
                    };
                    let sm = SpatialMeasure::grid(slice);
                    for (t, w) in rule.mapped(a, b) {
                        acc += w * sm.integrate_box(&|x| f(x, t), lo, hi, 1);
                    }
                }
                acc
            }
            SpaceTimeKind::Sum(parts) => parts
                .iter()
                .map(|p| p.integrate_unchecked(f, lo, hi, t_lo, t_hi, panels))
                .sum(),
        }
    }
}

/// Signed measure stored as an explicit Jordan pair `μ = μ₊ - μ₋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub plus: SpaceTimeMeasure,
    pub minus: SpaceTimeMeasure,
}

/// Selects one Jordan part (and, for solutions, `u₊` or `u₋`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl SignedMeasure {
    pub fn new(plus: SpaceTimeMeasure, minus: SpaceTimeMeasure) -> Result<Self> {
        check_dim(plus.dim(), minus.dim())?;
        Ok(Self { plus, minus })
    }

    pub fn zero(dim: usize) -> Self {
        Self { plus: SpaceTimeMeasure::zero(dim), minus: SpaceTimeMeasure::zero(dim) }
    }

    pub fn positive(plus: SpaceTimeMeasure) -> Self {
        let dim = plus.dim();
        Self { plus, minus: SpaceTimeMeasure::zero(dim) }
    }

    pub fn dim(&self) -> usize {
        self.plus.dim()
    }

    pub fn part(&self, sign: Sign) -> &SpaceTimeMeasure {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    /// Total variation `|μ| = μ₊ ⊎ μ₋`.
    pub fn abs(&self) -> SpaceTimeMeasure {
        SpaceTimeMeasure { dim: self.dim(), kind: SpaceTimeKind::Sum(vec![self.plus.clone(), self.minus.clone()]) }
    }

    pub fn is_zero(&self) -> bool {
        self.plus.is_zero() && self.minus.is_zero()
    }
}
