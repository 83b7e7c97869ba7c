//! Rectangular cell grids shared by grid densities and grid functions.
//!
//! Values on a space-time grid are stored row-major with the time index
//! slowest and the last spatial axis fastest:
//! `index = ((it * n1 + i1) * n2 + i2) * ... + iN`.

use serde::{Deserialize, Serialize};

/// A uniform 1-D cell axis: cells `[origin + i h, origin + (i+1) h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Self {
        Self { origin, spacing, count }
    }

    pub fn is_valid(&self) -> bool {
        self.origin.is_finite() && self.spacing.is_finite() && self.spacing > 0.0
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.origin + (i + 1) as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.lo(self.count)
    }

    /// Index range of cells meeting the closed interval `[a, b]`.
    pub fn cells_meeting(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        if self.count == 0 || b < self.origin || a > self.end() {
            return 0..0;
        }
        let first = ((a - self.origin) / self.spacing).floor().max(0.0) as usize;
        let last = ((b - self.origin) / self.spacing).floor().max(0.0) as usize;
        first.min(self.count)..(last + 1).min(self.count)
    }
}

/// Tensor grid of spatial cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAxes {
    pub axes: Vec<Axis>,
}

impl CellAxes {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Multi-index of a flat cell index.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for (k, ax) in self.axes.iter().enumerate().rev() {
            out[k] = flat % ax.count;
            flat /= ax.count;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        self.axes
            .iter()
            .zip(idx)
            .fold(0, |acc, (ax, &i)| acc * ax.count + i)
    }

    pub fn cell_bounds(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let lo = self.axes.iter().zip(idx).map(|(a, &i)| a.lo(i)).collect();
        let hi = self.axes.iter().zip(idx).map(|(a, &i)| a.hi(i)).collect();
        (lo, hi)
    }

    /// Visits the flat indices of cells whose closure meets the box `[lo, hi]`.
    pub fn for_each_cell_in_box(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(usize, &[usize])) {
        let ranges: Vec<_> = self
            .axes
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(ax, (&a, &b))| ax.cells_meeting(a, b))
            .collect();
        if ranges.iter().any(|r| r.is_empty()) {
            return;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        loop {
            f(self.flatten(&idx), &idx);
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < ranges[k].end {
                    break;
                }
                idx[k] = ranges[k].start;
            }
        }
    }
}

/// Spatial cell grid crossed with a uniform time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeAxes {
    pub space: CellAxes,
    pub time: Axis,
}

impl SpaceTimeAxes {
    pub fn new(space: CellAxes, time: Axis) -> Self {
        Self { space, time }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn len(&self) -> usize {
        self.space.cell_count() * self.time.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, it: usize, spatial_flat: usize) -> usize {
        it * self.space.cell_count() + spatial_flat
    }

    pub fn is_valid(&self) -> bool {
        self.time.is_valid() && self.space.axes.iter().all(Axis::is_valid)
    }
}
