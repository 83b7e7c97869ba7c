/// Cylinder mass `s ↦ μ(B_ρ(x0) × (t0 - s, t0 + s))` for fixed `(x0, t0, ρ)`.
///
/// Three kinds of contributions are kept separately: a linear rate (time
/// products), jumps at `|t - t0|` (atoms, counted only once `s` exceeds the
/// distance), and time slabs `[a, b]` relative to `t0` with a constant rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CylinderProfile {
    rate: f64,
    /// Sorted `(distance, cumulative weight up to and including it)`.
    steps: Vec<(f64, f64)>,
    slabs: Vec<(f64, f64, f64)>,
    finished: bool,
}

impl CylinderProfile {
    pub(crate) fn add_rate(&mut self, r: f64) {
        self.rate += r;
    }

    pub(crate) fn add_step(&mut self, dist: f64, w: f64) {
        self.steps.push((dist, w));
        self.finished = false;
    }

    pub(crate) fn add_slab(&mut self, a: f64, b: f64, rate: f64) {
        if b > a && rate > 0.0 {
            self.slabs.push((a, b, rate));
        }
    }

    pub(crate) fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.steps.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.steps.len());
        let mut cum = 0.0;
        for &(d, w) in &self.steps {
            cum += w;
            match merged.last_mut() {
                Some(last) if last.0 == d => last.1 = cum,
                _ => merged.push((d, cum)),
            }
        }
        self.steps = merged;
        self.finished = true;
    }

    /// Linear rate `d/ds` contributed by time-independent parts.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_zero(&self) -> bool {
        self.rate == 0.0 && self.steps.is_empty() && self.slabs.is_empty()
    }

    /// Mass at half-height `s` (open time interval).
    pub fn mass(&self, s: f64) -> f64 {
        debug_assert!(self.finished);
        if !(s > 0.0) {
            return 0.0;
        }
        let mut m = if self.rate > 0.0 { self.rate * s } else { 0.0 };
        // count distances strictly below s
        let k = self.steps.partition_point(|&(d, _)| d < s);
        if k > 0 {
            m += self.steps[k - 1].1;
        }
        for &(a, b, r) in &self.slabs {
            let ov = b.min(s) - a.max(-s);
            if ov > 0.0 {
                m += r * ov;
            }
        }
        m
    }

    /// Mass of the whole time line (`s → ∞`); infinite with a positive rate.
    pub fn total(&self) -> f64 {
        if self.rate > 0.0 {
            return f64::INFINITY;
        }
        let atoms = self.steps.last().map_or(0.0, |s| s.1);
        atoms + self.slabs.iter().map(|&(a, b, r)| r * (b - a)).sum::<f64>()
    }

    /// Half-heights where the profile has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.steps.iter().map(|s| s.0).collect();
        for &(a, b, _) in &self.slabs {
            out.push(a.abs());
            out.push(b.abs());
        }
        out.retain(|x| *x > 0.0 && x.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Jump locations only (atoms).
    pub fn jumps(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_open_at_the_distance() {
        let mut p = CylinderProfile::default();
        p.add_step(0.5, 2.0);
        p.add_step(0.5, 1.0);
        p.add_step(0.1, 4.0);
        p.finish();
        assert_eq!(p.mass(0.1), 0.0);
        assert_eq!(p.mass(0.2), 4.0);
        assert_eq!(p.mass(0.5), 4.0);
        assert_eq!(p.mass(0.50001), 7.0);
        assert_eq!(p.total(), 7.0);
        assert_eq!(p.breakpoints(), vec![0.1, 0.5]);
    }

    #[test]
    fn slabs_overlap() {
        let mut p = CylinderProfile::default();
        p.add_slab(-1.0, 0.5, 2.0);
        p.finish();
        assert!((p.mass(0.25) - 1.0).abs() < 1e-15);
        assert!((p.mass(0.75) - 2.5).abs() < 1e-15);
        assert!((p.mass(10.0) - 3.0).abs() < 1e-15);
    }
}
