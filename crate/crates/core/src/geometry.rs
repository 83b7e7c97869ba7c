//! Ball/box intersection volumes in ℝ^N.
//!
//! Dimensions 1 and 2 are exact (the planar case integrates the circle
//! analytically); higher dimensions integrate the (N-1)-dimensional slice
//! volume along the first axis, splitting at the radii where the slice
//! disk starts touching a face or corner of the box.

use std::f64::consts::PI;

use crate::quad;

/// Volume of the unit ball in ℝ^n (ω_n).
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Surface area of the unit sphere S^{n-1} in ℝ^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Volume of `B_r(center) ∩ [lo, hi]`.
pub fn ball_box_volume(center: &[f64], r: f64, lo: &[f64], hi: &[f64]) -> f64 {
    debug_assert_eq!(center.len(), lo.len());
    debug_assert_eq!(center.len(), hi.len());
    if r <= 0.0 || lo.iter().zip(hi).any(|(a, b)| b <= a) {
        return 0.0;
    }
    // shift to a ball centred at the origin
    let lo: Vec<f64> = lo.iter().zip(center).map(|(a, c)| a - c).collect();
    let hi: Vec<f64> = hi.iter().zip(center).map(|(b, c)| b - c).collect();
    centred_volume(r, &lo, &hi)
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(a, b)| b - a).product()
}

fn centred_volume(r: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    if r <= 0.0 {
        return 0.0;
    }
    // nearest and farthest points of the box from the origin
    let mut near2 = 0.0;
    let mut far2 = 0.0;
    let mut ball_inside = true;
    for (&a, &b) in lo.iter().zip(hi) {
        let near = if a > 0.0 {
            a
        } else if b < 0.0 {
            -b
        } else {
            0.0
        };
        let far = a.abs().max(b.abs());
        near2 += near * near;
        far2 += far * far;
        if a > -r || b < r {
            ball_inside = false;
        }
    }
    let r2 = r * r;
    if near2 > r2 {
        return 0.0;
    }
    if far2 <= r2 {
        return box_volume(lo, hi);
    }
    if ball_inside {
        return unit_ball_volume(n) * r.powi(n as i32);
    }
    match n {
        1 => (hi[0].min(r) - lo[0].max(-r)).max(0.0),
        2 => disk_rect_area(r, lo[0], hi[0], lo[1], hi[1]),
        _ => {
            let z_lo = lo[0].max(-r);
            let z_hi = hi[0].min(r);
            if z_hi <= z_lo {
                return 0.0;
            }
            let sub_lo = &lo[1..];
            let sub_hi = &hi[1..];
            let breaks = slice_breaks(r, sub_lo, sub_hi);
            let scale = r.powi(n as i32);
            quad::adaptive_with_breaks(
                |z| {
                    let rs = (r2 - z * z).max(0.0).sqrt();
                    centred_volume(rs, sub_lo, sub_hi)
                },
                z_lo,
                z_hi,
                &breaks,
                1e-14 * scale,
                1e-13,
                30,
            )
        }
    }
}

/// Values of the slicing coordinate at which the slice radius equals the
/// distance from the origin to a face or a corner of the sub-box.
fn slice_breaks(r: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut dists: Vec<f64> = lo.iter().chain(hi).map(|v| v.abs()).collect();
    if lo.len() == 2 {
        for &x in &[lo[0], hi[0]] {
            for &y in &[lo[1], hi[1]] {
                dists.push(x.hypot(y));
            }
        }
    }
    let mut out = Vec::new();
    for d in dists {
        if d < r {
            let z = (r * r - d * d).sqrt();
            out.push(z);
            out.push(-z);
        }
    }
    out
}

/// Antiderivative of `sqrt(r² - s²)`.
fn circ_prim(s: f64, r: f64) -> f64 {
    let s = s.clamp(-r, r);
    0.5 * (s * (r * r - s * s).max(0.0).sqrt() + r * r * (s / r).clamp(-1.0, 1.0).asin())
}

/// Area of the disk of radius `r` at the origin intersected with the
/// quadrant `{X ≤ x, Y ≤ y}`.
fn disk_quadrant(r: f64, x: f64, y: f64) -> f64 {
    if x <= -r || y <= -r {
        return 0.0;
    }
    let x = x.min(r);
    if y >= r {
        return 2.0 * (circ_prim(x, r) - circ_prim(-r, r));
    }
    let sy = (r * r - y * y).max(0.0).sqrt();
    let mut area = 0.0;
    // |s| >= sy: the chord lies entirely below y (y > 0) or above it (y < 0)
    if y > 0.0 {
        let b = x.min(-sy);
        if b > -r {
            area += 2.0 * (circ_prim(b, r) - circ_prim(-r, r));
        }
        if x > sy {
            area += 2.0 * (circ_prim(x, r) - circ_prim(sy, r));
        }
    }
    let a = -sy;
    let b = x.min(sy);
    if b > a {
        area += y * (b - a) + circ_prim(b, r) - circ_prim(a, r);
    }
    area
}

fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let v = disk_quadrant(r, x1, y1) - disk_quadrant(r, x0, y1) - disk_quadrant(r, x1, y0)
        + disk_quadrant(r, x0, y0);
    v.clamp(0.0, (x1 - x0) * (y1 - y0))
}
