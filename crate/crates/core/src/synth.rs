//! Procedural ground-truth scenes for desk-scale experiments.
//!
//! A scene is a smooth background, a handful of flat-shaded rectangles and
//! ellipses with slightly soft edges, thin lines, and a band of oriented
//! gratings that alias once decimated. Output is deterministic per seed.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::math;
use crate::raster::Image;
use crate::rng;

enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64, angle: f64, value: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, angle: f64, value: f64 },
    Line { x0: f64, y0: f64, x1: f64, y1: f64, width: f64, value: f64 },
}

/// Soft coverage for a signed distance `d` (negative inside), edge width ~0.7 px.
fn coverage(d: f64) -> f64 {
    (0.5 - d / 0.7).clamp(0.0, 1.0)
}

impl Shape {
    fn blend(&self, x: f64, y: f64, base: f64) -> f64 {
        let (alpha, value) = match *self {
            Shape::Rect { x0, y0, x1, y1, angle, value } => {
                let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
                let (c, s) = (math::cos(angle), math::sin(angle));
                let (u, v) = ((x - cx) * c + (y - cy) * s, -(x - cx) * s + (y - cy) * c);
                let d = (u.abs() - (x1 - x0) / 2.0).max(v.abs() - (y1 - y0) / 2.0);
                (coverage(d), value)
            }
            Shape::Ellipse { cx, cy, rx, ry, angle, value } => {
                let (c, s) = (math::cos(angle), math::sin(angle));
                let (u, v) = ((x - cx) * c + (y - cy) * s, -(x - cx) * s + (y - cy) * c);
                let k = math::sqrt((u / rx) * (u / rx) + (v / ry) * (v / ry));
                (coverage((k - 1.0) * rx.min(ry)), value)
            }
            Shape::Line { x0, y0, x1, y1, width, value } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0);
                let (px, py) = (x0 + t * dx - x, y0 + t * dy - y);
                (coverage(math::sqrt(px * px + py * py) - width / 2.0), value)
            }
        };
        base * (1.0 - alpha) + value * alpha
    }
}

struct Grating {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

/// Deterministic synthetic scene of the given size, values within `[0.05, 0.95]`.
pub fn scene(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = rng::stream(seed, &[0x5343_454E_45]);
    let (wf, hf) = (width as f64, height as f64);
    let scale = wf.min(hf);

    let g0 = rng.random_range(0.25..0.75);
    let gx = rng.random_range(-0.25..0.25);
    let gy = rng.random_range(-0.25..0.25);
    let lowfreq: Vec<Grating> = (0..3)
        .map(|_| Grating {
            fx: rng.random_range(0.5..2.5) / wf,
            fy: rng.random_range(0.5..2.5) / hf,
            phase: rng.random_range(0.0..2.0 * PI),
            amp: rng.random_range(0.03..0.08),
        })
        .collect();

    let n_shapes = 6 + (scale as usize / 24).min(18);
    let mut shapes = Vec::with_capacity(n_shapes + 4);
    for _ in 0..n_shapes {
        let value = rng.random_range(0.05..0.95);
        let angle = rng.random_range(0.0..PI);
        if rng.random_bool(0.5) {
            let cx = rng.random_range(0.0..wf);
            let cy = rng.random_range(0.0..hf);
            let hw = rng.random_range(0.03..0.2) * scale;
            let hh = rng.random_range(0.03..0.2) * scale;
            shapes.push(Shape::Rect { x0: cx - hw, y0: cy - hh, x1: cx + hw, y1: cy + hh, angle, value });
        } else {
            shapes.push(Shape::Ellipse {
                cx: rng.random_range(0.0..wf),
                cy: rng.random_range(0.0..hf),
                rx: rng.random_range(0.03..0.15) * scale,
                ry: rng.random_range(0.03..0.15) * scale,
                angle,
                value,
            });
        }
    }
    for _ in 0..3 + scale as usize / 64 {
        shapes.push(Shape::Line {
            x0: rng.random_range(0.0..wf),
            y0: rng.random_range(0.0..hf),
            x1: rng.random_range(0.0..wf),
            y1: rng.random_range(0.0..hf),
            width: rng.random_range(0.8..2.5),
            value: rng.random_range(0.05..0.95),
        });
    }

    // fine texture, periods between ~2.5 and ~8 px
    let texture: Vec<Grating> = (0..6)
        .map(|_| {
            let theta = rng.random_range(0.0..PI);
            let f = rng.random_range(0.12..0.4);
            Grating {
                fx: f * math::cos(theta),
                fy: f * math::sin(theta),
                phase: rng.random_range(0.0..2.0 * PI),
                amp: rng.random_range(0.01..0.035),
            }
        })
        .collect();

    Image::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut v = g0 + gx * (xf / wf - 0.5) + gy * (yf / hf - 0.5);
        for g in &lowfreq {
            v += g.amp * math::sin(2.0 * PI * (g.fx * xf + g.fy * yf) + g.phase);
        }
        for s in &shapes {
            v = s.blend(xf, yf, v);
        }
        for g in &texture {
            v += g.amp * math::sin(2.0 * PI * (g.fx * xf + g.fy * yf) + g.phase);
        }
        v.clamp(0.05, 0.95)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = scene(48, 40, 3);
        assert_eq!(a, scene(48, 40, 3));
        assert_ne!(a, scene(48, 40, 4));
        assert!(a.data().iter().all(|v| (0.05..=0.95).contains(v)));
        let mean = a.plane().mean();
        let var = a.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / a.data().len() as f64;
        assert!(var > 1e-3, "scene should have structure, var {var}");
    }
}
