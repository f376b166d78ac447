//! Translational registration by phase correlation.
//!
//! Both frames are mean-subtracted and Hann-windowed, the normalized
//! cross-power spectrum is weighted by a Gaussian so the correlation peak is a
//! sampled Gaussian blob, and the peak is refined by a least-squares quadratic
//! fit to the log of its 3x3 neighbourhood (exact for a Gaussian peak).

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::degrade::SceneStack;
use crate::error::{Error, Result};
use crate::fft::{fft2, Complex, Direction};
use crate::math;
use crate::raster::{Image, Shift};

pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    /// Width (pixels) of the Gaussian the correlation peak is shaped into.
    pub peak_sigma: f64,
    pub hann_window: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig { peak_sigma: 1.0, hann_window: true }
    }
}

/// Translation that maps `moving` onto `reference`: if
/// `moving = translate(reference, s)` the result is `-s`.
pub fn estimate_shift(reference: &Image, moving: &Image) -> Result<Shift> {
    estimate_shift_with(reference, moving, &RegistrationConfig::default())
}

pub fn estimate_shift_with(reference: &Image, moving: &Image, cfg: &RegistrationConfig) -> Result<Shift> {
    if reference.dims() != moving.dims() {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?} vs moving {:?}",
            reference.dims(),
            moving.dims()
        )));
    }
    let (w, h) = reference.dims();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::TooSmall(format!("{w}x{h}; registration needs at least {MIN_SIDE}x{MIN_SIDE}")));
    }
    let a = windowed_spectrum(reference, cfg)?;
    let b = windowed_spectrum(moving, cfg)?;

    let peak_scale = 2.0 * PI * PI * cfg.peak_sigma * cfg.peak_sigma;
    let mut cross: Vec<Complex> = Vec::with_capacity(w * h);
    let max_mag = a.iter().zip(&b).map(|(p, q)| p.norm() * q.norm()).fold(0.0, f64::max);
    for v in 0..h {
        let fv = wrapped(v, h) as f64 / h as f64;
        for u in 0..w {
            let fu = wrapped(u, w) as f64 / w as f64;
            let i = v * w + u;
            let c = a[i] * b[i].conj();
            let mag = c.norm();
            if mag <= max_mag * 1e-12 {
                cross.push(Complex::ZERO);
                continue;
            }
            let weight = math::exp(-peak_scale * (fu * fu + fv * fv));
            cross.push(c.scale(weight / mag));
        }
    }
    fft2(&mut cross, w, h, Direction::Inverse);
    let corr: Vec<f64> = cross.iter().map(|c| c.re).collect();

    let (mut px, mut py, mut best) = (0usize, 0usize, f64::NEG_INFINITY);
    for (i, &v) in corr.iter().enumerate() {
        if v > best {
            best = v;
            px = i % w;
            py = i / w;
        }
    }
    if !(best > 0.0) {
        return Err(Error::NoRegistrableContent);
    }
    let mut patch = [[0.0; 3]; 3];
    for (j, row) in patch.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            let x = (px + w + i - 1) % w;
            let y = (py + h + j - 1) % h;
            *cell = corr[y * w + x];
        }
    }
    let (ox, oy) = refine_peak(&patch);
    Ok(Shift::new(wrapped(px, w) as f64 + ox, wrapped(py, h) as f64 + oy))
}

/// Maps an index in `0..n` to the signed range `[-n/2, n/2)`.
fn wrapped(i: usize, n: usize) -> isize {
    if i >= n.div_ceil(2) {
        i as isize - n as isize
    } else {
        i as isize
    }
}

fn windowed_spectrum(img: &Image, cfg: &RegistrationConfig) -> Result<Vec<Complex>> {
    let (w, h) = img.dims();
    let mean = img.plane().mean();
    let var = img.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (w * h) as f64;
    if var < 1e-12 {
        return Err(Error::NoRegistrableContent);
    }
    let hann = |i: usize, n: usize| 0.5 - 0.5 * math::cos(2.0 * PI * (i as f64 + 0.5) / n as f64);
    let wx: Vec<f64> = (0..w).map(|i| if cfg.hann_window { hann(i, w) } else { 1.0 }).collect();
    let wy: Vec<f64> = (0..h).map(|i| if cfg.hann_window { hann(i, h) } else { 1.0 }).collect();
    let mut data: Vec<Complex> = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(Complex::new((img.get(x, y) - mean) * wx[x] * wy[y], 0.0));
        }
    }
    fft2(&mut data, w, h, Direction::Forward);
    Ok(data)
}

/// Sub-pixel offset of the extremum of a quadratic least-squares fit over a
/// 3x3 patch centred on the integer peak. The fit runs on log values when
/// the whole patch is positive.
fn refine_peak(patch: &[[f64; 3]; 3]) -> (f64, f64) {
    let positive = patch.iter().flatten().all(|&v| v > 0.0);
    let mut v = [[0.0; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            v[j][i] = if positive { math::ln(patch[j][i]) } else { patch[j][i] };
        }
    }
    // column sums (fixed x) and row sums (fixed y)
    let col = |i: usize| v[0][i] + v[1][i] + v[2][i];
    let row = |j: usize| v[j][0] + v[j][1] + v[j][2];
    let b = (col(2) - col(0)) / 6.0;
    let c = (row(2) - row(0)) / 6.0;
    let d = (col(0) + col(2) - 2.0 * col(1)) / 6.0;
    let f = (row(0) + row(2) - 2.0 * row(1)) / 6.0;
    let e = (v[2][2] - v[0][2] - v[2][0] + v[0][0]) / 4.0;
    // gradient zero: [2d e; e 2f] [x y]^T = -[b c]^T
    let det = 4.0 * d * f - e * e;
    let (mut ox, mut oy) = if d < 0.0 && det > 0.0 {
        ((-2.0 * f * b + e * c) / det, (-2.0 * d * c + e * b) / det)
    } else {
        (axis_vertex(v[1][0], v[1][1], v[1][2]), axis_vertex(v[0][1], v[1][1], v[2][1]))
    };
    if !ox.is_finite() {
        ox = 0.0;
    }
    if !oy.is_finite() {
        oy = 0.0;
    }
    (ox.clamp(-1.0, 1.0), oy.clamp(-1.0, 1.0))
}

fn axis_vertex(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom >= 0.0 {
        0.0
    } else {
        0.5 * (left - right) / denom
    }
}

/// Shifts of every frame relative to frame 0 (element 0 is exactly zero).
pub fn register_stack(stack: &SceneStack) -> Result<Vec<Shift>> {
    register_frames(&stack.frames)
}

pub fn register_frames(frames: &[Image]) -> Result<Vec<Shift>> {
    let reference = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot register an empty stack".into()))?;
    let mut shifts = Vec::with_capacity(frames.len());
    shifts.push(Shift::ZERO);
    for (i, frame) in frames.iter().enumerate().skip(1) {
        shifts.push(estimate_shift(reference, frame).map_err(|e| e.at_frame(i))?);
    }
    Ok(shifts)
}
