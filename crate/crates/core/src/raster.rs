//! Raster containers and the pixel-level primitives every stage builds on.
//!
//! Boundary handling is replicate padding everywhere. Kernels are applied as
//! a sliding-window correlation, so [`Kernel::flip`] yields the adjoint
//! operator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, clamp_index};

/// Unconstrained single-channel raster used for intermediate arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("empty raster {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with replicate padding.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        self.get(clamp_index(x, self.width), clamp_index(y, self.height))
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        assert_eq!(self.dims(), other.dims(), "zip_map on mismatched rasters");
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn dot(&self, other: &Plane) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dot on mismatched rasters");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sub-rectangle starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Plane {
        assert!(x0 + width <= self.width && y0 + height <= self.height, "crop out of bounds");
        Plane::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Raster whose values are finite and inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image(Plane);

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let plane = Plane::new(width, height, data)?;
        Self::try_from_plane(plane)
    }

    pub fn try_from_plane(plane: Plane) -> Result<Self> {
        if let Some(i) = plane.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "value {} at index {i} outside [0, 1]",
                plane.data[i]
            )));
        }
        Ok(Image(plane))
    }

    /// Clamp into `[0, 1]`.
    pub fn clamped(mut plane: Plane) -> Self {
        for v in &mut plane.data {
            *v = math::clamp01(*v);
        }
        Image(plane)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Image(Plane::filled(width, height, math::clamp01(value)))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Image::clamped(Plane::from_fn(width, height, f))
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, data)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.0.data.iter().map(|&v| math::round(math::clamp01(v) * 255.0) as u8).collect()
    }

    #[inline]
    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Image {
        Image(self.0.crop(x0, y0, width, height))
    }

    /// Centered crop to the largest size divisible by `r` in both axes.
    pub fn crop_to_multiple(&self, r: usize) -> Image {
        let w = self.width() / r * r;
        let h = self.height() / r * r;
        if (w, h) == self.dims() {
            return self.clone();
        }
        self.crop((self.width() - w) / 2, (self.height() - h) / 2, w, h)
    }
}

/// Odd-sized square convolution kernel, weights stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    size: usize,
    weights: Vec<f64>,
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        Kernel::new(r.size, r.weights)
    }
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> Self {
        KernelRepr { size: k.size, weights: k.weights }
    }
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size {size} must be odd")));
        }
        if weights.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a {size}x{size} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite kernel weight".into()));
        }
        Ok(Self { size, weights })
    }

    /// Builds a square kernel from `size * size` weights, inferring the size.
    pub fn from_square(weights: Vec<f64>) -> Result<Self> {
        let size = math::round(math::sqrt(weights.len() as f64)) as usize;
        Self::new(size, weights)
    }

    pub fn delta(size: usize) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let mut weights = vec![0.0; size * size];
        weights[size * size / 2] = 1.0;
        Self { size, weights }
    }

    /// Isotropic Gaussian truncated to `size x size` and normalized to sum 1.
    pub fn gaussian(size: usize, sigma: f64) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let c = (size / 2) as f64;
        let mut weights = Vec::with_capacity(size * size);
        for j in 0..size {
            for i in 0..size {
                let (dx, dy) = (i as f64 - c, j as f64 - c);
                weights.push(math::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        Self { size, weights }
    }

    pub fn boxed(size: usize) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let n = (size * size) as f64;
        Self { size, weights: vec![1.0 / n; size * size] }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Reverses the weights in both axes (180 degree rotation).
    pub fn flip(&self) -> Kernel {
        let mut weights = self.weights.clone();
        weights.reverse();
        Kernel { size: self.size, weights }
    }
}

/// Free-function form of [`Kernel::flip`].
pub fn flip_kernel(k: &Kernel) -> Kernel {
    k.flip()
}

/// Translation in pixels. `dx` is along the row (x), `dy` down the columns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Shift {
    pub dx: f64,
    pub dy: f64,
}

impl From<[f64; 2]> for Shift {
    fn from([dx, dy]: [f64; 2]) -> Self {
        Shift { dx, dy }
    }
}

impl From<Shift> for [f64; 2] {
    fn from(s: Shift) -> Self {
        [s.dx, s.dy]
    }
}

impl Shift {
    pub const ZERO: Shift = Shift { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Shift { dx, dy }
    }

    pub fn scaled(self, factor: f64) -> Shift {
        Shift { dx: self.dx * factor, dy: self.dy * factor }
    }

    pub fn neg(self) -> Shift {
        Shift { dx: -self.dx, dy: -self.dy }
    }

    /// Euclidean distance to another shift.
    pub fn distance(self, other: Shift) -> f64 {
        let (a, b) = (self.dx - other.dx, self.dy - other.dy);
        math::sqrt(a * a + b * b)
    }

    pub fn is_within(&self, width: usize, height: usize) -> bool {
        let bound = width.min(height) as f64 / 2.0;
        self.dx.abs() < bound && self.dy.abs() < bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Nearest,
    Bilinear,
    /// Catmull-Rom cubic (a = -0.5).
    Bicubic,
    Lanczos3,
}

/// Sliding-window correlation with replicate padding. The output is not clamped.
pub fn convolve(src: &Plane, k: &Kernel) -> Plane {
    let (w, h) = src.dims();
    let size = k.size();
    let r = k.radius() as isize;
    let col_map: Vec<usize> = (0..(w + size - 1) as isize).map(|i| clamp_index(i - r, w)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for j in 0..size {
                let row = src.row(clamp_index(y as isize + j as isize - r, h));
                let kr = &k.weights[j * size..(j + 1) * size];
                let cols = &col_map[x..x + size];
                for (wt, &c) in kr.iter().zip(cols) {
                    acc += wt * row[c];
                }
            }
            out.push(acc);
        }
    }
    Plane { width: w, height: h, data: out }
}

/// Moves the content by `s`: `out(x, y) = img(x - dx, y - dy)`.
pub fn translate(img: &Image, s: Shift, interpolation: Interpolation) -> Image {
    if s == Shift::ZERO {
        return img.clone();
    }
    let p = img.plane();
    let (w, h) = p.dims();
    let plane = match interpolation {
        Interpolation::Nearest => Plane::from_fn(w, h, |x, y| {
            let sx = math::floor(x as f64 - s.dx + 0.5) as isize;
            let sy = math::floor(y as f64 - s.dy + 0.5) as isize;
            p.get_clamped(sx, sy)
        }),
        Interpolation::Bilinear => {
            Plane::from_fn(w, h, |x, y| sample_bilinear(p, x as f64 - s.dx, y as f64 - s.dy))
        }
    };
    Image::clamped(plane)
}

/// Bilinear sample at fractional coordinates with replicate padding.
pub fn sample_bilinear(p: &Plane, sx: f64, sy: f64) -> f64 {
    let x0 = math::floor(sx);
    let y0 = math::floor(sy);
    let fx = sx - x0;
    let fy = sy - y0;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let v00 = p.get_clamped(xi, yi);
    let v10 = p.get_clamped(xi + 1, yi);
    let v01 = p.get_clamped(xi, yi + 1);
    let v11 = p.get_clamped(xi + 1, yi + 1);
    let top = v00 * (1.0 - fx) + v10 * fx;
    let bottom = v01 * (1.0 - fx) + v11 * fx;
    top * (1.0 - fy) + bottom * fy
}

fn cubic_catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let a = PI * t;
        math::sin(a) / a
    }
}

fn lanczos3(t: f64) -> f64 {
    if t.abs() < 3.0 {
        sinc(t) * sinc(t / 3.0)
    } else {
        0.0
    }
}

fn triangle(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

impl ResampleMethod {
    fn support(self) -> f64 {
        match self {
            ResampleMethod::Nearest => 0.5,
            ResampleMethod::Bilinear => 1.0,
            ResampleMethod::Bicubic => 2.0,
            ResampleMethod::Lanczos3 => 3.0,
        }
    }

    fn eval(self, t: f64) -> f64 {
        match self {
            ResampleMethod::Nearest => unreachable!("nearest is sampled directly"),
            ResampleMethod::Bilinear => triangle(t),
            ResampleMethod::Bicubic => cubic_catmull_rom(t),
            ResampleMethod::Lanczos3 => lanczos3(t),
        }
    }
}

/// Per output sample: (first source index, normalized weights), source indices clamped.
struct Taps {
    indices: Vec<usize>,
    weights: Vec<f64>,
    len: usize,
}

fn taps_1d(src_len: usize, dst_len: usize, method: ResampleMethod) -> Vec<Taps> {
    let scale = dst_len as f64 / src_len as f64;
    // widen the kernel when shrinking so every source sample contributes
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = method.support() * stretch;
    (0..dst_len)
        .map(|d| {
            let center = d as f64 / scale;
            if method == ResampleMethod::Nearest {
                let i = math::floor(center + 1e-9) as isize;
                return Taps { indices: vec![clamp_index(i, src_len)], weights: vec![1.0], len: 1 };
            }
            let lo = math::floor(center - support) as isize + 1;
            let hi = math::floor(center + support) as isize;
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            for i in lo..=hi {
                let wgt = method.eval((i as f64 - center) / stretch);
                if wgt != 0.0 {
                    indices.push(clamp_index(i, src_len));
                    weights.push(wgt);
                }
            }
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= sum);
            let len = weights.len();
            Taps { indices, weights, len }
        })
        .collect()
}

/// Rescales by `factor`; output dimensions are rounded to the nearest integer
/// (at least 1). Output sample `i` sits at source coordinate `i / factor`, the
/// same corner alignment as [`decimate`]. Results are clamped to `[0, 1]`.
pub fn resample(img: &Image, factor: f64, method: ResampleMethod) -> Image {
    assert!(factor > 0.0 && factor.is_finite(), "resample factor must be positive");
    let (w, h) = img.dims();
    let ow = (math::round(w as f64 * factor) as usize).max(1);
    let oh = (math::round(h as f64 * factor) as usize).max(1);
    resize(img, ow, oh, method)
}

/// Resizes to exact output dimensions.
pub fn resize(img: &Image, ow: usize, oh: usize, method: ResampleMethod) -> Image {
    let (w, h) = img.dims();
    if (ow, oh) == (w, h) {
        return img.clone();
    }
    let src = img.plane();
    let xt = taps_1d(w, ow, method);
    let yt = taps_1d(h, oh, method);
    let mut tmp = Vec::with_capacity(ow * h);
    for y in 0..h {
        let row = src.row(y);
        for t in &xt {
            let mut acc = 0.0;
            for k in 0..t.len {
                acc += t.weights[k] * row[t.indices[k]];
            }
            tmp.push(acc);
        }
    }
    let mut out = Vec::with_capacity(ow * oh);
    for t in &yt {
        for x in 0..ow {
            let mut acc = 0.0;
            for k in 0..t.len {
                acc += t.weights[k] * tmp[t.indices[k] * ow + x];
            }
            out.push(acc);
        }
    }
    Image::clamped(Plane { width: ow, height: oh, data: out })
}

/// Keeps every `r`-th pixel starting at the top-left corner.
pub fn decimate(img: &Image, r: usize) -> Result<Image> {
    if r == 0 {
        return Err(Error::InvalidArgument("decimation factor must be positive".into()));
    }
    let (w, h) = img.dims();
    if w < r || h < r {
        return Err(Error::TooSmall(format!("{w}x{h} image cannot be decimated by {r}")));
    }
    Ok(Image(decimate_plane(img.plane(), r)))
}

/// [`decimate`] for unclamped rasters; `r` must not exceed either dimension.
pub fn decimate_plane(p: &Plane, r: usize) -> Plane {
    assert!(r >= 1 && p.width >= r && p.height >= r, "invalid decimation");
    Plane::from_fn(p.width / r, p.height / r, |x, y| p.get(x * r, y * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plane_from(rows: &[&[f64]]) -> Plane {
        let h = rows.len();
        let w = rows[0].len();
        Plane::new(w, h, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    fn lcg_plane(w: usize, h: usize, seed: u64) -> Plane {
        let mut s = seed;
        Plane::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn delta_kernel_is_identity() {
        let p = lcg_plane(9, 7, 1);
        assert_eq!(convolve(&p, &Kernel::delta(5)), p);
    }

    #[test]
    fn constant_scales_by_kernel_sum() {
        let p = Plane::filled(6, 6, 0.4);
        let k = Kernel::new(3, vec![0.1, 0.2, 0.1, 0.0, 0.5, 0.3, -0.2, 0.1, 0.4]).unwrap();
        let out = convolve(&p, &k);
        for v in out.data() {
            assert!((v - 0.4 * k.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn box_kernel_on_3x3_matches_hand_values() {
        let p = plane_from(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        let out = convolve(&p, &Kernel::boxed(3));
        // replicate-padded windows evaluated by hand
        // top-left: rows {1,1,4}, cols {1,1,2} -> (1+1+2)*2 + (4+4+5) = 21 -> 21/9
        assert!((out.get(1, 1) - 5.0).abs() < 1e-12);
        assert!((out.get(0, 0) - 21.0 / 9.0).abs() < 1e-12);
        // top-right: (2+3+3)*2 + (5+6+6) = 33
        assert!((out.get(2, 0) - 33.0 / 9.0).abs() < 1e-12);
        // bottom-left: (4+4+5) + (7+7+8)*2 = 57
        assert!((out.get(0, 2) - 57.0 / 9.0).abs() < 1e-12);
        // bottom-right: (5+6+6) + (8+9+9)*2 = 69
        assert!((out.get(2, 2) - 69.0 / 9.0).abs() < 1e-12);
        // top-center: (1+2+3)*2 + (4+5+6) = 27
        assert!((out.get(1, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn flip_kernel_index_arithmetic() {
        let mut w = vec![0.0; 25];
        w[1] = 1.0; // row 0, col 1
        let k = Kernel::new(5, w).unwrap();
        let f = flip_kernel(&k);
        assert_eq!(f.get(4, 3), 1.0);
        assert_eq!(f.sum(), 1.0);
        assert_eq!(Kernel::delta(5).flip(), Kernel::delta(5));
        assert_eq!(Kernel::gaussian(5, 1.0).flip(), Kernel::gaussian(5, 1.0));
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::new(4, vec![0.0; 16]).is_err());
        assert!(Kernel::new(3, vec![0.0; 8]).is_err());
        assert!(Kernel::new(3, vec![f64::NAN; 9]).is_err());
        assert!((Kernel::gaussian(5, 1.0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjointness_with_interior_support() {
        // <K x, y> = <x, K^T y> when y is zero within the kernel radius of the border
        let k = Kernel::new(5, lcg_plane(5, 5, 3).map(|v| v - 0.5).into_data()).unwrap();
        for seed in 0..20 {
            let x = lcg_plane(16, 16, 100 + seed);
            let y = lcg_plane(16, 16, 200 + seed);
            let y = Plane::from_fn(16, 16, |i, j| {
                if (4..12).contains(&i) && (4..12).contains(&j) { y.get(i, j) } else { 0.0 }
            });
            let lhs = convolve(&x, &k).dot(&y);
            let rhs = x.dot(&convolve(&y, &k.flip()));
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn translate_zero_is_identity() {
        let img = Image::clamped(lcg_plane(8, 8, 5));
        assert_eq!(translate(&img, Shift::ZERO, Interpolation::Bilinear), img);
    }

    #[test]
    fn translate_integer_nearest_duplicates_first_column() {
        let img = Image::clamped(lcg_plane(5, 3, 6));
        let out = translate(&img, Shift::new(1.0, 0.0), Interpolation::Nearest);
        for y in 0..3 {
            assert_eq!(out.get(0, y), img.get(0, y));
            for x in 1..5 {
                assert_eq!(out.get(x, y), img.get(x - 1, y));
            }
        }
    }

    #[test]
    fn translate_half_pixel_bilinear() {
        let img = Image::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let out = translate(&img, Shift::new(0.5, 0.0), Interpolation::Bilinear);
        assert_eq!(out.data(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn translate_round_trip_integer_interior() {
        let img = Image::clamped(lcg_plane(16, 16, 8));
        let s = Shift::new(2.0, -3.0);
        let back = translate(&translate(&img, s, Interpolation::Bilinear), s.neg(), Interpolation::Bilinear);
        for y in 3..13 {
            for x in 3..13 {
                assert!((back.get(x, y) - img.get(x, y)).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn fractional_translate_creates_no_new_extrema(seed in 0u64..1000, dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
            let img = Image::clamped(lcg_plane(12, 12, seed));
            let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = translate(&img, Shift::new(dx, dy), Interpolation::Bilinear);
            let back = translate(&out, Shift::new(-dx, -dy), Interpolation::Bilinear);
            for &v in out.data().iter().chain(back.data()) {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn resample_factor_one_is_identity() {
        let img = Image::clamped(lcg_plane(7, 5, 9));
        for m in [ResampleMethod::Nearest, ResampleMethod::Bilinear, ResampleMethod::Bicubic, ResampleMethod::Lanczos3] {
            assert_eq!(resample(&img, 1.0, m), img);
        }
    }

    #[test]
    fn resample_constant_stays_constant() {
        let img = Image::filled(9, 6, 0.37);
        for m in [ResampleMethod::Nearest, ResampleMethod::Bilinear, ResampleMethod::Bicubic, ResampleMethod::Lanczos3] {
            for f in [0.5, 1.5, 2.0, 3.0, 0.25] {
                let out = resample(&img, f, m);
                assert_eq!(out.width(), math::round(9.0 * f).max(1.0) as usize);
                for v in out.data() {
                    assert!((v - 0.37).abs() < 1e-12, "{m:?} {f}: {v}");
                }
            }
        }
    }

    #[test]
    fn bilinear_checkerboard_matches_formula() {
        let img = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resample(&img, 2.0, ResampleMethod::Bilinear);
        assert_eq!(out.dims(), (4, 4));
        // independent evaluation: source coordinate d / 2 clamped into [0, 1]
        let coord = |i: usize| (i as f64 / 2.0).clamp(0.0, 1.0);
        for y in 0..4 {
            for x in 0..4 {
                let (u, v) = (coord(x), coord(y));
                // board(u, v) = u(1-v) + v(1-u)
                let expected = u * (1.0 - v) + v * (1.0 - u);
                assert!((out.get(x, y) - expected).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn upscale_then_decimate_is_identity() {
        let img = Image::from_fn(9, 7, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        for m in [ResampleMethod::Nearest, ResampleMethod::Bilinear, ResampleMethod::Bicubic, ResampleMethod::Lanczos3] {
            let up = resample(&img, 2.0, m);
            for y in 0..7 {
                for x in 0..9 {
                    assert!((up.get(2 * x, 2 * y) - img.get(x, y)).abs() < 1e-12, "{m:?} ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn decimate_takes_top_left_samples() {
        let img = Image::from_fn(4, 4, |x, y| (y * 4 + x) as f64 / 16.0);
        let d = decimate(&img, 2).unwrap();
        assert_eq!(d.data(), &[0.0, 2.0 / 16.0, 8.0 / 16.0, 10.0 / 16.0]);
        assert_eq!(decimate(&img, 1).unwrap(), img);
        assert!(decimate(&img, 5).is_err());
    }

    #[test]
    fn decimate_commutes_with_integer_translation() {
        let img = Image::clamped(lcg_plane(16, 16, 11));
        let r = 2;
        let (a, b) = (1.0, -2.0);
        let lhs = decimate(&translate(&img, Shift::new(r as f64 * a, r as f64 * b), Interpolation::Nearest), r).unwrap();
        let rhs = translate(&decimate(&img, r).unwrap(), Shift::new(a, b), Interpolation::Nearest);
        for y in 3..6 {
            for x in 2..6 {
                assert_eq!(lhs.get(x, y), rhs.get(x, y));
            }
        }
    }

    #[test]
    fn image_rejects_out_of_range() {
        assert!(Image::new(1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 2, vec![0.5]).is_err());
        assert_eq!(Image::from_u8(1, 1, &[255]).unwrap().to_u8(), vec![255]);
    }
}
