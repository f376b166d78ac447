//! Small complex FFT: iterative radix-2 for powers of two, Bluestein's chirp-z
//! for every other length, and a separable 2-D transform on top.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.re * self.re + self.im * self.im)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Complex::new(self.re * s, self.im * s)
    }

    #[inline]
    pub fn cis(theta: f64) -> Self {
        Complex::new(math::cos(theta), math::sin(theta))
    }
}

impl Add for Complex {
    type Output = Complex;
    #[inline]
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    #[inline]
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed 1-D transform of a fixed length. Inverse transforms are
/// unnormalized; divide by the length yourself.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    Radix2 { twiddles: Vec<Complex> },
    Bluestein { chirp: Vec<Complex>, filter_spectrum: Vec<Complex>, inner: Vec<Complex> },
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            let twiddles = (0..len / 2).map(|k| Complex::cis(-2.0 * PI * k as f64 / len as f64)).collect();
            return Fft { len, plan: Plan::Radix2 { twiddles } };
        }
        let m = (2 * len - 1).next_power_of_two();
        // chirp w_k = exp(-i pi k^2 / n); k^2 reduced mod 2n keeps the angle small
        let chirp: Vec<Complex> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                Complex::cis(-PI * k2 / len as f64)
            })
            .collect();
        let mut filter = vec![Complex::ZERO; m];
        filter[0] = chirp[0].conj();
        for k in 1..len {
            filter[k] = chirp[k].conj();
            filter[m - k] = chirp[k].conj();
        }
        let inner: Vec<Complex> = (0..m / 2).map(|k| Complex::cis(-2.0 * PI * k as f64 / m as f64)).collect();
        radix2(&mut filter, &inner, Direction::Forward);
        Fft { len, plan: Plan::Bluestein { chirp, filter_spectrum: filter, inner } }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn process(&self, buf: &mut [Complex], dir: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.plan {
            Plan::Radix2 { twiddles } => radix2(buf, twiddles, dir),
            Plan::Bluestein { chirp, filter_spectrum, inner } => {
                bluestein(buf, chirp, filter_spectrum, inner, dir)
            }
        }
    }
}

fn radix2(buf: &mut [Complex], twiddles: &[Complex], dir: Direction) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut half = 1;
    while half < n {
        let step = n / (2 * half);
        for start in (0..n).step_by(2 * half) {
            for k in 0..half {
                let mut w = twiddles[k * step];
                if dir == Direction::Inverse {
                    w = w.conj();
                }
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        half *= 2;
    }
}

fn bluestein(buf: &mut [Complex], chirp: &[Complex], filter: &[Complex], inner: &[Complex], dir: Direction) {
    // the inverse transform is the conjugate of the forward transform of the conjugate
    if dir == Direction::Inverse {
        buf.iter_mut().for_each(|v| *v = v.conj());
    }
    let m = filter.len();
    let mut work = vec![Complex::ZERO; m];
    for (k, v) in buf.iter().enumerate() {
        work[k] = *v * chirp[k];
    }
    radix2(&mut work, inner, Direction::Forward);
    for (w, f) in work.iter_mut().zip(filter) {
        *w = *w * *f;
    }
    radix2(&mut work, inner, Direction::Inverse);
    let inv_m = 1.0 / m as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        *v = (work[k] * chirp[k]).scale(inv_m);
    }
    if dir == Direction::Inverse {
        buf.iter_mut().for_each(|v| *v = v.conj());
    }
}

/// Row-major 2-D transform (unnormalized in both directions).
pub fn fft2(data: &mut [Complex], width: usize, height: usize, dir: Direction) {
    assert_eq!(data.len(), width * height);
    let rows = Fft::new(width);
    for row in data.chunks_exact_mut(width) {
        rows.process(row, dir);
    }
    let cols = Fft::new(height);
    let mut col = vec![Complex::ZERO; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        cols.process(&mut col, dir);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::ZERO, |acc, (j, v)| {
                    acc + *v * Complex::cis(-2.0 * PI * (j * k % n) as f64 / n as f64)
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex> {
        (0..n).map(|i| Complex::new(math::sin(i as f64 * 0.7) + 0.1 * i as f64, math::cos(i as f64 * 1.3))).collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 17, 31, 32, 45, 64, 100] {
            let x = signal(n);
            let want = naive_dft(&x);
            let mut got = x.clone();
            Fft::new(n).process(&mut got, Direction::Forward);
            for (a, b) in got.iter().zip(&want) {
                assert!((*a - *b).norm() < 1e-9 * n as f64, "n={n}");
            }
            Fft::new(n).process(&mut got, Direction::Inverse);
            for (a, b) in got.iter().zip(&x) {
                assert!((a.scale(1.0 / n as f64) - *b).norm() < 1e-10 * n as f64, "n={n} inverse");
            }
        }
    }

    #[test]
    fn fft2_round_trip() {
        let (w, h) = (12, 7);
        let orig: Vec<Complex> = (0..w * h).map(|i| Complex::new((i % 5) as f64, (i % 3) as f64)).collect();
        let mut d = orig.clone();
        fft2(&mut d, w, h, Direction::Forward);
        fft2(&mut d, w, h, Direction::Inverse);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a.scale(1.0 / (w * h) as f64) - *b).norm() < 1e-10);
        }
    }
}
