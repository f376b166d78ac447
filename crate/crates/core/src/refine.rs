//! Sign-based iterative refinement of the fused estimate.
//!
//! One step is
//!
//! ```text
//! X_{n+1} = clamp(X_n - beta * (B' * (A . sgn(A . (B * X_n) - A . X_0)) + lambda * dU/dX(X_n)))
//! ```
//!
//! where `A` holds the per-pixel measurement counts, `B` and `B'` are 5x5
//! kernels (tuned by [`crate::evolve`]) and `U` is bilateral total variation
//!
//! ```text
//! U(X) = sum_{0 < |l|,|m| <= P} alpha^(|l|+|m|) * || X - S_{l,m} X ||_1
//! ```
//!
//! with `S_{l,m}` an integer translation under replicate padding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuse::ContributionMap;
use crate::math::{clamp_index, sgn};
use crate::raster::{convolve, Image, Kernel, Plane};

pub const KERNEL_SIZE: usize = 5;

/// Where the count map is applied on the way back through `B'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountPlacement {
    /// `B' * (A . s)`
    BeforeBackProjection,
    /// `A . (B' * s)`
    AfterBackProjection,
}

pub const COUNT_PLACEMENT: CountPlacement = CountPlacement::BeforeBackProjection;

/// Hyper-parameters of the refinement. Serialized with flat 25-weight kernels;
/// missing fields take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct RefineParams {
    pub beta: f64,
    pub lambda: f64,
    pub kernel_b: Kernel,
    pub kernel_b_prime: Kernel,
    pub iterations: usize,
    pub btv_radius: usize,
    pub btv_alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ParamsRepr {
    beta: f64,
    lambda: f64,
    kernel_b: Vec<f64>,
    kernel_b_prime: Vec<f64>,
    iterations: usize,
    btv_radius: usize,
    btv_alpha: f64,
}

impl TryFrom<ParamsRepr> for RefineParams {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = RefineParams {
            beta: r.beta,
            lambda: r.lambda,
            kernel_b: Kernel::new(KERNEL_SIZE, r.kernel_b)?,
            kernel_b_prime: Kernel::new(KERNEL_SIZE, r.kernel_b_prime)?,
            iterations: r.iterations,
            btv_radius: r.btv_radius,
            btv_alpha: r.btv_alpha,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<RefineParams> for ParamsRepr {
    fn from(p: RefineParams) -> Self {
        ParamsRepr {
            beta: p.beta,
            lambda: p.lambda,
            kernel_b: p.kernel_b.weights().to_vec(),
            kernel_b_prime: p.kernel_b_prime.weights().to_vec(),
            iterations: p.iterations,
            btv_radius: p.btv_radius,
            btv_alpha: p.btv_alpha,
        }
    }
}

impl Default for ParamsRepr {
    fn default() -> Self {
        RefineParams::default().into()
    }
}

impl Default for RefineParams {
    /// Gaussian `B` (sigma 1), `B' = flip(B)`, beta = lambda = 0.05, 20 iterations, P = 2, alpha = 0.7.
    fn default() -> Self {
        let b = Kernel::gaussian(KERNEL_SIZE, 1.0);
        RefineParams {
            beta: 0.05,
            lambda: 0.05,
            kernel_b_prime: b.flip(),
            kernel_b: b,
            iterations: 20,
            btv_radius: 2,
            btv_alpha: 0.7,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_b.size() != KERNEL_SIZE || self.kernel_b_prime.size() != KERNEL_SIZE {
            return Err(Error::InvalidArgument(format!("kernels must be {KERNEL_SIZE}x{KERNEL_SIZE}")));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta {} must be positive", self.beta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {} must be non-negative", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.btv_radius == 0 {
            return Err(Error::InvalidArgument("btv_radius must be >= 1".into()));
        }
        if !(self.btv_alpha > 0.0 && self.btv_alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("btv_alpha {} outside (0, 1)", self.btv_alpha)));
        }
        Ok(())
    }
}

/// Subgradient of the bilateral TV objective (with `sgn(0) = 0`).
///
/// Each term `|x_p - x_q(p)|` pushes `+sgn` onto `p` and `-sgn` onto `q(p)`;
/// away from the border this is `sgn(x - S x) - S^T sgn(x - S x)`. Border
/// targets clamp, so the result stays the exact subgradient there too.
pub fn btv_gradient(x: &Plane, radius: usize, alpha: f64) -> Plane {
    let (w, h) = x.dims();
    let p = radius as isize;
    let mut grad = vec![0.0; w * h];
    let data = x.data();
    for m in -p..=p {
        for l in -p..=p {
            if l == 0 && m == 0 {
                continue;
            }
            let weight = powi(alpha, (l.unsigned_abs() + m.unsigned_abs()) as i32);
            let cols: Vec<usize> = (0..w as isize).map(|i| clamp_index(i - l, w)).collect();
            for j in 0..h {
                let qj = clamp_index(j as isize - m, h);
                let row = j * w;
                let qrow = qj * w;
                for (i, &qi) in cols.iter().enumerate() {
                    let s = sgn(data[row + i] - data[qrow + qi]);
                    if s != 0.0 {
                        grad[row + i] += weight * s;
                        grad[qrow + qi] -= weight * s;
                    }
                }
            }
        }
    }
    Plane::new(w, h, grad).expect("finite gradient")
}

fn powi(base: f64, exp: i32) -> f64 {
    (0..exp).fold(1.0, |acc, _| acc * base)
}

/// The BTV objective itself, `U(x)`.
pub fn btv_objective(x: &Plane, radius: usize, alpha: f64) -> f64 {
    let (w, h) = x.dims();
    let p = radius as isize;
    let mut total = 0.0;
    for m in -p..=p {
        for l in -p..=p {
            if l == 0 && m == 0 {
                continue;
            }
            let weight = powi(alpha, (l.unsigned_abs() + m.unsigned_abs()) as i32);
            for j in 0..h {
                for i in 0..w {
                    let q = x.get_clamped(i as isize - l, j as isize - m);
                    total += weight * (x.get(i, j) - q).abs();
                }
            }
        }
    }
    total
}

fn check_dims(x_n: &Image, x_0: &Image, a: &ContributionMap) {
    assert_eq!(x_n.dims(), x_0.dims(), "x_n and x_0 differ in size");
    assert_eq!(x_n.dims(), a.dims(), "count map differs in size");
}

/// Unclamped update `Delta X = X_{n+1} - X_n` before clamping.
pub fn update(x_n: &Image, x_0: &Image, a: &ContributionMap, p: &RefineParams) -> Plane {
    update_with(x_n, x_0, a, p, COUNT_PLACEMENT)
}

pub fn update_with(x_n: &Image, x_0: &Image, a: &ContributionMap, p: &RefineParams, placement: CountPlacement) -> Plane {
    check_dims(x_n, x_0, a);
    let blurred = convolve(x_n.plane(), &p.kernel_b);
    let counts = a.counts();
    let (w, h) = x_n.dims();
    let mut signs = Vec::with_capacity(w * h);
    for ((&bx, &x0), &c) in blurred.data().iter().zip(x_0.data()).zip(counts) {
        let c = f64::from(c);
        let s = sgn(c * bx - c * x0);
        signs.push(match placement {
            CountPlacement::BeforeBackProjection => c * s,
            CountPlacement::AfterBackProjection => s,
        });
    }
    let signs = Plane::new(w, h, signs).expect("finite signs");
    let mut data_grad = convolve(&signs, &p.kernel_b_prime);
    if placement == CountPlacement::AfterBackProjection {
        for (g, &c) in data_grad.data_mut().iter_mut().zip(counts) {
            *g *= f64::from(c);
        }
    }
    let reg = if p.lambda != 0.0 { Some(btv_gradient(x_n.plane(), p.btv_radius, p.btv_alpha)) } else { None };
    let mut delta = data_grad;
    for (i, d) in delta.data_mut().iter_mut().enumerate() {
        let r = reg.as_ref().map_or(0.0, |g| g.data()[i]);
        *d = -p.beta * (*d + p.lambda * r);
    }
    delta
}

/// One refinement step; the result is clamped to `[0, 1]`.
pub fn refine_step(x_n: &Image, x_0: &Image, a: &ContributionMap, p: &RefineParams) -> Image {
    let delta = update(x_n, x_0, a, p);
    Image::clamped(x_n.plane().zip_map(&delta, |x, d| x + d))
}

/// Runs `p.iterations` steps starting from `x_0`.
pub fn reconstruct(x_0: &Image, a: &ContributionMap, p: &RefineParams) -> Image {
    let mut x = x_0.clone();
    for _ in 0..p.iterations {
        x = refine_step(&x, x_0, a, p);
    }
    x
}

/// `|| A . (B * x) - A . x_0 ||_1`
pub fn data_residual_l1(x: &Image, x_0: &Image, a: &ContributionMap, b: &Kernel) -> f64 {
    let blurred = convolve(x.plane(), b);
    blurred
        .data()
        .iter()
        .zip(x_0.data())
        .zip(a.counts())
        .map(|((&bx, &x0), &c)| (f64::from(c) * bx - f64::from(c) * x0).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut r = lcg(seed);
        Image::from_fn(w, h, |_, _| r())
    }

    #[test]
    fn btv_of_constant_is_zero() {
        let g = btv_gradient(&Plane::filled(7, 6, 0.4), 2, 0.7);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn btv_impulse_radius_one() {
        let mut x = Plane::filled(7, 7, 0.0);
        x.set(3, 3, 1.0);
        let alpha = 0.5;
        let g = btv_gradient(&x, 1, alpha);
        // impulse: each of the 8 offsets contributes +w from its own term and
        // +w from the neighbour term that points at it
        let expect_center = 2.0 * (4.0 * alpha + 4.0 * alpha * alpha);
        assert!((g.get(3, 3) - expect_center).abs() < 1e-12);
        // axial neighbour: one term -w (x_nb - x_c < 0), one term -w where it is the target
        assert!((g.get(4, 3) + 2.0 * alpha).abs() < 1e-12);
        assert!((g.get(4, 4) + 2.0 * alpha * alpha).abs() < 1e-12);
        let total: f64 = g.data().iter().sum();
        assert!(total.abs() < 1e-12);
        for (i, &v) in g.data().iter().enumerate() {
            let (xx, yy) = (i % 7, i / 7);
            if (xx as isize - 3).abs() > 1 || (yy as isize - 3).abs() > 1 {
                assert_eq!(v, 0.0);
            }
        }
    }

    /// True when a difference term involving pixel `(i, j)` between two
    /// distinct pixels is within 1e-6 of zero.
    fn touches_kink(x: &Plane, radius: isize, i: usize, j: usize) -> bool {
        let (w, h) = x.dims();
        for m in -radius..=radius {
            for l in -radius..=radius {
                if (l, m) == (0, 0) {
                    continue;
                }
                for pj in 0..h {
                    for pi in 0..w {
                        let (qi, qj) = (clamp_index(pi as isize - l, w), clamp_index(pj as isize - m, h));
                        let involves = (pi, pj) == (i, j) || (qi, qj) == (i, j);
                        if involves && (pi, pj) != (qi, qj) && (x.get(pi, pj) - x.get(qi, qj)).abs() < 1e-6 {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn btv_matches_finite_differences() {
        let h = 1e-7;
        for seed in 0..5 {
            let x = random_image(8, 8, seed).into_plane();
            let g = btv_gradient(&x, 2, 0.7);
            for idx in 0..64 {
                let (i, j) = (idx % 8, idx / 8);
                let near_kink = touches_kink(&x, 2, i, j);
                if near_kink {
                    continue;
                }
                let mut xp = x.clone();
                xp.data_mut()[idx] += h;
                let mut xm = x.clone();
                xm.data_mut()[idx] -= h;
                let fd = (btv_objective(&xp, 2, 0.7) - btv_objective(&xm, 2, 0.7)) / (2.0 * h);
                assert!((fd - g.data()[idx]).abs() < 1e-4, "seed {seed} px {idx}: {fd} vs {}", g.data()[idx]);
            }
        }
    }

    #[test]
    fn fixed_point_with_delta_kernels() {
        let x = random_image(6, 6, 3);
        let p = RefineParams {
            lambda: 0.0,
            kernel_b: Kernel::delta(5),
            kernel_b_prime: Kernel::delta(5),
            ..RefineParams::default()
        };
        let a = ContributionMap::uniform(6, 6, 2);
        assert_eq!(refine_step(&x, &x, &a, &p), x);
        assert_eq!(reconstruct(&x, &a, &RefineParams { iterations: 7, ..p }), x);
    }

    #[test]
    fn zero_counts_and_constant_image_is_fixed() {
        let x = Image::filled(6, 6, 0.3);
        let x0 = random_image(6, 6, 4);
        let a = ContributionMap::uniform(6, 6, 0);
        assert_eq!(refine_step(&x, &x0, &a, &RefineParams::default()), x);
    }

    #[test]
    fn delta_kernel_step_matches_scalar_formula() {
        let x0 = random_image(4, 4, 5);
        let xn = random_image(4, 4, 6);
        let p = RefineParams { kernel_b: Kernel::delta(5), kernel_b_prime: Kernel::delta(5), beta: 0.02, lambda: 0.3, ..RefineParams::default() };
        let a = ContributionMap::uniform(4, 4, 1);
        let btv = btv_gradient(xn.plane(), p.btv_radius, p.btv_alpha);
        let next = refine_step(&xn, &x0, &a, &p);
        for i in 0..16 {
            let want = (xn.data()[i] - p.beta * sgn(xn.data()[i] - x0.data()[i]) - p.beta * p.lambda * btv.data()[i]).clamp(0.0, 1.0);
            assert!((next.data()[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn update_is_linear_in_beta() {
        let x0 = random_image(8, 8, 7);
        let xn = random_image(8, 8, 8);
        let mut counts = Vec::new();
        let mut r = lcg(9);
        for _ in 0..64 {
            counts.push((r() * 3.0) as u32);
        }
        let a = ContributionMap::new(8, 8, counts).unwrap();
        let p = RefineParams { beta: 0.013, ..RefineParams::default() };
        let d1 = update(&xn, &x0, &a, &p);
        let d2 = update(&xn, &x0, &a, &RefineParams { beta: 0.026, ..p });
        for (u, v) in d1.data().iter().zip(d2.data()) {
            assert_eq!(2.0 * u, *v);
        }
    }

    #[test]
    fn count_placement_only_matters_where_counts_vary() {
        let x0 = random_image(8, 8, 10);
        let xn = random_image(8, 8, 11);
        let a = ContributionMap::uniform(8, 8, 1);
        let p = RefineParams::default();
        assert_eq!(
            update_with(&xn, &x0, &a, &p, CountPlacement::BeforeBackProjection),
            update_with(&xn, &x0, &a, &p, CountPlacement::AfterBackProjection)
        );
    }

    #[test]
    fn params_validation_and_json_shape() {
        assert!(RefineParams::default().validate().is_ok());
        assert!(RefineParams { btv_alpha: 1.0, ..RefineParams::default() }.validate().is_err());
        assert!(RefineParams { iterations: 0, ..RefineParams::default() }.validate().is_err());
        assert!(RefineParams { kernel_b: Kernel::delta(3), ..RefineParams::default() }.validate().is_err());
    }
}
