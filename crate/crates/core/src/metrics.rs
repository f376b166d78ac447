//! Full-reference quality metrics. Every score is "higher is more similar".
//!
//! IFC and VIF use the pixel-domain formulation (four Gaussian-pyramid
//! scales) rather than the wavelet GSM original; absolute values therefore
//! differ from wavelet implementations while the ordering behaviour matches.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::raster::{convolve, decimate_plane, Image, Kernel, Plane};

pub const PSNR_CAP_DB: f64 = 100.0;
const MSE_FLOOR: f64 = 1e-10;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const UIQI_WINDOW: usize = 8;
pub const HIGH_PASS_SIZE: usize = 7;
pub const HIGH_PASS_SIGMA: f64 = 1.5;
pub const LOCAL_STD_WINDOW: usize = 5;
pub const VIF_MIN_SIDE: usize = 32;
/// Channel noise variance: 2 on the 8-bit scale.
pub const VIF_NOISE_VAR: f64 = 2.0 / (255.0 * 255.0);
const VIF_EPS: f64 = 1e-10 / (255.0 * 255.0);

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn min_side(a: &Image, side: usize, what: &str) -> Result<()> {
    if a.width() < side || a.height() < side {
        return Err(Error::TooSmall(format!(
            "{what} needs at least {side}x{side}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &Plane, b: &Plane) -> f64 {
    let n = a.data().len() as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        (10.0 * math::log10(1.0 / mse)).min(PSNR_CAP_DB)
    }
}

/// `10 log10(1 / MSE)` for `[0, 1]` images, capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    Ok(psnr_from_mse(mse(a.plane(), b.plane())))
}

/// `img - G(img) + 0.5`, clamped; `G` is a 7x7 Gaussian with sigma 1.5.
pub fn high_pass(img: &Image) -> Image {
    let smooth = convolve(img.plane(), &Kernel::gaussian(HIGH_PASS_SIZE, HIGH_PASS_SIGMA));
    Image::clamped(img.plane().zip_map(&smooth, |v, s| v - s + 0.5))
}

/// PSNR between the high-pass responses.
pub fn psnr_hf(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    psnr(&high_pass(a), &high_pass(b))
}

/// Per-pixel standard deviation over a 5x5 replicate-padded window.
pub fn local_std(img: &Image) -> Plane {
    let p = img.plane();
    let r = (LOCAL_STD_WINDOW / 2) as isize;
    let n = (LOCAL_STD_WINDOW * LOCAL_STD_WINDOW) as f64;
    let mut window = Vec::with_capacity(LOCAL_STD_WINDOW * LOCAL_STD_WINDOW);
    Plane::from_fn(p.width(), p.height(), |x, y| {
        window.clear();
        for dy in -r..=r {
            for dx in -r..=r {
                window.push(p.get_clamped(x as isize + dx, y as isize + dy));
            }
        }
        let mean = window.iter().sum::<f64>() / n;
        math::sqrt(window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
    })
}

/// PSNR between local standard-deviation maps.
pub fn psnr_ls(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    Ok(psnr_from_mse(mse(&local_std(a), &local_std(b))))
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5).
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    min_side(a, SSIM_WINDOW, "SSIM")?;
    let k = Kernel::gaussian(SSIM_WINDOW, SSIM_SIGMA);
    let (pa, pb) = (a.plane(), b.plane());
    let mu_a = convolve(pa, &k);
    let mu_b = convolve(pb, &k);
    let aa = convolve(&pa.zip_map(pa, |x, y| x * y), &k);
    let bb = convolve(&pb.zip_map(pb, |x, y| x * y), &k);
    let ab = convolve(&pa.zip_map(pb, |x, y| x * y), &k);
    let r = SSIM_WINDOW / 2;
    let (w, h) = a.dims();
    let mut total = 0.0;
    let mut count = 0usize;
    for y in r..h - r {
        for x in r..w - r {
            let (ma, mb) = (mu_a.get(x, y), mu_b.get(x, y));
            let va = aa.get(x, y) - ma * ma;
            let vb = bb.get(x, y) - mb * mb;
            let cov = ab.get(x, y) - ma * mb;
            total += ssim_term(ma, mb, va, vb, cov);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn ssim_term(ma: f64, mb: f64, va: f64, vb: f64, cov: f64) -> f64 {
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

/// Mean universal quality index over all 8x8 windows (stride 1).
pub fn uiqi(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    min_side(a, UIQI_WINDOW, "UIQI")?;
    let (w, h) = a.dims();
    let n = (UIQI_WINDOW * UIQI_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - UIQI_WINDOW {
        for x0 in 0..=w - UIQI_WINDOW {
            // moments about the first pixel, so flat windows give exactly zero variance
            let (ra, rb) = (a.get(x0, y0), b.get(x0, y0));
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in y0..y0 + UIQI_WINDOW {
                for x in x0..x0 + UIQI_WINDOW {
                    let (da, db) = (a.get(x, y) - ra, b.get(x, y) - rb);
                    sa += da;
                    sb += db;
                    saa += da * da;
                    sbb += db * db;
                    sab += da * db;
                }
            }
            let (ma, mb) = (ra + sa / n, rb + sb / n);
            let va = ((saa - sa * sa / n) / (n - 1.0)).max(0.0);
            let vb = ((sbb - sb * sb / n) / (n - 1.0)).max(0.0);
            let cov = (sab - sa * sb / n) / (n - 1.0);
            total += quality_index(ma, mb, va, vb, cov);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Wang-Bovik `Q` for one window; flat windows score their luminance term.
pub fn quality_index(ma: f64, mb: f64, va: f64, vb: f64, cov: f64) -> f64 {
    let lum = ma * ma + mb * mb;
    let var = va + vb;
    if var == 0.0 {
        if ma == mb {
            return 1.0;
        }
        return 2.0 * ma * mb / lum;
    }
    if lum == 0.0 {
        return 0.0;
    }
    (2.0 * cov / var) * (2.0 * ma * mb / lum)
}

/// Numerator and denominator of pixel-domain VIF, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VifParts {
    pub numerator: f64,
    pub denominator: f64,
}

pub fn vif_parts(reference: &Image, distorted: &Image) -> Result<VifParts> {
    same_dims(reference, distorted)?;
    min_side(reference, VIF_MIN_SIDE, "VIF/IFC")?;
    let mut r = reference.plane().clone();
    let mut d = distorted.plane().clone();
    let mut num = 0.0;
    let mut den = 0.0;
    for scale in 1..=4u32 {
        let n = (1usize << (4 - scale + 1)) + 1;
        let win = Kernel::gaussian(n, n as f64 / 5.0);
        if scale > 1 {
            r = decimate_plane(&convolve(&r, &win), 2);
            d = decimate_plane(&convolve(&d, &win), 2);
        }
        let mu1 = convolve(&r, &win);
        let mu2 = convolve(&d, &win);
        let s11 = convolve(&r.zip_map(&r, |x, y| x * y), &win);
        let s22 = convolve(&d.zip_map(&d, |x, y| x * y), &win);
        let s12 = convolve(&r.zip_map(&d, |x, y| x * y), &win);
        for i in 0..mu1.data().len() {
            let (m1, m2) = (mu1.data()[i], mu2.data()[i]);
            let mut sigma1 = (s11.data()[i] - m1 * m1).max(0.0);
            let sigma2 = (s22.data()[i] - m2 * m2).max(0.0);
            let sigma12 = s12.data()[i] - m1 * m2;
            let (mut g, mut sv) = if sigma1 < VIF_EPS {
                sigma1 = 0.0;
                (0.0, sigma2)
            } else {
                let g = sigma12 / sigma1;
                (g, sigma2 - g * sigma12)
            };
            if sigma2 < VIF_EPS {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = sigma2;
                g = 0.0;
            }
            let sv = sv.max(0.0);
            num += math::log2(1.0 + g * g * sigma1 / (sv + VIF_NOISE_VAR));
            den += math::log2(1.0 + sigma1 / VIF_NOISE_VAR);
        }
    }
    Ok(VifParts { numerator: num, denominator: den })
}

/// Information content of the reference alone (the VIF denominator, bits).
pub fn vif_denominator(reference: &Image) -> Result<f64> {
    Ok(vif_parts(reference, reference)?.denominator)
}

/// Visual information fidelity; reference first, not symmetric.
pub fn vif(reference: &Image, distorted: &Image) -> Result<f64> {
    let p = vif_parts(reference, distorted)?;
    if p.denominator == 0.0 {
        // a flat reference carries no information to lose
        return Ok(if p.numerator == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(p.numerator / p.denominator)
}

/// Information fidelity criterion: the VIF numerator (bits). Reference first.
pub fn ifc(reference: &Image, distorted: &Image) -> Result<f64> {
    Ok(vif_parts(reference, distorted)?.numerator)
}

/// All seven scores for one (reference, candidate) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub psnr: f64,
    pub psnr_hf: f64,
    pub psnr_ls: f64,
    pub ssim: f64,
    pub uiqi: f64,
    pub ifc: f64,
    pub vif: f64,
}

impl MetricSet {
    pub fn compute(reference: &Image, candidate: &Image) -> Result<Self> {
        let parts = vif_parts(reference, candidate)?;
        let vif = if parts.denominator == 0.0 {
            if parts.numerator == 0.0 { 1.0 } else { 0.0 }
        } else {
            parts.numerator / parts.denominator
        };
        Ok(MetricSet {
            psnr: psnr(reference, candidate)?,
            psnr_hf: psnr_hf(reference, candidate)?,
            psnr_ls: psnr_ls(reference, candidate)?,
            ssim: ssim(reference, candidate)?,
            uiqi: uiqi(reference, candidate)?,
            ifc: parts.numerator,
            vif,
        })
    }

    pub fn mean(sets: &[MetricSet]) -> Option<MetricSet> {
        if sets.is_empty() {
            return None;
        }
        let n = sets.len() as f64;
        let avg = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        Some(MetricSet {
            psnr: avg(|m| m.psnr),
            psnr_hf: avg(|m| m.psnr_hf),
            psnr_ls: avg(|m| m.psnr_ls),
            ssim: avg(|m| m.ssim),
            uiqi: avg(|m| m.uiqi),
            ifc: avg(|m| m.ifc),
            vif: avg(|m| m.vif),
        })
    }
}
