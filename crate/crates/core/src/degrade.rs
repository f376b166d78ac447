//! Synthetic low-resolution stacks: translate, blur, decimate, add noise.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{convolve, decimate_plane, translate, Image, Interpolation, Kernel, Shift};
use crate::rng;

/// Forward model mapping one HR image to `shifts.len()` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingModel {
    pub blur: Kernel,
    /// Decimation factor.
    pub r: usize,
    /// Standard deviation of additive Gaussian noise, in `[0, 1]` intensity units.
    pub noise_sigma: f64,
    /// Per-frame translations in HR pixels.
    pub shifts: Vec<Shift>,
}

impl ImagingModel {
    /// Gaussian blur (sigma 1, 5x5), `r` = 2, noise 0.01 and `n` random shifts.
    pub fn ad_default(n: usize, seed: u64) -> Self {
        ImagingModel {
            blur: Kernel::gaussian(5, 1.0),
            r: 2,
            noise_sigma: 0.01,
            shifts: default_ad_shifts(n, 2, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidArgument("decimation factor r must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.noise_sigma) {
            return Err(Error::InvalidArgument(format!("noise_sigma {} outside [0, 0.5)", self.noise_sigma)));
        }
        if self.shifts.is_empty() {
            return Err(Error::InvalidArgument("imaging model needs at least one shift".into()));
        }
        if self.shifts.iter().any(|s| !s.dx.is_finite() || !s.dy.is_finite()) {
            return Err(Error::InvalidArgument("non-finite shift".into()));
        }
        Ok(())
    }
}

/// `N` low-resolution observations of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneStack {
    pub frames: Vec<Image>,
    /// Alignment shifts in LR pixels: the translation that maps frame `i`
    /// onto frame 0, i.e. the same convention [`crate::register`] returns.
    pub true_shifts: Option<Vec<Shift>>,
    pub reference_hr: Option<Image>,
}

impl SceneStack {
    pub fn new(frames: Vec<Image>, true_shifts: Option<Vec<Shift>>, reference_hr: Option<Image>) -> Result<Self> {
        let stack = SceneStack { frames, true_shifts, reference_hr };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("scene has no frames".into()))?;
        if let Some(i) = self.frames.iter().position(|f| f.dims() != first.dims()) {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} is {:?}, frame 0 is {:?}",
                self.frames[i].dims(),
                first.dims()
            )));
        }
        if let Some(s) = &self.true_shifts {
            if s.len() != self.frames.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} shifts for {} frames",
                    s.len(),
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Frame `i` is `clamp(decimate(blur * translate(hr, s_i), r) + noise_i)`.
///
/// `hr` is center-cropped to a multiple of `r` first. Noise for frame `i` is
/// drawn from the stream `(seed, i)`.
pub fn degrade_scene(hr: &Image, model: &ImagingModel, seed: u64) -> Result<SceneStack> {
    model.validate()?;
    let r = model.r;
    if hr.width() < r || hr.height() < r {
        return Err(Error::TooSmall(format!(
            "{}x{} HR image is smaller than the decimation factor {r}",
            hr.width(),
            hr.height()
        )));
    }
    let hr = hr.crop_to_multiple(r);
    let (w, h) = hr.dims();
    if let Some((i, s)) = model.shifts.iter().enumerate().find(|(_, s)| !s.is_within(w, h)) {
        return Err(Error::TooSmall(format!(
            "shift {i} ({}, {}) is too large for a {w}x{h} HR image",
            s.dx, s.dy
        )));
    }
    let noise = if model.noise_sigma > 0.0 {
        Some(Normal::new(0.0, model.noise_sigma).map_err(|e| Error::InvalidArgument(format!("{e}")))?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(model.shifts.len());
    for (i, &s) in model.shifts.iter().enumerate() {
        let moved = translate(&hr, s, Interpolation::Bilinear);
        let mut lr = decimate_plane(&convolve(moved.plane(), &model.blur), r);
        if let Some(dist) = &noise {
            let mut rng = rng::stream(seed, &[i as u64]);
            for v in lr.data_mut() {
                *v += dist.sample(&mut rng);
            }
        }
        frames.push(Image::clamped(lr));
    }
    let true_shifts = model.shifts.iter().map(|s| s.scaled(-1.0 / r as f64)).collect();
    Ok(SceneStack { frames, true_shifts: Some(true_shifts), reference_hr: Some(hr) })
}

/// `n` shifts in HR pixels, uniform in `[0, r)^2`; the first is always zero.
pub fn default_ad_shifts(n: usize, r: usize, seed: u64) -> Vec<Shift> {
    assert!(n >= 1, "need at least one shift");
    let mut rng = rng::stream(seed, &[0x5348_4946_54]);
    let hi = r as f64;
    let mut shifts = Vec::with_capacity(n);
    shifts.push(Shift::ZERO);
    for _ in 1..n {
        let dx = rng.random_range(0.0..hi);
        let dy = rng.random_range(0.0..hi);
        shifts.push(Shift::new(dx, dy));
    }
    shifts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use crate::raster::decimate;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| (x as f64 + 2.0 * y as f64) / (w as f64 + 2.0 * h as f64))
    }

    #[test]
    fn identity_model_is_lossless() {
        let hr = ramp(16, 12);
        let model = ImagingModel { blur: Kernel::delta(5), r: 1, noise_sigma: 0.0, shifts: alloc::vec![Shift::ZERO] };
        let s = degrade_scene(&hr, &model, 3).unwrap();
        assert_eq!(s.frames, alloc::vec![hr.clone()]);
        assert_eq!(s.reference_hr, Some(hr));
        assert_eq!(s.true_shifts, Some(alloc::vec![Shift::ZERO]));
    }

    #[test]
    fn decimation_only() {
        let hr = ramp(16, 12);
        let model = ImagingModel { blur: Kernel::delta(5), r: 2, noise_sigma: 0.0, shifts: alloc::vec![Shift::ZERO] };
        let s = degrade_scene(&hr, &model, 3).unwrap();
        assert_eq!(s.frames[0], decimate(&hr, 2).unwrap());
    }

    #[test]
    fn crops_to_multiple_and_sizes_frames() {
        let hr = ramp(17, 13);
        let model = ImagingModel::ad_default(4, 1);
        let s = degrade_scene(&hr, &model, 9).unwrap();
        assert_eq!(s.reference_hr.as_ref().unwrap().dims(), (16, 12));
        assert!(s.frames.iter().all(|f| f.dims() == (8, 6)));
    }

    #[test]
    fn too_small_is_rejected() {
        let hr = Image::filled(1, 1, 0.5);
        let model = ImagingModel::ad_default(4, 1);
        assert!(matches!(degrade_scene(&hr, &model, 0), Err(Error::TooSmall(_))));
    }

    #[test]
    fn noise_is_reproducible_and_independent_per_frame() {
        let hr = Image::filled(32, 32, 0.5);
        let model = ImagingModel {
            blur: Kernel::delta(1),
            r: 2,
            noise_sigma: 0.05,
            shifts: alloc::vec![Shift::ZERO, Shift::ZERO],
        };
        let a = degrade_scene(&hr, &model, 42).unwrap();
        let b = degrade_scene(&hr, &model, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.frames[0], a.frames[1]);
        let c = degrade_scene(&hr, &model, 43).unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
        let sd = math::sqrt(a.frames[0].data().iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / 256.0);
        assert!((sd - 0.05).abs() < 0.01, "{sd}");
    }

    #[test]
    fn ad_shifts_contract() {
        assert_eq!(default_ad_shifts(1, 2, 5), alloc::vec![Shift::ZERO]);
        let s = default_ad_shifts(4, 2, 5);
        assert_eq!(s, default_ad_shifts(4, 2, 5));
        assert_eq!(s[0], Shift::ZERO);
        for sh in &s {
            assert!((0.0..2.0).contains(&sh.dx) && (0.0..2.0).contains(&sh.dy));
        }
        assert_ne!(s, default_ad_shifts(4, 2, 6));
    }

    #[test]
    fn model_validation() {
        let mut m = ImagingModel::ad_default(2, 0);
        m.noise_sigma = 0.5;
        assert!(m.validate().is_err());
        m.noise_sigma = 0.0;
        m.shifts.clear();
        assert!(m.validate().is_err());
        m.shifts.push(Shift::ZERO);
        m.r = 0;
        assert!(m.validate().is_err());
    }
}
