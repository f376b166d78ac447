//! Stage composition: enhance, register, fuse, refine.
//!
//! Registration runs on the original frames by default and the shifts are
//! scaled to the enhanced grid; `register_enhanced` registers the enhanced
//! frames instead. Each stage is public so callers can time or replace it.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::degrade::SceneStack;
use crate::enhance::{enhance_stack, Enhancer};
use crate::error::{Error, Result};
use crate::fuse::{median_shift_and_add, scale_shifts_by, ContributionMap};
use crate::metrics;
use crate::raster::{resample, resize, Image, ResampleMethod, Shift};
use crate::refine::{reconstruct, RefineParams};
use crate::register::register_frames;

/// Fusion factor of the shift-and-add stage.
pub const FUSE_FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Register the enhanced frames instead of the originals.
    #[serde(default)]
    pub register_enhanced: bool,
    /// Stop after fusion.
    #[serde(default)]
    pub skip_refine: bool,
    /// Shifts in low-resolution pixels; bypasses registration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Shift>>,
    #[serde(default = "default_fuse_factor")]
    pub fuse_factor: usize,
}

fn default_fuse_factor() -> usize {
    FUSE_FACTOR
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { register_enhanced: false, skip_refine: false, shifts: None, fuse_factor: FUSE_FACTOR }
    }
}

/// Everything up to and including fusion; independent of the refinement parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    /// Shifts in low-resolution pixels.
    pub shifts: Vec<Shift>,
    /// Magnification of the enhancer (1 without one).
    pub enhance_scale: usize,
    pub x0: Image,
    pub counts: ContributionMap,
}

/// Low-resolution shifts: the override, or registration of the chosen frames.
pub fn estimate_shifts(frames: &[Image], enhanced: Option<&[Image]>, enhance_scale: usize, cfg: &PipelineConfig) -> Result<Vec<Shift>> {
    if let Some(s) = &cfg.shifts {
        if s.len() != frames.len() {
            return Err(Error::DimensionMismatch(alloc::format!("{} shifts for {} frames", s.len(), frames.len())));
        }
        return Ok(s.clone());
    }
    match enhanced {
        Some(e) if cfg.register_enhanced => Ok(scale_shifts_by(&register_frames(e)?, 1.0 / enhance_scale as f64)),
        _ => register_frames(frames),
    }
}

/// Enhances (optionally), registers and fuses one stack.
pub fn fuse_stack(stack: &SceneStack, enhancer: Option<&mut dyn Enhancer>, cfg: &PipelineConfig) -> Result<Fused> {
    stack.validate()?;
    if cfg.fuse_factor < 1 {
        return Err(Error::InvalidArgument("fuse_factor must be >= 1".into()));
    }
    let (enhanced, scale) = match enhancer {
        Some(e) => {
            let s = e.scale();
            (Some(enhance_stack(e, &stack.frames)?), s)
        }
        None => (None, 1),
    };
    let shifts = estimate_shifts(&stack.frames, enhanced.as_deref(), scale, cfg)?;
    let grid = enhanced.as_deref().unwrap_or(&stack.frames);
    let (x0, counts) = median_shift_and_add(grid, &scale_shifts_by(&shifts, scale as f64), cfg.fuse_factor)?;
    Ok(Fused { shifts, enhance_scale: scale, x0, counts })
}

/// Applies the refinement (unless skipped) to a fused estimate.
pub fn finish(fused: &Fused, params: &RefineParams, cfg: &PipelineConfig) -> Result<Image> {
    if cfg.skip_refine {
        return Ok(fused.x0.clone());
    }
    params.validate()?;
    Ok(reconstruct(&fused.x0, &fused.counts, params))
}

/// Full run on one stack.
pub fn run(stack: &SceneStack, enhancer: Option<&mut dyn Enhancer>, params: &RefineParams, cfg: &PipelineConfig) -> Result<(Image, Fused)> {
    let fused = fuse_stack(stack, enhancer, cfg)?;
    let out = finish(&fused, params, cfg)?;
    Ok((out, fused))
}

/// Bicubic upscale of the first frame.
pub fn single_frame_baseline(stack: &SceneStack, factor: usize) -> Result<Image> {
    let f = stack.frames.first().ok_or_else(|| Error::InvalidArgument("empty stack".into()))?;
    Ok(resample(f, factor as f64, ResampleMethod::Bicubic))
}

/// Brings an output to the reference size with bicubic resampling.
pub fn to_reference_size(img: &Image, reference: &Image) -> Image {
    let (w, h) = reference.dims();
    resize(img, w, h, ResampleMethod::Bicubic)
}

/// A training or evaluation scene with its genome-independent stages cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScene {
    pub fused: Fused,
    pub reference: Image,
}

impl PreparedScene {
    pub fn prepare(stack: &SceneStack, enhancer: Option<&mut dyn Enhancer>, cfg: &PipelineConfig) -> Result<Self> {
        let reference = stack
            .reference_hr
            .clone()
            .ok_or_else(|| Error::InvalidArgument("scene has no reference image".into()))?;
        let fused = fuse_stack(stack, enhancer, cfg)?;
        Ok(PreparedScene { fused, reference })
    }

    pub fn output(&self, params: &RefineParams) -> Image {
        to_reference_size(&reconstruct(&self.fused.x0, &self.fused.counts, params), &self.reference)
    }

    pub fn psnr_hf(&self, params: &RefineParams) -> Result<f64> {
        metrics::psnr_hf(&self.output(params), &self.reference)
    }
}

/// Arithmetic mean of per-scene scores.
pub fn mean_score(scores: &[f64]) -> Option<f64> {
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}
