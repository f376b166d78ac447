//! Per-frame enhancement ahead of registration and fusion.
//!
//! An enhancer maps a `w x h` frame to exactly `scale*w x scale*h`. The
//! built-in kinds are plain interpolators; the external kind (a learned
//! model in another process) is driven from the `mfsr` crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{resample, Image, ResampleMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancerKind {
    IdentityNearest,
    Bilinear,
    Bicubic,
    Lanczos3,
    External,
}

impl EnhancerKind {
    pub fn resample_method(self) -> Option<ResampleMethod> {
        match self {
            EnhancerKind::IdentityNearest => Some(ResampleMethod::Nearest),
            EnhancerKind::Bilinear => Some(ResampleMethod::Bilinear),
            EnhancerKind::Bicubic => Some(ResampleMethod::Bicubic),
            EnhancerKind::Lanczos3 => Some(ResampleMethod::Lanczos3),
            EnhancerKind::External => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancerSpec {
    pub kind: EnhancerKind,
    #[serde(default = "default_scale")]
    pub scale: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_command: Option<String>,
}

fn default_scale() -> usize {
    2
}

impl Default for EnhancerSpec {
    fn default() -> Self {
        EnhancerSpec { kind: EnhancerKind::Bicubic, scale: 2, external_command: None }
    }
}

impl EnhancerSpec {
    pub fn builtin(kind: EnhancerKind) -> Self {
        EnhancerSpec { kind, scale: 2, external_command: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(Error::InvalidArgument("enhancer scale must be >= 1".into()));
        }
        if self.kind == EnhancerKind::External && self.external_command.as_deref().is_none_or(str::is_empty) {
            return Err(Error::InvalidArgument("external enhancer needs a command".into()));
        }
        Ok(())
    }
}

pub trait Enhancer {
    fn scale(&self) -> usize;

    fn enhance(&mut self, frame: &Image) -> Result<Image>;

    /// Whether identical input always yields identical output.
    fn deterministic(&self) -> bool {
        true
    }
}

/// Interpolating enhancer backed by [`resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interpolator {
    pub method: ResampleMethod,
    pub scale: usize,
}

impl Interpolator {
    pub fn new(method: ResampleMethod, scale: usize) -> Self {
        Interpolator { method, scale }
    }

    pub fn from_spec(spec: &EnhancerSpec) -> Result<Self> {
        spec.validate()?;
        let method = spec
            .kind
            .resample_method()
            .ok_or_else(|| Error::InvalidArgument("external enhancer is not built in".into()))?;
        Ok(Interpolator { method, scale: spec.scale })
    }
}

impl Enhancer for Interpolator {
    fn scale(&self) -> usize {
        self.scale
    }

    fn enhance(&mut self, frame: &Image) -> Result<Image> {
        Ok(resample(frame, self.scale as f64, self.method))
    }
}

/// Enhances every frame and checks the size contract.
pub fn enhance_stack(enhancer: &mut dyn Enhancer, frames: &[Image]) -> Result<Vec<Image>> {
    let s = enhancer.scale();
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let out = enhancer.enhance(f).map_err(|e| e.at_frame(i))?;
            let want = (f.width() * s, f.height() * s);
            if out.dims() != want {
                return Err(Error::Enhancer(format!("expected {want:?}, got {:?}", out.dims())).at_frame(i));
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    struct Shrinker;

    impl Enhancer for Shrinker {
        fn scale(&self) -> usize {
            2
        }
        fn enhance(&mut self, frame: &Image) -> Result<Image> {
            Ok(frame.clone())
        }
    }

    #[test]
    fn nearest_doubles_pixels() {
        let f = synth::scene(10, 6, 1);
        let mut e = Interpolator::from_spec(&EnhancerSpec::builtin(EnhancerKind::IdentityNearest)).unwrap();
        let out = enhance_stack(&mut e, core::slice::from_ref(&f)).unwrap();
        assert_eq!(out[0].dims(), (20, 12));
        for y in 0..12 {
            for x in 0..20 {
                assert_eq!(out[0].get(x, y), f.get(x / 2, y / 2));
            }
        }
    }

    #[test]
    fn size_contract_enforced_with_frame_index() {
        let f = synth::scene(8, 8, 1);
        let err = enhance_stack(&mut Shrinker, &[f.clone(), f]).unwrap_err();
        assert!(matches!(err, Error::Frame { index: 0, .. }), "{err:?}");
    }

    #[test]
    fn spec_validation() {
        let mut s = EnhancerSpec::builtin(EnhancerKind::External);
        assert!(s.validate().is_err());
        s.external_command = Some("python enhance.py".into());
        assert!(s.validate().is_ok());
        assert!(Interpolator::from_spec(&s).is_err());
    }
}
