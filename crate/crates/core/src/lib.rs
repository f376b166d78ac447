//! Numerical core for multiple-image super-resolution.
//!
//! A stack of subpixel-shifted low-resolution frames is turned into a
//! high-resolution estimate in four stages:
//!
//! 1. every frame is upscaled 2x by a pluggable single-image [`enhance`]r,
//! 2. the *original* frames are [`register`]ed against frame 0 by phase
//!    correlation and the shifts are doubled,
//! 3. the enhanced frames are [`fuse`]d on a 2x finer grid by median
//!    shift-and-add, which also yields the per-pixel measurement counts,
//! 4. the fused image is iteratively refined ([`refine`]) with a sign-based
//!    data term through two learned 5x5 kernels plus a bilateral TV prior.
//!
//! The refinement hyper-parameters and kernels are tuned by the genetic
//! algorithm in [`evolve`]. [`degrade`] synthesizes test stacks from a
//! reference image and [`metrics`] scores reconstructions against it.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the external
//! enhancer protocol and the command line live in the `mfsr` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod degrade;
pub mod enhance;
pub mod error;
pub mod evolve;
pub mod fft;
pub mod fuse;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod refine;
pub mod register;
pub mod rng;
pub mod synth;

pub use crate::error::{Error, Result};
pub use crate::raster::{Image, Kernel, Plane, Shift};
