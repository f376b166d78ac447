//! Files, processes and the command line around [`mfsr_core`].
//!
//! * [`io`]: grayscale PNG / PGM reading and writing, count-map dumps,
//! * [`formats`]: scene directories, shift files and JSON helpers,
//! * [`protocol`] and [`external`]: the `ENH/1` external enhancer protocol,
//! * [`cli`]: the `mfsr` subcommands.

pub mod cli;
pub mod error;
pub mod external;
pub mod formats;
pub mod io;
pub mod protocol;

pub use crate::error::{Error, Result};
pub use mfsr_core as core;
