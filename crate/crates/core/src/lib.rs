//! Resolution-invariant tiled image translation with feather blending,
//! differentiable soft-histogram colour losses, and evaluation metrics.
//!
//! The per-patch translator is abstracted behind [`tiler::PatchOperator`] so
//! that any model (in-process or over the subprocess wire protocol) can be
//! plugged into the sliding-window engine.

pub mod cli;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod softhist;
pub mod tiler;

pub use error::{Error, Result};
pub use image::{ColorSpace, ImageF};
