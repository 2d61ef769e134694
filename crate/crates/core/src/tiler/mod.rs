//! Sliding-window patch inference with feathered blending.
//!
//! An input image is reflect-padded on the bottom/right so that a grid of
//! `P x P` patches at stride `S` covers it, every patch is translated by a
//! [`PatchOperator`], and the outputs are blended with a separable Hann mask:
//!
//! ```text
//! out = sum_i (y_i * M) / sum_i M      (per pixel, over covering patches)
//! ```
//!
//! The mask is floored at `epsilon` so the denominator never vanishes.

mod blend;
mod grid;
mod mask;
mod operators;
mod pad;
pub mod protocol;
mod seam;

pub use blend::{tile_translate, tile_translate_with, MaskKind, TileOptions};
pub use grid::{compute_grid, TileGrid};
pub use mask::{hann_mask, hann_window, FeatherMask};
pub use operators::{
    parse_operator, AlternatingOffset, IdentityColorize, LutColorize, PatchOperator, SubprocessOp,
    ToyConv,
};
pub use pad::pad_reflect;
pub use seam::{seam_energy, SeamReport};

pub const DEFAULT_PATCH: usize = 256;
pub const DEFAULT_STRIDE: usize = 240;
/// Stride giving the wider (34 px) overlap at `P = 256`.
pub const ALT_STRIDE: usize = 222;
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_SEAM_BAND: usize = 2;
