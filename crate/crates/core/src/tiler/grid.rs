use serde::Serialize;

use crate::error::{Error, Result};

/// Patch layout over a padded image. Origins are `(y, x)`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileGrid {
    pub patch: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    pub padded_height: usize,
    pub padded_width: usize,
    pub rows: usize,
    pub cols: usize,
    pub origins: Vec<(usize, usize)>,
}

impl TileGrid {
    pub fn overlap(&self) -> usize {
        self.patch - self.stride
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// Smallest `P + k*S >= extent`, `k >= 0`; returns `(padded, k)`.
fn padded_extent(extent: usize, patch: usize, stride: usize) -> (usize, usize) {
    let k = extent.saturating_sub(patch).div_ceil(stride);
    (patch + k * stride, k)
}

pub fn compute_grid(height: usize, width: usize, patch: usize, stride: usize) -> Result<TileGrid> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "zero-sized image {width}x{height}"
        )));
    }
    if patch < 8 {
        return Err(Error::InvalidArgument(format!(
            "patch size must be >= 8, got {patch}"
        )));
    }
    if stride == 0 || stride > patch {
        return Err(Error::InvalidArgument(format!(
            "stride must be in 1..={patch}, got {stride}"
        )));
    }
    let (padded_height, ky) = padded_extent(height, patch, stride);
    let (padded_width, kx) = padded_extent(width, patch, stride);
    let mut origins = Vec::with_capacity((ky + 1) * (kx + 1));
    for a in 0..=ky {
        for b in 0..=kx {
            origins.push((a * stride, b * stride));
        }
    }
    Ok(TileGrid {
        patch,
        stride,
        height,
        width,
        padded_height,
        padded_width,
        rows: ky + 1,
        cols: kx + 1,
        origins,
    })
}
