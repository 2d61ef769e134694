use log::debug;
use rayon::prelude::*;

use super::grid::{compute_grid, TileGrid};
use super::mask::{hann_mask, FeatherMask};
use super::operators::PatchOperator;
use super::pad::pad_reflect;
use super::{DEFAULT_EPSILON, DEFAULT_PATCH, DEFAULT_STRIDE};
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskKind {
    #[default]
    Hann,
    /// Constant weights: plain averaging in overlaps.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileOptions {
    pub patch: usize,
    pub stride: usize,
    pub epsilon: f64,
    pub mask: MaskKind,
    /// Worker threads for patch prediction; 0 uses the ambient rayon pool.
    pub threads: usize,
}

impl Default for TileOptions {
    fn default() -> Self {
        Self {
            patch: DEFAULT_PATCH,
            stride: DEFAULT_STRIDE,
            epsilon: DEFAULT_EPSILON,
            mask: MaskKind::Hann,
            threads: 0,
        }
    }
}

impl TileOptions {
    pub fn mask(&self) -> Result<FeatherMask> {
        match self.mask {
            MaskKind::Hann => hann_mask(self.patch, self.epsilon),
            MaskKind::Box => Ok(FeatherMask::uniform(self.patch)),
        }
    }
}

/// Hann-blended tiling with the given patch, stride and mask floor.
pub fn tile_translate(
    img: &ImageF,
    op: &dyn PatchOperator,
    patch: usize,
    stride: usize,
    epsilon: f64,
) -> Result<ImageF> {
    tile_translate_with(
        img,
        op,
        &TileOptions {
            patch,
            stride,
            epsilon,
            ..TileOptions::default()
        },
    )
}

fn extract_patch(padded: &ImageF, y0: usize, x0: usize, p: usize) -> Result<ImageF> {
    let pw = padded.width();
    let src = padded.data();
    let mut data = Vec::with_capacity(p * p);
    for y in y0..y0 + p {
        data.extend_from_slice(&src[y * pw + x0..y * pw + x0 + p]);
    }
    ImageF::new(p, p, ColorSpace::Gray, data)
}

fn run_patch(
    op: &dyn PatchOperator,
    padded: &ImageF,
    grid: &TileGrid,
    index: usize,
) -> Result<ImageF> {
    let (y0, x0) = grid.origins[index];
    let p = grid.patch;
    let wrap = |e: Error| Error::Operator {
        index,
        source: Box::new(e),
    };
    let patch = extract_patch(padded, y0, x0, p).map_err(wrap)?;
    let out = op.apply_indexed(index, &patch).map_err(wrap)?;
    if out.width() != p || out.height() != p || out.channels() != 3 {
        return Err(wrap(Error::ShapeMismatch {
            left: format!("{p}x{p}x3"),
            right: out.shape_string(),
        }));
    }
    Ok(out)
}

/// Translates a gray image patch by patch and feather-blends the results.
///
/// Patches of one grid row are predicted together (in parallel when the
/// operator allows it) and accumulated strictly in origin order, so the
/// output does not depend on the number of threads.
pub fn tile_translate_with(
    img: &ImageF,
    op: &dyn PatchOperator,
    opts: &TileOptions,
) -> Result<ImageF> {
    if img.channels() != 1 {
        return Err(Error::WrongSpace {
            expected: ColorSpace::Gray.name(),
            actual: img.space().name(),
        });
    }
    let (h, w) = (img.height(), img.width());
    let grid = compute_grid(h, w, opts.patch, opts.stride)?;
    let mask = opts.mask()?;
    let padded = pad_reflect(img, &grid)?;
    debug!(
        "tiling {w}x{h} -> padded {}x{}, {} patches of {} at stride {} with {}",
        grid.padded_width,
        grid.padded_height,
        grid.len(),
        grid.patch,
        grid.stride,
        op.name()
    );

    let pool = if opts.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let (ph, pw) = (grid.padded_height, grid.padded_width);
    let plane = ph * pw;
    let p = grid.patch;
    let mut num = vec![0.0; 3 * plane];
    let mut den = vec![0.0; plane];
    // Pixels covered by one patch take that patch's value directly, since
    // `(y * m) / m` is not always `y` in floating point.
    let mut hits = vec![0u32; plane];
    let mut first = vec![0.0; 3 * plane];

    for row in 0..grid.rows {
        let indices: Vec<usize> = (row * grid.cols..(row + 1) * grid.cols).collect();
        let outputs: Vec<Result<ImageF>> = if op.concurrent() {
            let predict = || {
                indices
                    .par_iter()
                    .map(|&i| run_patch(op, &padded, &grid, i))
                    .collect()
            };
            match &pool {
                Some(pool) => pool.install(predict),
                None => predict(),
            }
        } else {
            indices
                .iter()
                .map(|&i| run_patch(op, &padded, &grid, i))
                .collect()
        };
        for (&index, out) in indices.iter().zip(outputs) {
            let out = out?;
            let (y0, x0) = grid.origins[index];
            let od = out.data();
            for i in 0..p {
                let row_off = (y0 + i) * pw + x0;
                let mrow = &mask.weights[i * p..(i + 1) * p];
                let fresh: Vec<bool> = hits[row_off..row_off + p].iter().map(|&n| n == 0).collect();
                for (j, &m) in mrow.iter().enumerate() {
                    den[row_off + j] += m;
                    hits[row_off + j] += 1;
                }
                for c in 0..3 {
                    let src = &od[c * p * p + i * p..c * p * p + (i + 1) * p];
                    let base = c * plane + row_off;
                    for j in 0..p {
                        let v = src[j];
                        num[base + j] += v * mrow[j];
                        if fresh[j] {
                            first[base + j] = v;
                        }
                    }
                }
            }
        }
    }
    op.finish()?;

    let mut out = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let k = y * pw + x;
                out.push(if hits[k] == 1 {
                    first[c * plane + k]
                } else {
                    num[c * plane + k] / den[k]
                });
            }
        }
    }
    ImageF::new(w, h, ColorSpace::Srgb, out)
}
