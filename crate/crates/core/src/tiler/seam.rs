use serde::Serialize;

use super::grid::TileGrid;
use crate::error::{Error, Result};
use crate::image::ImageF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeamReport {
    pub boundary_var: f64,
    pub interior_var: f64,
    pub ratio: f64,
    pub boundary_pixels: usize,
    pub interior_pixels: usize,
}

/// Interior boundary lines along one axis: patch starts `a*S` for `a >= 1`
/// and patch ends `a*S + P` that fall inside the image.
fn boundary_lines(extent: usize, count: usize, grid: &TileGrid) -> Vec<usize> {
    let mut lines: Vec<usize> = (0..count)
        .flat_map(|a| [a * grid.stride, a * grid.stride + grid.patch])
        .filter(|&l| l > 0 && l < extent)
        .collect();
    lines.sort_unstable();
    lines.dedup();
    lines
}

fn band_flags(extent: usize, lines: &[usize], band: usize) -> Vec<bool> {
    let mut flags = vec![false; extent];
    for &l in lines {
        for f in flags
            .iter_mut()
            .take((l + band).min(extent))
            .skip(l.saturating_sub(band))
        {
            *f = true;
        }
    }
    flags
}

fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Variance of the gradient magnitude near interior patch boundaries versus
/// everywhere else.
///
/// The gradient uses forward differences (zero past the last row/column)
/// and its magnitude pools all channels. A pixel is in the boundary band when
/// its row lies in `[L - band, L + band)` of a horizontal boundary line `L`,
/// or likewise for its column.
pub fn seam_energy(img: &ImageF, grid: &TileGrid, band: usize) -> Result<SeamReport> {
    let (h, w) = (img.height(), img.width());
    if grid.height != h || grid.width != w {
        return Err(Error::ShapeMismatch {
            left: img.shape_string(),
            right: format!("grid for {}x{}", grid.width, grid.height),
        });
    }
    let rows = band_flags(h, &boundary_lines(h, grid.rows, grid), band);
    let cols = band_flags(w, &boundary_lines(w, grid.cols, grid), band);
    let any_boundary = rows.iter().chain(&cols).any(|&f| f);

    let mut boundary = Vec::new();
    let mut interior = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut sq = 0.0;
            for c in 0..img.channels() {
                let v = img.get(c, y, x);
                let gx = if x + 1 < w {
                    img.get(c, y, x + 1) - v
                } else {
                    0.0
                };
                let gy = if y + 1 < h {
                    img.get(c, y + 1, x) - v
                } else {
                    0.0
                };
                sq += gx * gx + gy * gy;
            }
            let g = sq.sqrt();
            if rows[y] || cols[x] {
                boundary.push(g);
            } else {
                interior.push(g);
            }
        }
    }
    let interior_var = population_variance(&interior);
    if !any_boundary {
        return Ok(SeamReport {
            boundary_var: 0.0,
            interior_var,
            ratio: 0.0,
            boundary_pixels: 0,
            interior_pixels: interior.len(),
        });
    }
    let boundary_var = population_variance(&boundary);
    Ok(SeamReport {
        boundary_var,
        interior_var,
        ratio: boundary_var / (interior_var + 1e-12),
        boundary_pixels: boundary.len(),
        interior_pixels: interior.len(),
    })
}
