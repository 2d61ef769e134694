use super::grid::TileGrid;
use crate::error::{Error, Result};
use crate::image::ImageF;

/// Mirror index without repeating the edge sample; tiles repeatedly when the
/// pad exceeds the extent. A length-1 axis always maps to 0.
#[inline]
pub(crate) fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Pads `img` on the bottom and right to the grid's padded size.
pub fn pad_reflect(img: &ImageF, grid: &TileGrid) -> Result<ImageF> {
    let (h, w) = (img.height(), img.width());
    if grid.padded_height < h || grid.padded_width < w {
        return Err(Error::InvalidArgument(format!(
            "padded size {}x{} smaller than image {w}x{h}",
            grid.padded_width, grid.padded_height
        )));
    }
    if grid.padded_height == h && grid.padded_width == w {
        return Ok(img.clone());
    }
    ImageF::from_fn(
        grid.padded_width,
        grid.padded_height,
        img.space(),
        |c, y, x| img.get(c, reflect_index(y, h), reflect_index(x, w)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;
    use crate::tiler::compute_grid;

    fn grid_for(h: usize, w: usize, ph: usize, pw: usize) -> TileGrid {
        let mut g = compute_grid(h, w, 8, 8).unwrap();
        g.padded_height = ph;
        g.padded_width = pw;
        g
    }

    #[test]
    fn reflect_row() {
        let img = ImageF::new(3, 1, ColorSpace::Gray, vec![1.0, 2.0, 3.0]).unwrap();
        let out = pad_reflect(&img, &grid_for(1, 3, 1, 5)).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn no_padding_is_identity() {
        let img = ImageF::filled(8, 8, ColorSpace::Gray, 0.25).unwrap();
        assert_eq!(
            pad_reflect(&img, &compute_grid(8, 8, 8, 8).unwrap()).unwrap(),
            img
        );
    }

    #[test]
    fn single_column_repeats() {
        let img = ImageF::new(1, 2, ColorSpace::Gray, vec![0.1, 0.9]).unwrap();
        let out = pad_reflect(&img, &grid_for(2, 1, 2, 3)).unwrap();
        assert_eq!(out.data(), &[0.1, 0.1, 0.1, 0.9, 0.9, 0.9]);
    }

    #[test]
    fn long_pad_tiles_reflection() {
        let idx: Vec<usize> = (0..9).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(idx, vec![0, 1, 2, 1, 0, 1, 2, 1, 0]);
    }

    #[test]
    fn pad_smaller_than_image_rejected() {
        let img = ImageF::filled(8, 8, ColorSpace::Gray, 0.0).unwrap();
        assert!(pad_reflect(&img, &grid_for(8, 8, 4, 8)).is_err());
    }
}
