//! Planar floating-point images, file I/O, colour conversions and the
//! preprocessing chain applied to NIR/RGB pairs.

mod color;
mod io;
mod preprocess;

pub use color::{hsv_to_rgb, linear_to_srgb, rgb_to_hsv, srgb_decode, srgb_encode, srgb_to_linear};
pub use io::{load_image, probe_bit_depth, save_image, BitDepth};
pub use preprocess::{clamp_long_side, equalize_hist, minmax_normalize};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    Srgb,
    LinearRgb,
    Hsv,
    Gray,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Srgb => "SRGB",
            ColorSpace::LinearRgb => "LinearRGB",
            ColorSpace::Hsv => "HSV",
            ColorSpace::Gray => "Gray",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

/// Planar image: channel `c`, row `y`, column `x` lives at
/// `data[c * width * height + y * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<f64>,
}

impl ImageF {
    pub fn new(width: usize, height: usize, space: ColorSpace, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero dimension {width}x{height}"
            )));
        }
        let expected = width * height * space.channels();
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "data length {} != {width}x{height}x{}",
                data.len(),
                space.channels()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            space,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, space: ColorSpace, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            space,
            vec![value; width * height * space.channels()],
        )
    }

    /// Builds an image by evaluating `f(channel, y, x)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * space.channels());
        for c in 0..space.channels() {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(width, height, space, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels())
    }

    pub fn same_shape(&self, other: &ImageF) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels() == other.channels()
    }

    pub fn ensure_same_shape(&self, other: &ImageF) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape_string(),
                right: other.shape_string(),
            })
        }
    }

    pub(crate) fn ensure_space(&self, expected: ColorSpace) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace {
                expected: expected.name(),
                actual: self.space.name(),
            })
        }
    }

    /// Applies `f` to every sample, re-validating finiteness.
    pub fn map(&self, space: ColorSpace, f: impl Fn(f64) -> f64) -> Result<Self> {
        if space.channels() != self.channels() {
            return Err(Error::InvalidArgument(format!(
                "cannot retag {}-channel image as {}",
                self.channels(),
                space.name()
            )));
        }
        Self::new(
            self.width,
            self.height,
            space,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Same samples, different tag. Channel count must agree.
    pub fn with_space(mut self, space: ColorSpace) -> Result<Self> {
        if space.channels() != self.channels() {
            return Err(Error::InvalidArgument(format!(
                "cannot retag {}-channel image as {}",
                self.channels(),
                space.name()
            )));
        }
        self.space = space;
        Ok(self)
    }

    /// Replicates a gray image into three identical channels.
    pub fn gray_to_rgb(&self) -> Result<Self> {
        self.ensure_space(ColorSpace::Gray)?;
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Self::new(self.width, self.height, ColorSpace::Srgb, data)
    }

    /// Copies the `w`x`h` window starting at (`y0`, `x0`).
    pub fn crop(&self, y0: usize, x0: usize, w: usize, h: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(w, h, self.space, |c, y, x| self.get(c, y0 + y, x0 + x))
    }
}
