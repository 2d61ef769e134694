use crate::error::{Error, Result};

/// `P x P` blending weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatherMask {
    pub size: usize,
    pub epsilon: f64,
    pub weights: Vec<f64>,
}

impl FeatherMask {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }

    /// Uniform weights of one: plain averaging in overlaps.
    pub fn uniform(size: usize) -> Self {
        Self {
            size,
            epsilon: 1.0,
            weights: vec![1.0; size * size],
        }
    }
}

/// Symmetric Hann window `0.5 * (1 - cos(2 pi n / (P - 1)))`, mirrored so
/// that `w[n] == w[P-1-n]` exactly.
pub fn hann_window(size: usize) -> Vec<f64> {
    let denom = (size - 1) as f64;
    let mut w = vec![0.0; size];
    for n in 0..size.div_ceil(2) {
        let v = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / denom).cos());
        w[n] = v;
        w[size - 1 - n] = v;
    }
    w
}

/// Separable Hann mask floored at `epsilon`.
pub fn hann_mask(size: usize, epsilon: f64) -> Result<FeatherMask> {
    if size < 2 {
        return Err(Error::InvalidArgument(format!(
            "mask size must be >= 2, got {size}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mask floor must be in (0, 1), got {epsilon}"
        )));
    }
    let w = hann_window(size);
    let mut weights = Vec::with_capacity(size * size);
    for wi in &w {
        for wj in &w {
            weights.push((wi * wj).max(epsilon));
        }
    }
    Ok(FeatherMask {
        size,
        epsilon,
        weights,
    })
}
