use super::ImageF;
use crate::error::{Error, Result};

/// Joint min-max rescale of all samples to [0,1]. A constant image maps to
/// all zeros.
pub fn minmax_normalize(img: &ImageF) -> Result<ImageF> {
    let (min, max) = img
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    if range <= 0.0 {
        return img.map(img.space(), |_| 0.0);
    }
    img.map(img.space(), |v| ((v - min) / range).clamp(0.0, 1.0))
}

const EQ_BINS: usize = 256;

#[inline]
fn eq_bin(v: f64) -> usize {
    ((v * EQ_BINS as f64).floor().max(0.0) as usize).min(EQ_BINS - 1)
}

/// 256-bin histogram equalization of a single-channel image.
///
/// Each sample maps to `(CDF(bin) - CDF_min) / (1 - CDF_min)`, where
/// `CDF_min` is the CDF at the lowest occupied bin. Images with a single
/// occupied bin come back unchanged.
pub fn equalize_hist(img: &ImageF) -> Result<ImageF> {
    if img.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "equalize_hist expects 1 channel, got {}",
            img.channels()
        )));
    }
    let mut counts = [0usize; EQ_BINS];
    for &v in img.data() {
        counts[eq_bin(v)] += 1;
    }
    let total = img.data().len() as f64;
    let mut cdf = [0.0; EQ_BINS];
    let mut acc = 0usize;
    for (b, &c) in counts.iter().enumerate() {
        acc += c;
        cdf[b] = acc as f64 / total;
    }
    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let cdf_min = cdf[first];
    let denom = 1.0 - cdf_min;
    if denom <= 0.0 {
        return Ok(img.clone());
    }
    img.map(img.space(), |v| {
        ((cdf[eq_bin(v)] - cdf_min) / denom).clamp(0.0, 1.0)
    })
}

/// Per output sample, the (source index, weight) taps of a box filter whose
/// footprint is the output pixel's extent on the source axis.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = ((i + 1) as f64 * scale).min(n_in as f64);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            let mut taps = Vec::with_capacity(last - first);
            for j in first..last {
                let overlap = (hi.min((j + 1) as f64) - lo.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((j, overlap / (hi - lo)));
                }
            }
            taps
        })
        .collect()
}

/// Isotropic area-averaging downscale so that the long side is at most
/// `max_side`. Never upsamples.
pub fn clamp_long_side(img: &ImageF, max_side: usize) -> Result<ImageF> {
    if max_side == 0 {
        return Err(Error::InvalidArgument("max_side must be >= 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let long = w.max(h);
    if long <= max_side {
        return Ok(img.clone());
    }
    let scale = max_side as f64 / long as f64;
    let (new_w, new_h) = if w >= h {
        (max_side, ((h as f64 * scale).round() as usize).max(1))
    } else {
        (((w as f64 * scale).round() as usize).max(1), max_side)
    };
    let wx = area_weights(w, new_w);
    let wy = area_weights(h, new_h);
    let channels = img.channels();
    let mut out = Vec::with_capacity(new_w * new_h * channels);
    let mut rows = vec![0.0; h * new_w];
    for c in 0..channels {
        let plane = img.plane(c);
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            for (x, taps) in wx.iter().enumerate() {
                rows[y * new_w + x] = taps.iter().map(|&(j, t)| src[j] * t).sum();
            }
        }
        for taps in &wy {
            for x in 0..new_w {
                out.push(taps.iter().map(|&(j, t)| rows[j * new_w + x] * t).sum());
            }
        }
    }
    ImageF::new(new_w, new_h, img.space(), out)
}

/// Kolmogorov-Smirnov distance between the 256-bin hard-histogram CDF of
/// `samples` and the uniform CDF sampled at the same bin edges.
#[cfg(test)]
pub(crate) fn ks_to_uniform(samples: &[f64]) -> f64 {
    let mut counts = [0usize; EQ_BINS];
    for &v in samples {
        counts[eq_bin(v)] += 1;
    }
    let n = samples.len() as f64;
    let mut acc = 0usize;
    let mut d: f64 = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        acc += c;
        d = d.max((acc as f64 / n - (b + 1) as f64 / EQ_BINS as f64).abs());
    }
    d
}
