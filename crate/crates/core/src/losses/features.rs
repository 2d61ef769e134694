use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::rng::XorShift64Star;

/// Maps an image to a flat feature vector.
///
/// Implementations must be deterministic and stateless after construction;
/// the output length may depend only on the input shape.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, img: &ImageF) -> Result<Vec<f64>>;
}

const MIN_SIDE: usize = 8;
const STD_FLOOR: f64 = 1e-6;
const NORM_FLOOR: f64 = 1e-12;

/// `(v - mean) / max(std, 1e-6)` with population statistics.
pub fn instance_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "instance_normalize needs at least 2 values, got {}",
            v.len()
        )));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(STD_FLOOR);
    Ok(v.iter().map(|x| (x - mean) / std).collect())
}

fn normalized_pair(
    a: &ImageF,
    b: &ImageF,
    fx: &dyn FeatureExtractor,
) -> Result<(Vec<f64>, Vec<f64>)> {
    a.ensure_same_shape(b)?;
    let fa = fx.extract(a)?;
    let fb = fx.extract(b)?;
    if fa.len() != fb.len() {
        return Err(Error::ShapeMismatch {
            left: format!("{} features {}", fx.name(), fa.len()),
            right: format!("{}", fb.len()),
        });
    }
    Ok((instance_normalize(&fa)?, instance_normalize(&fb)?))
}

/// Mean squared difference of instance-normalised features.
pub fn feature_l2(a: &ImageF, b: &ImageF, fx: &dyn FeatureExtractor) -> Result<f64> {
    let (u, w) = normalized_pair(a, b, fx)?;
    Ok(u.iter().zip(&w).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / u.len() as f64)
}

/// `1 - cos(u, w)` of instance-normalised features.
///
/// Identical feature vectors score 0. Otherwise a vector with norm below
/// 1e-12 scores 1.
pub fn feature_cosine(a: &ImageF, b: &ImageF, fx: &dyn FeatureExtractor) -> Result<f64> {
    let (u, w) = normalized_pair(a, b, fx)?;
    Ok(cosine_distance(&u, &w))
}

pub(crate) fn cosine_distance(u: &[f64], w: &[f64]) -> f64 {
    if u == w {
        return 0.0;
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < NORM_FLOOR || nw < NORM_FLOOR {
        return 1.0;
    }
    let dot: f64 = u.iter().zip(w).map(|(x, y)| x * y).sum();
    1.0 - (dot / (nu * nw)).clamp(-1.0, 1.0)
}

fn check_size(img: &ImageF) -> Result<()> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(Error::InvalidImage(format!(
            "feature extraction needs at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Non-overlapping `k x k` mean pooling over the `floor(h/k) x floor(w/k)`
/// complete blocks.
fn avg_pool(plane: &[f64], w: usize, h: usize, k: usize) -> Vec<f64> {
    let (pw, ph) = (w / k, h / k);
    let mut out = Vec::with_capacity(pw * ph);
    let inv = 1.0 / (k * k) as f64;
    for by in 0..ph {
        for bx in 0..pw {
            let mut s = 0.0;
            for y in by * k..(by + 1) * k {
                for x in bx * k..(bx + 1) * k {
                    s += plane[y * w + x];
                }
            }
            out.push(s * inv);
        }
    }
    out
}

/// Sobel gradient responses with replicated borders, mean-pooled 4x4.
///
/// Output: horizontal responses of every channel, then vertical responses of
/// every channel.
#[derive(Debug, Clone, Copy, Default)]
pub struct SobelExtractor;

impl SobelExtractor {
    const POOL: usize = 4;
}

impl FeatureExtractor for SobelExtractor {
    fn name(&self) -> &str {
        "sobel"
    }

    fn extract(&self, img: &ImageF) -> Result<Vec<f64>> {
        check_size(img)?;
        let (w, h) = (img.width(), img.height());
        let at = |p: &[f64], y: isize, x: isize| {
            let yy = y.clamp(0, h as isize - 1) as usize;
            let xx = x.clamp(0, w as isize - 1) as usize;
            p[yy * w + xx]
        };
        let mut horizontal = Vec::new();
        let mut vertical = Vec::new();
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for c in 0..img.channels() {
            let p = img.plane(c);
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let i = y as usize * w + x as usize;
                    gx[i] = (at(p, y - 1, x + 1) + 2.0 * at(p, y, x + 1) + at(p, y + 1, x + 1))
                        - (at(p, y - 1, x - 1) + 2.0 * at(p, y, x - 1) + at(p, y + 1, x - 1));
                    gy[i] = (at(p, y + 1, x - 1) + 2.0 * at(p, y + 1, x) + at(p, y + 1, x + 1))
                        - (at(p, y - 1, x - 1) + 2.0 * at(p, y - 1, x) + at(p, y - 1, x + 1));
                }
            }
            horizontal.extend(avg_pool(&gx, w, h, Self::POOL));
            vertical.extend(avg_pool(&gy, w, h, Self::POOL));
        }
        horizontal.extend(vertical);
        Ok(horizontal)
    }
}

pub const DEFAULT_RANDPROJ_SEED: u64 = 0x7113_6AF7;

/// Bank of 8 random 3x3 filters over all input channels, mean-pooled 8x8.
///
/// Weights are drawn from [`XorShift64Star`] seeded with `seed`, uniform in
/// [-1, 1), in the order filter, input channel (0..3), row, column. Gray
/// images use the channel-0 slice. Borders reflect without repeating the
/// edge sample. Output: pooled responses filter by filter.
#[derive(Debug, Clone)]
pub struct RandProjExtractor {
    seed: u64,
    weights: Vec<[[f64; 9]; 3]>,
}

impl RandProjExtractor {
    pub const FILTERS: usize = 8;
    const POOL: usize = 8;

    pub fn new(seed: u64) -> Self {
        let mut rng = XorShift64Star::new(seed);
        let weights = (0..Self::FILTERS)
            .map(|_| {
                let mut bank = [[0.0; 9]; 3];
                for taps in bank.iter_mut() {
                    for t in taps.iter_mut() {
                        *t = rng.uniform(-1.0, 1.0);
                    }
                }
                bank
            })
            .collect();
        Self { seed, weights }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for RandProjExtractor {
    fn default() -> Self {
        Self::new(DEFAULT_RANDPROJ_SEED)
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

impl FeatureExtractor for RandProjExtractor {
    fn name(&self) -> &str {
        "randproj"
    }

    fn extract(&self, img: &ImageF) -> Result<Vec<f64>> {
        check_size(img)?;
        let (w, h) = (img.width(), img.height());
        let mut out = Vec::new();
        let mut resp = vec![0.0; w * h];
        for bank in &self.weights {
            resp.iter_mut().for_each(|v| *v = 0.0);
            for (c, taps) in bank.iter().enumerate().take(img.channels()) {
                let p = img.plane(c);
                for y in 0..h {
                    for x in 0..w {
                        let mut s = 0.0;
                        for dy in 0..3 {
                            let yy = reflect(y as isize + dy as isize - 1, h);
                            for dx in 0..3 {
                                let xx = reflect(x as isize + dx as isize - 1, w);
                                s += taps[dy * 3 + dx] * p[yy * w + xx];
                            }
                        }
                        resp[y * w + x] += s;
                    }
                }
            }
            out.extend(avg_pool(&resp, w, h, Self::POOL));
        }
        Ok(out)
    }
}
