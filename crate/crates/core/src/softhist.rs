//! Differentiable soft histograms, their CDFs, and the channel-wise CDF L1
//! loss used as a global colour prior, with exact pixel gradients.
//!
//! Bins live on [0,1]: centers `c_b = (b + 0.5) / B`, edges `e_b = b / B`.
//! Raw masses come from one of two kernels and are then renormalised to sum
//! to one, so the CDF always ends at exactly one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageF;

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_TAU: f64 = 0.02;

/// Samples per partition for the parallel mass reduction. Partials are
/// combined in partition order, so results do not depend on thread count.
const CHUNK: usize = 16 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `max(0, 1 - |y - c_b| / tau)`
    Triangular,
    /// `sigmoid((y - e_b) / tau) - sigmoid((y - e_{b+1}) / tau)`
    #[default]
    Logistic,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Triangular => "triangular",
            Kernel::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triangular" | "tri" => Ok(Kernel::Triangular),
            "logistic" | "sigmoid" => Ok(Kernel::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistConfig {
    pub bins: usize,
    pub tau: f64,
    pub kernel: Kernel,
}

impl Default for HistConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            tau: DEFAULT_TAU,
            kernel: Kernel::Logistic,
        }
    }
}

impl HistConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "bins must be >= 2, got {}",
                self.bins
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.bins as f64
    }

    pub fn edge(&self, b: usize) -> f64 {
        b as f64 / self.bins as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftHistogram {
    pub config: HistConfig,
    /// Normalised bin masses `h`.
    pub mass: Vec<f64>,
    /// Cumulative masses `H`.
    pub cdf: Vec<f64>,
}

impl SoftHistogram {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.config.bins)
            .map(|b| self.config.center(b))
            .collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.config.bins)
            .map(|b| self.config.edge(b))
            .collect()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Adds one sample's raw (unnormalised, un-averaged) kernel masses to `acc`.
pub(crate) fn accumulate_sample(y: f64, cfg: &HistConfig, edges: &[f64], acc: &mut [f64]) {
    let bins = cfg.bins;
    match cfg.kernel {
        Kernel::Logistic => {
            let mut prev = sigmoid((y - edges[0]) / cfg.tau);
            for b in 0..bins {
                let next = sigmoid((y - edges[b + 1]) / cfg.tau);
                acc[b] += prev - next;
                prev = next;
            }
        }
        Kernel::Triangular => {
            let (lo, hi) = triangular_support(y, cfg);
            for (b, slot) in acc.iter_mut().enumerate().take(hi).skip(lo) {
                let u = (y - cfg.center(b)).abs() / cfg.tau;
                if u < 1.0 {
                    *slot += 1.0 - u;
                }
            }
        }
    }
}

/// Bin index range that can intersect the triangular kernel around `y`.
pub(crate) fn triangular_support(y: f64, cfg: &HistConfig) -> (usize, usize) {
    let b = cfg.bins as f64;
    let lo = ((y - cfg.tau) * b - 0.5).floor().max(0.0);
    let hi = ((y + cfg.tau) * b - 0.5).ceil() + 1.0;
    let lo = (lo as usize).min(cfg.bins);
    let hi = (hi.max(0.0) as usize).min(cfg.bins);
    (lo, hi.max(lo))
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty channel".into()));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite sample at index {i}"
        )));
    }
    Ok(())
}

/// Raw masses `(1/N) sum_i k(y_i, b)` before renormalisation.
pub(crate) fn raw_masses(samples: &[f64], cfg: &HistConfig) -> Vec<f64> {
    let edges: Vec<f64> = (0..=cfg.bins).map(|b| cfg.edge(b)).collect();
    let partials: Vec<Vec<f64>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; cfg.bins];
            for &y in chunk {
                accumulate_sample(y, cfg, &edges, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; cfg.bins];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let n = samples.len() as f64;
    total.iter_mut().for_each(|v| *v /= n);
    total
}

/// Normalised masses and CDF from raw masses; also returns the normaliser.
pub(crate) fn normalise(raw: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let z: f64 = raw.iter().sum();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Degenerate(
            "kernel assigns no mass to any bin; increase tau".into(),
        ));
    }
    let mass: Vec<f64> = raw.iter().map(|v| v / z).collect();
    let mut cdf = Vec::with_capacity(mass.len());
    let mut acc = 0.0;
    for &m in &mass {
        acc += m;
        cdf.push(acc);
    }
    Ok((mass, cdf, z))
}

pub fn soft_histogram(samples: &[f64], cfg: &HistConfig) -> Result<SoftHistogram> {
    cfg.validate()?;
    check_samples(samples)?;
    let (mass, cdf, _) = normalise(raw_masses(samples, cfg))?;
    Ok(SoftHistogram {
        config: *cfg,
        mass,
        cdf,
    })
}

/// Hard counts over `[e_b, e_{b+1})` (1.0 falls in the last bin), normalised
/// to sum one.
pub fn hard_histogram(samples: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    check_samples(samples)?;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let b = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

fn check_pair(pred: &ImageF, target: &ImageF) -> Result<()> {
    if pred.channels() != target.channels() {
        return Err(Error::ShapeMismatch {
            left: pred.shape_string(),
            right: target.shape_string(),
        });
    }
    Ok(())
}

/// Mean over channels of `(1/B) sum_b |H_b(pred) - H_b(target)|`.
///
/// Only the channel counts must agree; the images may differ in size.
pub fn cdf_loss(pred: &ImageF, target: &ImageF, cfg: &HistConfig) -> Result<f64> {
    check_pair(pred, target)?;
    let targets = target_cdfs(target, cfg)?;
    Ok(loss_from_states(&channel_states(pred, cfg)?, &targets))
}

/// Normalised CDF and normaliser `Z` of one channel of the prediction.
struct ChannelState {
    cdf: Vec<f64>,
    z: f64,
}

fn channel_states(img: &ImageF, cfg: &HistConfig) -> Result<Vec<ChannelState>> {
    cfg.validate()?;
    (0..img.channels())
        .map(|c| {
            let samples = img.plane(c);
            check_samples(samples)?;
            let (_, cdf, z) = normalise(raw_masses(samples, cfg))?;
            Ok(ChannelState { cdf, z })
        })
        .collect()
}

fn target_cdfs(target: &ImageF, cfg: &HistConfig) -> Result<Vec<Vec<f64>>> {
    (0..target.channels())
        .map(|c| soft_histogram(target.plane(c), cfg).map(|h| h.cdf))
        .collect()
}

fn loss_from_states(states: &[ChannelState], targets: &[Vec<f64>]) -> f64 {
    let total: f64 = states
        .iter()
        .zip(targets)
        .map(|(s, t)| cdf_l1(&s.cdf, t))
        .sum();
    total / states.len() as f64
}

pub(crate) fn cdf_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact gradient of [`cdf_loss`] with respect to every sample of `pred`.
///
/// With raw masses `r_j`, `Z = sum_j r_j`, `H_b = (sum_{j<=b} r_j) / Z` and
/// `s_b = sign(H_b^pred - H_b^target)` (0 at ties), the chain rule collapses to
///
/// ```text
/// dL/dy_i = 1/(B C Z) * sum_j dr_j/dy_i * (R_j - A)
/// R_j = sum_{b>=j} s_b,   A = sum_b s_b H_b
/// ```
///
/// The last CDF bin is identically one and contributes nothing. The
/// triangular kernel is piecewise linear; at its breakpoints the one-sided
/// derivative `-sign(y - c_b)/tau` (0 at the peak) is used.
pub fn cdf_loss_grad(pred: &ImageF, target: &ImageF, cfg: &HistConfig) -> Result<ImageF> {
    check_pair(pred, target)?;
    let states = channel_states(pred, cfg)?;
    let targets = target_cdfs(target, cfg)?;
    grad_from_states(pred, &states, &targets, cfg)
}

fn grad_from_states(
    pred: &ImageF,
    states: &[ChannelState],
    targets: &[Vec<f64>],
    cfg: &HistConfig,
) -> Result<ImageF> {
    let channels = pred.channels();
    let bins = cfg.bins;
    let n = pred.plane_len();
    let edges: Vec<f64> = (0..=bins).map(|b| cfg.edge(b)).collect();
    let mut grad = vec![0.0; pred.data().len()];
    for (c, (state, target_cdf)) in states.iter().zip(targets).enumerate() {
        let cdf_p = &state.cdf;
        let mut s: Vec<f64> = cdf_p
            .iter()
            .zip(target_cdf)
            .map(|(p, t)| sign(p - t))
            .collect();
        s[bins - 1] = 0.0;
        let a: f64 = s.iter().zip(cdf_p).map(|(s, h)| s * h).sum();
        let mut weight = vec![0.0; bins];
        let mut suffix = 0.0;
        for j in (0..bins).rev() {
            suffix += s[j];
            weight[j] = suffix - a;
        }
        if weight.iter().all(|&w| w == 0.0) {
            continue;
        }
        let scale = 1.0 / (bins as f64 * channels as f64 * state.z * n as f64);
        let out = &mut grad[c * n..(c + 1) * n];
        out.par_iter_mut()
            .zip(pred.plane(c).par_iter())
            .for_each(|(g, &y)| {
                *g = scale * sample_grad(y, cfg, &edges, &weight);
            });
    }
    ImageF::new(pred.width(), pred.height(), pred.space(), grad)
}

/// `sum_j dk_j/dy * weight_j` for one sample.
fn sample_grad(y: f64, cfg: &HistConfig, edges: &[f64], weight: &[f64]) -> f64 {
    let tau = cfg.tau;
    match cfg.kernel {
        Kernel::Logistic => {
            let dsig = |e: f64| {
                let s = sigmoid((y - e) / tau);
                s * (1.0 - s) / tau
            };
            let mut prev = dsig(edges[0]);
            let mut acc = 0.0;
            for (j, w) in weight.iter().enumerate() {
                let next = dsig(edges[j + 1]);
                acc += (prev - next) * w;
                prev = next;
            }
            acc
        }
        Kernel::Triangular => {
            let (lo, hi) = triangular_support(y, cfg);
            let mut acc = 0.0;
            for (b, w) in weight.iter().enumerate().take(hi).skip(lo) {
                let d = y - cfg.center(b);
                if d.abs() < tau {
                    acc += -sign(d) / tau * w;
                }
            }
            acc
        }
    }
}

/// Result of [`hist_match_gd`].
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub image: ImageF,
    /// Loss before the first step followed by the loss after every step.
    pub trace: Vec<f64>,
    /// Step size in effect at the end.
    pub final_lr: f64,
}

const MAX_HALVINGS: usize = 40;

/// Gradient descent on the pixels of `src` towards the CDF of `target`.
///
/// The gradient is multiplied by the sample count so that `lr` is a
/// per-pixel step independent of resolution. Pixels are clamped to [0,1]
/// after every step. When a step would increase the loss the step size is
/// halved and the step retried, so the trace never increases.
pub fn hist_match_gd(
    src: &ImageF,
    target: &ImageF,
    steps: usize,
    lr: f64,
    cfg: &HistConfig,
) -> Result<MatchOutcome> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lr must be positive, got {lr}"
        )));
    }
    check_pair(src, target)?;
    let targets = target_cdfs(target, cfg)?;
    let mut current = src.clone();
    let mut states = channel_states(&current, cfg)?;
    let mut loss = loss_from_states(&states, &targets);
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(loss);
    let mut lr = lr;
    let gain = src.data().len() as f64;
    for _ in 0..steps {
        let grad = grad_from_states(&current, &states, &targets, cfg)?;
        if grad.data().iter().all(|&g| g == 0.0) {
            trace.push(loss);
            continue;
        }
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let step = lr * gain;
            let data: Vec<f64> = current
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&v, &g)| (v - step * g).clamp(0.0, 1.0))
                .collect();
            let candidate = ImageF::new(current.width(), current.height(), current.space(), data)?;
            let cand_states = channel_states(&candidate, cfg)?;
            let cand_loss = loss_from_states(&cand_states, &targets);
            if cand_loss <= loss {
                current = candidate;
                states = cand_states;
                loss = cand_loss;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            log::debug!("hist_match_gd: no descent step found, stopping");
            trace.push(loss);
            break;
        }
        trace.push(loss);
    }
    Ok(MatchOutcome {
        image: current,
        trace,
        final_lr: lr,
    })
}
