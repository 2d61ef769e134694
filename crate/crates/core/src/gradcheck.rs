//! Finite-difference verification of [`cdf_loss_grad`].
//!
//! The numeric side only ever evaluates the forward loss. Perturbing a single
//! sample changes a single channel's raw masses by that sample's kernel
//! contribution, so each probe is an O(B) update of cached raw masses rather
//! than a full histogram rebuild.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF};
use crate::rng::XorShift64Star;
use crate::softhist::{
    accumulate_sample, cdf_l1, cdf_loss_grad, normalise, raw_masses, soft_histogram, HistConfig,
    Kernel,
};

/// Central difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, error O(h^2).
    TwoPoint,
    /// `(f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h`, error O(h^4).
    FourPoint,
}

impl Stencil {
    /// Largest displacement the stencil evaluates, in units of `h`.
    pub fn reach(self) -> f64 {
        match self {
            Stencil::TwoPoint => 1.0,
            Stencil::FourPoint => 2.0,
        }
    }
}

impl std::str::FromStr for Stencil {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "two-point" => Ok(Stencil::TwoPoint),
            "4" | "four-point" => Ok(Stencil::FourPoint),
            other => Err(Error::InvalidArgument(format!("unknown stencil {other:?}"))),
        }
    }
}

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64, stencil: Stencil) -> f64 {
    match stencil {
        Stencil::TwoPoint => (f(x + h) - f(x - h)) / (2.0 * h),
        Stencil::FourPoint => {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        }
    }
}

/// `|a - n| / max(|a|, |n|)`, 0 when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom < 1e-300 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Forward CDF loss with one sample replaced, evaluated from cached raw masses.
pub struct PerturbedLoss<'a> {
    cfg: HistConfig,
    pred: &'a ImageF,
    edges: Vec<f64>,
    raw: Vec<Vec<f64>>,
    target_cdf: Vec<Vec<f64>>,
    per_channel: Vec<f64>,
}

impl<'a> PerturbedLoss<'a> {
    pub fn new(pred: &'a ImageF, target: &ImageF, cfg: &HistConfig) -> Result<Self> {
        if pred.channels() != target.channels() {
            return Err(Error::ShapeMismatch {
                left: pred.shape_string(),
                right: target.shape_string(),
            });
        }
        cfg.validate()?;
        let channels = pred.channels();
        let mut raw = Vec::with_capacity(channels);
        let mut target_cdf = Vec::with_capacity(channels);
        let mut per_channel = Vec::with_capacity(channels);
        for c in 0..channels {
            let r = raw_masses(pred.plane(c), cfg);
            let (_, cdf, _) = normalise(r.clone())?;
            let t = soft_histogram(target.plane(c), cfg)?.cdf;
            per_channel.push(cdf_l1(&cdf, &t));
            raw.push(r);
            target_cdf.push(t);
        }
        Ok(Self {
            cfg: *cfg,
            pred,
            edges: (0..=cfg.bins).map(|b| cfg.edge(b)).collect(),
            raw,
            target_cdf,
            per_channel,
        })
    }

    fn perturbed_cdf(&self, index: usize, value: f64) -> Result<(usize, Vec<f64>)> {
        let n = self.pred.plane_len();
        let c = index / n;
        let old = self.pred.data()[index];
        let bins = self.cfg.bins;
        let mut remove = vec![0.0; bins];
        let mut add = vec![0.0; bins];
        accumulate_sample(old, &self.cfg, &self.edges, &mut remove);
        accumulate_sample(value, &self.cfg, &self.edges, &mut add);
        let raw: Vec<f64> = self.raw[c]
            .iter()
            .zip(remove.iter().zip(&add))
            .map(|(r, (o, a))| r + (a - o) / n as f64)
            .collect();
        let (_, cdf, _) = normalise(raw)?;
        Ok((c, cdf))
    }

    /// Loss with flat sample `index` of `pred` set to `value`.
    pub fn eval(&self, index: usize, value: f64) -> Result<f64> {
        let (c, cdf) = self.perturbed_cdf(index, value)?;
        let changed = cdf_l1(&cdf, &self.target_cdf[c]);
        let rest: f64 = self
            .per_channel
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == c { changed } else { v })
            .sum();
        Ok(rest / self.per_channel.len() as f64)
    }

    /// Signs of `H_b(pred) - H_b(target)` over the free bins (all but the
    /// last) with sample `index` set to `value`. The loss is smooth in the
    /// sample only while this pattern is constant.
    pub fn sign_pattern(&self, index: usize, value: f64) -> Result<Vec<i8>> {
        let (c, cdf) = self.perturbed_cdf(index, value)?;
        let bins = self.cfg.bins;
        Ok(cdf[..bins - 1]
            .iter()
            .zip(&self.target_cdf[c])
            .map(|(p, t)| {
                let d = p - t;
                (d > 0.0) as i8 - (d < 0.0) as i8
            })
            .collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub index: usize,
    pub value: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub kernel: Kernel,
    pub bins: usize,
    pub tau: f64,
    pub step: f64,
    pub stencil: Stencil,
    pub samples: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Candidate probes dropped because the stencil crossed a kink of the
    /// L1 loss.
    pub skipped_kinks: usize,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeResult>,
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub samples: usize,
    pub step: f64,
    pub stencil: Stencil,
    pub tolerance: f64,
    pub seed: u64,
    pub keep_probes: bool,
    /// Skip probes whose stencil crosses a point where some CDF difference
    /// changes sign.
    pub exclude_kinks: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            step: 1e-3,
            stencil: Stencil::FourPoint,
            tolerance: 1e-4,
            seed: 0,
            keep_probes: false,
            exclude_kinks: true,
        }
    }
}

/// Seeded `size x size` RGB pair: prediction `u`, target `u^2` with `u`
/// uniform on [0,1), both drawn from one stream.
pub fn seeded_pair(seed: u64, size: usize) -> Result<(ImageF, ImageF)> {
    let mut rng = XorShift64Star::new(seed);
    let pred = ImageF::from_fn(size, size, ColorSpace::Srgb, |_, _, _| rng.next_f64())?;
    let target = ImageF::from_fn(size, size, ColorSpace::Srgb, |_, _, _| {
        let u = rng.next_f64();
        u * u
    })?;
    Ok((pred, target))
}

/// True when `y` lies within `radius` of a triangular-kernel breakpoint
/// (`c_b` or `c_b +- tau`).
pub fn near_breakpoint(y: f64, cfg: &HistConfig, radius: f64) -> bool {
    (0..cfg.bins).any(|b| {
        let c = cfg.center(b);
        [c - cfg.tau, c, c + cfg.tau]
            .iter()
            .any(|k| (y - k).abs() <= radius)
    })
}

/// Compares [`cdf_loss_grad`] against central differences of the forward loss
/// at `opts.samples` seeded sample positions of `pred`.
///
/// The loss is `|.|` of CDF differences, so it has kinks wherever one of them
/// crosses zero. Differences taken across a kink measure a one-sided mix
/// rather than the derivative; with `exclude_kinks` such probes are redrawn.
/// Small images hit this often because one sample moves the CDF by `1/N`.
pub fn gradcheck_cdf_loss(
    pred: &ImageF,
    target: &ImageF,
    cfg: &HistConfig,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let analytic = cdf_loss_grad(pred, target, cfg)?;
    let loss = PerturbedLoss::new(pred, target, cfg)?;
    let total = pred.data().len();
    let want = opts.samples.min(total);
    let mut rng = XorShift64Star::new(opts.seed);
    let mut chosen = vec![false; total];
    let mut probes = Vec::with_capacity(want);
    let exclusion = opts.stencil.reach() * opts.step;
    let mut attempts = 0usize;
    let mut skipped_kinks = 0usize;
    while probes.len() < want && attempts < total * 20 {
        attempts += 1;
        let idx = rng.below(total);
        if chosen[idx] {
            continue;
        }
        let y = pred.data()[idx];
        if cfg.kernel == Kernel::Triangular && near_breakpoint(y, cfg, exclusion) {
            continue;
        }
        chosen[idx] = true;
        if opts.exclude_kinks {
            let reach = opts.stencil.reach() * opts.step;
            let centre = loss.sign_pattern(idx, y)?;
            if loss.sign_pattern(idx, y - reach)? != centre
                || loss.sign_pattern(idx, y + reach)? != centre
            {
                skipped_kinks += 1;
                continue;
            }
        }
        let mut failure = None;
        let numeric = central_difference(
            |v| match loss.eval(idx, v) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e.to_string());
                    f64::NAN
                }
            },
            y,
            opts.step,
            opts.stencil,
        );
        if let Some(e) = failure {
            return Err(Error::Degenerate(e));
        }
        let a = analytic.data()[idx];
        probes.push(ProbeResult {
            index: idx,
            value: y,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    if probes.is_empty() {
        return Err(Error::Degenerate("no admissible probe positions".into()));
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    let max_abs_error = probes
        .iter()
        .map(|p| (p.analytic - p.numeric).abs())
        .fold(0.0, f64::max);
    Ok(GradcheckReport {
        kernel: cfg.kernel,
        bins: cfg.bins,
        tau: cfg.tau,
        step: opts.step,
        stencil: opts.stencil,
        samples: probes.len(),
        max_rel_error,
        max_abs_error,
        skipped_kinks,
        tolerance: opts.tolerance,
        passed: max_rel_error < opts.tolerance,
        probes: if opts.keep_probes { probes } else { Vec::new() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::softhist::cdf_loss;

    fn random(seed: u64, size: usize, f: impl Fn(f64) -> f64) -> ImageF {
        let mut r = XorShift64Star::new(seed);
        ImageF::from_fn(size, size, ColorSpace::Srgb, |_, _, _| f(r.next_f64())).unwrap()
    }

    #[test]
    fn stencils_on_polynomial() {
        let f = |x: f64| x.powi(3);
        let two = central_difference(f, 2.0, 1e-3, Stencil::TwoPoint);
        let four = central_difference(f, 2.0, 1e-3, Stencil::FourPoint);
        assert!((two - 12.0).abs() < 2e-6);
        assert!((four - 12.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_loss_matches_full_rebuild() {
        let pred = random(1, 12, |v| v);
        let target = random(2, 12, |v| v * v);
        let cfg = HistConfig::default();
        let pl = PerturbedLoss::new(&pred, &target, &cfg).unwrap();
        for &idx in &[0usize, 77, 300, 431] {
            let mut data = pred.data().to_vec();
            data[idx] = 0.123;
            let moved = ImageF::new(12, 12, ColorSpace::Srgb, data).unwrap();
            let full = cdf_loss(&moved, &target, &cfg).unwrap();
            assert!((pl.eval(idx, 0.123).unwrap() - full).abs() < 1e-14);
        }
        let base = cdf_loss(&pred, &target, &cfg).unwrap();
        assert!((pl.eval(5, pred.data()[5]).unwrap() - base).abs() < 1e-14);
    }

    #[test]
    fn tiny_images_cross_loss_kinks() {
        // 8x8: one sample shifts a CDF bin by 1/64, enough for the four-point
        // stencil to straddle a sign change of some H_p - H_t.
        let (pred, target) = seeded_pair(0, 8).unwrap();
        let cfg = HistConfig::default();
        let strict = GradcheckOptions {
            exclude_kinks: false,
            ..GradcheckOptions::default()
        };
        let raw = gradcheck_cdf_loss(&pred, &target, &cfg, &strict).unwrap();
        assert!(raw.max_rel_error > 1e-4, "{}", raw.max_rel_error);
        let smooth =
            gradcheck_cdf_loss(&pred, &target, &cfg, &GradcheckOptions::default()).unwrap();
        assert!(smooth.skipped_kinks > 0);
        assert!(smooth.passed, "{}", smooth.max_rel_error);
        assert_eq!(smooth.samples, 100);
    }

    #[test]
    fn kink_exclusion_inactive_at_default_size() {
        let (pred, target) = seeded_pair(0, 64).unwrap();
        let cfg = HistConfig::default();
        let strict = GradcheckOptions {
            exclude_kinks: false,
            ..GradcheckOptions::default()
        };
        let a = gradcheck_cdf_loss(&pred, &target, &cfg, &strict).unwrap();
        assert!(a.passed && a.samples == 100, "{}", a.max_rel_error);
    }

    #[test]
    fn relative_error_conventions() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
    }

    #[test]
    fn breakpoint_detection() {
        let cfg = HistConfig::default();
        assert!(near_breakpoint(cfg.center(10), &cfg, 1e-3));
        assert!(near_breakpoint(cfg.center(10) + cfg.tau + 5e-4, &cfg, 1e-3));
    }
}
