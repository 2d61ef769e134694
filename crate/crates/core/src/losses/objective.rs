use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{feature_cosine, feature_l2, FeatureExtractor};
use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::softhist::{cdf_loss, HistConfig};

/// Weights of the reconstruction loss: texture L2 (`alpha`), CDF (`beta`),
/// texture cosine (`gamma`) and semantic L2 (`delta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for RecWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.5,
            gamma: 1.0,
            delta: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda_adv: f64,
    pub lambda_mse: f64,
    pub lambda_feat: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_mse: 15.0,
            lambda_feat: 15.0,
        }
    }
}

fn check_weights(named: &[(&str, f64)]) -> Result<()> {
    for (name, w) in named {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {name} must be finite and >= 0, got {w}"
            )));
        }
    }
    Ok(())
}

impl RecWeights {
    pub fn validate(&self) -> Result<()> {
        check_weights(&[
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ])
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        check_weights(&[
            ("lambda_adv", self.lambda_adv),
            ("lambda_mse", self.lambda_mse),
            ("lambda_feat", self.lambda_feat),
        ])
    }
}

/// Weighted loss terms and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl LossReport {
    /// Builds a report from `(name, weight, value)` triples.
    pub fn from_terms(terms: &[(&str, f64, f64)]) -> Self {
        let mut report = LossReport {
            total: 0.0,
            terms: BTreeMap::new(),
            weights: BTreeMap::new(),
        };
        for &(name, weight, value) in terms {
            report.terms.insert(name.to_string(), value);
            report.weights.insert(name.to_string(), weight);
        }
        report.total = report.weighted_sum();
        report
    }

    pub fn weighted_sum(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| self.weights.get(k).copied().unwrap_or(1.0) * v)
            .sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }
}

pub fn mse(a: &ImageF, b: &ImageF) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.data().len() as f64)
}

/// Composite reconstruction loss:
/// `alpha*L2(texture) + gamma*(1 - cos(texture)) + beta*CDF + delta*L2(semantic)`.
pub fn rec_loss(
    pred: &ImageF,
    target: &ImageF,
    weights: &RecWeights,
    texture: &dyn FeatureExtractor,
    semantic: &dyn FeatureExtractor,
    hist: &HistConfig,
) -> Result<LossReport> {
    weights.validate()?;
    pred.ensure_same_shape(target)?;
    let l2 = feature_l2(pred, target, texture)?;
    let cos = feature_cosine(pred, target, texture)?;
    let cdf = cdf_loss(pred, target, hist)?;
    let perceptual = feature_l2(pred, target, semantic)?;
    Ok(LossReport::from_terms(&[
        ("feature_l2", weights.alpha, l2),
        ("cosine", weights.gamma, cos),
        ("cdf", weights.beta, cdf),
        ("perceptual", weights.delta, perceptual),
    ]))
}

/// Full generator objective:
/// `l_adv*adv + l_mse*(mse_rgb + mse_hsv) + l_feat*(rec_rgb + rec_hsv)`.
pub fn generator_objective(
    adv: f64,
    mse_rgb: f64,
    mse_hsv: f64,
    rec_rgb: &LossReport,
    rec_hsv: &LossReport,
    weights: &ObjectiveWeights,
) -> LossReport {
    LossReport::from_terms(&[
        ("adv", weights.lambda_adv, adv),
        ("mse_rgb", weights.lambda_mse, mse_rgb),
        ("mse_hsv", weights.lambda_mse, mse_hsv),
        ("rec_rgb", weights.lambda_feat, rec_rgb.total),
        ("rec_hsv", weights.lambda_feat, rec_hsv.total),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;
    use crate::losses::{RandProjExtractor, SobelExtractor};
    use crate::rng::XorShift64Star;
    use proptest::prelude::*;

    fn random(seed: u64, size: usize) -> ImageF {
        let mut r = XorShift64Star::new(seed);
        ImageF::from_fn(size, size, ColorSpace::Srgb, |_, _, _| r.next_f64()).unwrap()
    }

    fn unit_report(total: f64) -> LossReport {
        LossReport::from_terms(&[("x", 1.0, total)])
    }

    #[test]
    fn rec_zero_for_identical() {
        let img = random(1, 32);
        let fx = RandProjExtractor::default();
        let r = rec_loss(
            &img,
            &img,
            &RecWeights::default(),
            &SobelExtractor,
            &fx,
            &HistConfig::default(),
        )
        .unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.terms.values().all(|&v| v == 0.0));
        assert_eq!(r.terms.len(), 4);
    }

    #[test]
    fn unit_terms_with_default_weights() {
        let w = RecWeights::default();
        let r = LossReport::from_terms(&[
            ("feature_l2", w.alpha, 1.0),
            ("cosine", w.gamma, 1.0),
            ("cdf", w.beta, 1.0),
            ("perceptual", w.delta, 1.0),
        ]);
        assert!((r.total - 3.7).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_ignores_histogram_only_changes() {
        // Both reference extractors are linear without bias, so halving every
        // sample scales their features by 0.5 and instance normalisation undoes
        // it. Only the CDF term sees the change.
        let target = random(2, 32);
        let pred = target.map(ColorSpace::Srgb, |v| 0.5 * v).unwrap();
        let fx = RandProjExtractor::default();
        let no_hist = RecWeights {
            beta: 0.0,
            ..RecWeights::default()
        };
        let r0 = rec_loss(
            &pred,
            &target,
            &no_hist,
            &SobelExtractor,
            &fx,
            &HistConfig::default(),
        )
        .unwrap();
        assert!(r0.total.abs() < 1e-9, "{r0:?}");
        let r1 = rec_loss(
            &pred,
            &target,
            &RecWeights::default(),
            &SobelExtractor,
            &fx,
            &HistConfig::default(),
        )
        .unwrap();
        assert!(r1.term("cdf").unwrap() > 0.1);
        assert!((r1.total - 1.5 * r1.term("cdf").unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rec_symmetric() {
        let a = random(3, 24);
        let b = random(4, 24);
        let fx = RandProjExtractor::default();
        let w = RecWeights::default();
        let h = HistConfig::default();
        let ab = rec_loss(&a, &b, &w, &SobelExtractor, &fx, &h).unwrap();
        let ba = rec_loss(&b, &a, &w, &SobelExtractor, &fx, &h).unwrap();
        assert!((ab.total - ba.total).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_weights() {
        let a = random(3, 16);
        let w = RecWeights {
            alpha: -1.0,
            ..RecWeights::default()
        };
        assert!(rec_loss(
            &a,
            &a,
            &w,
            &SobelExtractor,
            &SobelExtractor,
            &HistConfig::default()
        )
        .is_err());
    }

    #[test]
    fn objective_reference_total() {
        let r = generator_objective(
            1.0,
            0.1,
            0.1,
            &unit_report(0.2),
            &unit_report(0.2),
            &ObjectiveWeights::default(),
        );
        assert!((r.total - 10.0).abs() < 1e-9);
        let zero = generator_objective(
            0.0,
            0.0,
            0.0,
            &unit_report(0.0),
            &unit_report(0.0),
            &ObjectiveWeights::default(),
        );
        assert_eq!(zero.total, 0.0);
    }

    #[test]
    fn report_json_shape() {
        let r = unit_report(0.5);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["total"], 0.5);
        assert_eq!(v["terms"]["x"], 0.5);
    }

    #[test]
    fn mse_basic() {
        let a = ImageF::filled(2, 2, ColorSpace::Gray, 0.0).unwrap();
        let b = ImageF::filled(2, 2, ColorSpace::Gray, 0.5).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 0.25);
    }

    proptest! {
        #[test]
        fn objective_linear_in_each_lambda(
            adv in -2.0f64..2.0, m1 in 0.0f64..1.0, m2 in 0.0f64..1.0,
            r1 in 0.0f64..3.0, r2 in 0.0f64..3.0,
            la in 0.0f64..20.0, lm in 0.0f64..20.0, lf in 0.0f64..20.0,
            k in 0.0f64..4.0,
        ) {
            let (a, b) = (unit_report(r1), unit_report(r2));
            let base = ObjectiveWeights { lambda_adv: la, lambda_mse: lm, lambda_feat: lf };
            let t = |w: ObjectiveWeights| generator_objective(adv, m1, m2, &a, &b, &w);
            let full = t(base);
            prop_assert!((full.total - full.weighted_sum()).abs() < 1e-9);
            let only_mse = |l: f64| t(ObjectiveWeights { lambda_adv: 0.0, lambda_mse: l, lambda_feat: 0.0 }).total;
            prop_assert!((only_mse(k * lm) - k * only_mse(lm)).abs() < 1e-9);
            let expected = la * adv + lm * (m1 + m2) + lf * (r1 + r2);
            prop_assert!((full.total - expected).abs() < 1e-9);
        }
    }
}
