//! PSNR, SSIM and angular error, plus pairwise and directory evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{load_image, srgb_decode, ColorSpace, ImageF};

/// Returned for identical inputs instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;
/// Pixels whose RGB norm is below this in either input are left out of the
/// angular error.
pub const AE_MIN_NORM: f64 = 1e-8;

pub fn mse(a: &ImageF, b: &ImageF) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10 log10(max_i^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageF, b: &ImageF, max_i: f64) -> Result<f64> {
    if !(max_i > 0.0 && max_i.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "max_i must be positive, got {max_i}"
        )));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (max_i * max_i / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable Gaussian filter over the valid region only.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM over valid window positions and channels, 11x11 Gaussian
/// window with sigma 1.5, dynamic range 1.
pub fn ssim(a: &ImageF, b: &ImageF) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidImage(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..a.channels() {
        let (pa, pb) = (a.plane(c), b.plane(c));
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(pa, w, h, &k);
        let mu_b = filter_valid(pb, w, h, &k);
        let e_aa = filter_valid(&aa, w, h, &k);
        let e_bb = filter_valid(&bb, w, h, &k);
        let e_ab = filter_valid(&ab, w, h, &k);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
            total += num / den;
        }
        count += mu_a.len();
    }
    Ok(total / count as f64)
}

/// Mean per-pixel angle in degrees between RGB vectors, computed as
/// `atan2(|p x g|, p . g)`, which equals `acos` of the normalised dot product
/// but stays accurate near 0 and 180 degrees.
pub fn angular_error(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    if pred.channels() != 3 {
        return Err(Error::InvalidImage(format!(
            "angular error needs 3 channels, got {}",
            pred.shape_string()
        )));
    }
    let n = pred.plane_len();
    let (p, g) = (pred.data(), gt.data());
    let mut sum = 0.0;
    let mut used = 0usize;
    for i in 0..n {
        let pv = [p[i], p[n + i], p[2 * n + i]];
        let gv = [g[i], g[n + i], g[2 * n + i]];
        let np = pv.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ng = gv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if np < AE_MIN_NORM || ng < AE_MIN_NORM {
            continue;
        }
        let dot: f64 = pv.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let cross = [
            pv[1] * gv[2] - pv[2] * gv[1],
            pv[2] * gv[0] - pv[0] * gv[2],
            pv[0] * gv[1] - pv[1] * gv[0],
        ];
        let sin = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
        sum += sin.atan2(dot).to_degrees();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "every pixel has a near-zero RGB vector".into(),
        ));
    }
    Ok(sum / used as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub ssim: f64,
    /// `None` when every pixel is too dark to define an angle.
    pub ae_deg: Option<f64>,
    pub n_pixels: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricOptions {
    /// Decode sRGB to linear light before measuring.
    pub linear: bool,
}

fn to_linear(img: ImageF) -> Result<ImageF> {
    match img.space() {
        ColorSpace::Srgb => img.map(ColorSpace::LinearRgb, srgb_decode),
        ColorSpace::Gray => img.map(ColorSpace::Gray, srgb_decode),
        _ => Ok(img),
    }
}

/// Gray images are replicated to RGB for the angular error, which is then 0
/// wherever defined.
pub fn evaluate_images(pred: &ImageF, gt: &ImageF) -> Result<MetricsReport> {
    pred.ensure_same_shape(gt)?;
    let psnr_db = psnr(pred, gt, 1.0)?;
    let ssim = ssim(pred, gt)?;
    let ae = if pred.channels() == 3 {
        angular_error(pred, gt)
    } else {
        angular_error(
            &pred.clone().with_space(ColorSpace::Gray)?.gray_to_rgb()?,
            &gt.clone().with_space(ColorSpace::Gray)?.gray_to_rgb()?,
        )
    };
    let ae_deg = match ae {
        Ok(v) => Some(v),
        Err(Error::Degenerate(msg)) => {
            warn!("angular error undefined: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        psnr_db,
        ssim,
        ae_deg,
        n_pixels: pred.plane_len(),
    })
}

pub fn evaluate_pair(
    pred_path: impl AsRef<Path>,
    gt_path: impl AsRef<Path>,
    opts: MetricOptions,
) -> Result<MetricsReport> {
    let (pp, gp) = (pred_path.as_ref(), gt_path.as_ref());
    let mut pred = load_image(pp)?;
    let mut gt = load_image(gp)?;
    if !pred.same_shape(&gt) {
        return Err(Error::ShapeMismatch {
            left: format!("{} ({})", pred.shape_string(), pp.display()),
            right: format!("{} ({})", gt.shape_string(), gp.display()),
        });
    }
    if opts.linear {
        pred = to_linear(pred)?;
        gt = to_linear(gt)?;
    }
    evaluate_images(&pred, &gt)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub ae_deg: Option<f64>,
    /// Reserved; never computed.
    pub lpips: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirReport {
    pub pairs: Vec<PairReport>,
    pub aggregate: BTreeMap<&'static str, Stat>,
    pub skipped: Vec<String>,
}

impl DirReport {
    pub fn from_pairs(pairs: Vec<PairReport>, skipped: Vec<String>) -> Self {
        let mut aggregate = BTreeMap::new();
        let psnr: Vec<f64> = pairs.iter().map(|p| p.psnr_db).collect();
        let ssim: Vec<f64> = pairs.iter().map(|p| p.ssim).collect();
        let ae: Vec<f64> = pairs.iter().filter_map(|p| p.ae_deg).collect();
        for (key, vals) in [("psnr_db", psnr), ("ssim", ssim), ("ae_deg", ae)] {
            if let Some(s) = Stat::of(&vals) {
                aggregate.insert(key, s);
            }
        }
        Self {
            pairs,
            aggregate,
            skipped,
        }
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pfm"))
}

/// Image files in `dir` keyed by stem. Stems shared by several files are
/// ambiguous and returned separately.
fn index_dir(dir: &Path) -> Result<(BTreeMap<String, PathBuf>, Vec<PathBuf>)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_stem: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !is_image_file(&path) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            by_stem.entry(stem.to_string()).or_default().push(path);
        }
    }
    let mut unique = BTreeMap::new();
    let mut ambiguous = Vec::new();
    for (stem, mut paths) in by_stem {
        if paths.len() == 1 {
            unique.insert(stem, paths.pop().unwrap());
        } else {
            paths.sort();
            ambiguous.extend(paths);
        }
    }
    Ok((unique, ambiguous))
}

/// Pairs files by identical stem and evaluates every pair. Unmatched or
/// ambiguous files are listed in `skipped`; pairs are reported in stem order.
pub fn evaluate_dir(
    pred_dir: impl AsRef<Path>,
    gt_dir: impl AsRef<Path>,
    opts: MetricOptions,
) -> Result<DirReport> {
    let (pred, mut skipped_paths) = index_dir(pred_dir.as_ref())?;
    let (gt, gt_ambiguous) = index_dir(gt_dir.as_ref())?;
    skipped_paths.extend(gt_ambiguous);
    let mut jobs = Vec::new();
    for (stem, p) in &pred {
        match gt.get(stem) {
            Some(g) => jobs.push((stem.clone(), p.clone(), g.clone())),
            None => skipped_paths.push(p.clone()),
        }
    }
    skipped_paths.extend(
        gt.iter()
            .filter(|(stem, _)| !pred.contains_key(*stem))
            .map(|(_, p)| p.clone()),
    );
    let pairs = jobs
        .par_iter()
        .map(|(stem, p, g)| {
            let r = evaluate_pair(p, g, opts)?;
            Ok(PairReport {
                name: stem.clone(),
                psnr_db: r.psnr_db,
                ssim: r.ssim,
                ae_deg: r.ae_deg,
                lpips: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    skipped_paths.sort();
    let skipped = skipped_paths
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    Ok(DirReport::from_pairs(pairs, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{save_image, BitDepth};
    use crate::rng::XorShift64Star;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, space: ColorSpace, seed: u64, scale: f64) -> ImageF {
        let mut rng = XorShift64Star::new(seed);
        ImageF::from_fn(w, h, space, |_, _, _| scale * rng.next_f64()).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = ImageF::filled(8, 8, ColorSpace::Gray, 0.0).unwrap();
        let b = ImageF::filled(8, 8, ColorSpace::Gray, 0.1).unwrap();
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c = ImageF::filled(8, 8, ColorSpace::Gray, 0.5).unwrap();
        assert!((psnr(&a, &c, 1.0).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert_eq!(psnr(&c, &c, 1.0).unwrap(), PSNR_CAP_DB);
        let d = ImageF::filled(8, 9, ColorSpace::Gray, 0.5).unwrap();
        assert!(matches!(
            psnr(&a, &d, 1.0),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = noise(40, 30, ColorSpace::Srgb, 1, 1.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let zero = ImageF::filled(16, 16, ColorSpace::Gray, 0.0).unwrap();
        let one = ImageF::filled(16, 16, ColorSpace::Gray, 1.0).unwrap();
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((ssim(&zero, &one).unwrap() - expected).abs() < 1e-12);
        let tiny = ImageF::filled(10, 20, ColorSpace::Gray, 0.0).unwrap();
        assert!(ssim(&tiny, &tiny).is_err());
    }

    #[test]
    fn ssim_matches_direct_window_sum() {
        // Brute-force 2-D window sum at one location as an independent check.
        let a = noise(13, 12, ColorSpace::Gray, 2, 1.0);
        let b = noise(13, 12, ColorSpace::Gray, 3, 1.0);
        let k = gaussian_window();
        let mut total = 0.0;
        let mut count = 0;
        for oy in 0..2 {
            for ox in 0..3 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = k[i] * k[j];
                        let (x, y) = (a.get(0, oy + i, ox + j), b.get(0, oy + i, ox + j));
                        ma += wt * x;
                        mb += wt * y;
                        saa += wt * x * x;
                        sbb += wt * y * y;
                        sab += wt * x * y;
                    }
                }
                let (va, vb, cv) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cv + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1;
            }
        }
        assert!((ssim(&a, &b).unwrap() - total / count as f64).abs() < 1e-12);
    }

    #[test]
    fn angular_examples() {
        let red = ImageF::from_fn(4, 4, ColorSpace::Srgb, |c, _, _| (c == 0) as u8 as f64).unwrap();
        let green =
            ImageF::from_fn(4, 4, ColorSpace::Srgb, |c, _, _| (c == 1) as u8 as f64).unwrap();
        assert!((angular_error(&red, &green).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(angular_error(&red, &red).unwrap(), 0.0);
        let black = ImageF::filled(4, 4, ColorSpace::Srgb, 0.0).unwrap();
        assert!(matches!(
            angular_error(&black, &red),
            Err(Error::Degenerate(_))
        ));
        let gray = ImageF::filled(4, 4, ColorSpace::Gray, 0.5).unwrap();
        assert!(angular_error(&gray, &gray).is_err());
    }

    #[test]
    fn angular_skips_dark_pixels() {
        let pred = ImageF::from_fn(2, 1, ColorSpace::Srgb, |c, _, x| {
            if x == 0 {
                0.0
            } else {
                (c == 0) as u8 as f64
            }
        })
        .unwrap();
        let gt = ImageF::from_fn(2, 1, ColorSpace::Srgb, |c, _, _| (c == 2) as u8 as f64).unwrap();
        assert!((angular_error(&pred, &gt).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_images_gray_and_dark() {
        let g = noise(16, 16, ColorSpace::Gray, 4, 1.0);
        let r = evaluate_images(&g, &g).unwrap();
        assert_eq!((r.psnr_db, r.ae_deg, r.n_pixels), (99.0, Some(0.0), 256));
        let black = ImageF::filled(16, 16, ColorSpace::Srgb, 0.0).unwrap();
        assert_eq!(evaluate_images(&black, &black).unwrap().ae_deg, None);
    }

    fn write(dir: &Path, name: &str, img: &ImageF) {
        save_image(img, dir.join(name), BitDepth::Sixteen).unwrap();
    }

    #[test]
    fn directory_pairing() {
        let pred = tempfile::tempdir().unwrap();
        let gt = tempfile::tempdir().unwrap();
        let a = noise(16, 16, ColorSpace::Srgb, 5, 1.0);
        let b = noise(16, 16, ColorSpace::Srgb, 6, 1.0);
        write(pred.path(), "a.png", &a);
        write(gt.path(), "a.png", &b);
        write(pred.path(), "b.png", &b);
        write(gt.path(), "b.png", &b);
        write(pred.path(), "only_pred.png", &a);
        write(gt.path(), "only_gt.png", &a);
        std::fs::write(pred.path().join("notes.txt"), "x").unwrap();
        let report = evaluate_dir(pred.path(), gt.path(), MetricOptions::default()).unwrap();
        let names: Vec<_> = report.pairs.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(report.skipped.len(), 2);
        assert!(report.skipped.iter().any(|s| s.ends_with("only_pred.png")));
        assert!(report.skipped.iter().any(|s| s.ends_with("only_gt.png")));
        let mean = (report.pairs[0].psnr_db + report.pairs[1].psnr_db) / 2.0;
        assert!((report.aggregate["psnr_db"].mean - mean).abs() < 1e-9);
        assert_eq!(report.pairs[1].psnr_db, 99.0);
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["pairs"][0]["lpips"].is_null());
        assert!(json["aggregate"]["ssim"]["std"].is_number());
    }

    #[test]
    fn pair_shape_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "p.png",
            &noise(16, 16, ColorSpace::Srgb, 7, 1.0),
        );
        write(
            dir.path(),
            "g.png",
            &noise(20, 16, ColorSpace::Srgb, 8, 1.0),
        );
        let err = evaluate_pair(
            dir.path().join("p.png"),
            dir.path().join("g.png"),
            MetricOptions::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("16x16x3") && err.contains("20x16x3"), "{err}");
    }

    #[test]
    fn linear_option_changes_psnr() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "p.png",
            &ImageF::filled(16, 16, ColorSpace::Srgb, 0.5).unwrap(),
        );
        write(
            dir.path(),
            "g.png",
            &ImageF::filled(16, 16, ColorSpace::Srgb, 0.6).unwrap(),
        );
        let (p, g) = (dir.path().join("p.png"), dir.path().join("g.png"));
        let enc = evaluate_pair(&p, &g, MetricOptions { linear: false }).unwrap();
        let lin = evaluate_pair(&p, &g, MetricOptions { linear: true }).unwrap();
        assert!(enc.psnr_db != lin.psnr_db);
        let q = |v: f64| (v * 65535.0).round() / 65535.0;
        let d = srgb_decode(q(0.6)) - srgb_decode(q(0.5));
        assert!((lin.psnr_db - (-10.0 * (d * d).log10())).abs() < 1e-9);
    }

    #[test]
    fn stat_population_std() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert!(Stat::of(&[]).is_none());
    }

    proptest! {
        #[test]
        fn psnr_symmetric_and_monotone(seed in any::<u64>(), eps in 0.001f64..0.2) {
            let a = noise(12, 12, ColorSpace::Gray, seed, 0.5);
            let b = a.map(ColorSpace::Gray, |v| v + eps).unwrap();
            let c = a.map(ColorSpace::Gray, |v| v + 2.0 * eps).unwrap();
            prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
            prop_assert!(psnr(&a, &c, 1.0).unwrap() < psnr(&a, &b, 1.0).unwrap());
        }

        #[test]
        fn ssim_symmetric_bounded(s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = noise(14, 12, ColorSpace::Srgb, s1, 1.0);
            let b = noise(14, 12, ColorSpace::Srgb, s2, 1.0);
            let ab = ssim(&a, &b).unwrap();
            prop_assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-9);
            prop_assert!(ab > -1.0 && ab <= 1.0);
            prop_assert!(ab < 1.0 - 1e-6);
        }

        #[test]
        fn angle_scale_invariant(seed in any::<u64>(), s2 in any::<u64>()) {
            let g = noise(6, 5, ColorSpace::Srgb, seed, 0.5).map(ColorSpace::Srgb, |v| v + 0.01).unwrap();
            let p = noise(6, 5, ColorSpace::Srgb, s2, 0.5).map(ColorSpace::Srgb, |v| v + 0.01).unwrap();
            let p2 = p.map(ColorSpace::Srgb, |v| 2.0 * v).unwrap();
            let g2 = g.map(ColorSpace::Srgb, |v| 2.0 * v).unwrap();
            let base = angular_error(&p, &g).unwrap();
            prop_assert!((angular_error(&p2, &g).unwrap() - base).abs() < 1e-9);
            prop_assert!((angular_error(&p, &g2).unwrap() - base).abs() < 1e-9);
            prop_assert_eq!(angular_error(&g, &g2).unwrap(), 0.0);
            prop_assert!((0.0..=180.0).contains(&base));
        }
    }
}
