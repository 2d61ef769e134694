use super::{ColorSpace, ImageF};
use crate::error::{Error, Result};

/// sRGB electro-optical transfer function for one encoded sample.
#[inline]
pub fn srgb_decode(u: f64) -> f64 {
    if u <= 0.04045 {
        u / 12.92
    } else {
        ((u + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_decode`].
#[inline]
pub fn srgb_encode(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(img: &ImageF) -> Result<ImageF> {
    img.ensure_space(ColorSpace::Srgb)?;
    img.map(ColorSpace::LinearRgb, srgb_decode)
}

pub fn linear_to_srgb(img: &ImageF) -> Result<ImageF> {
    img.ensure_space(ColorSpace::LinearRgb)?;
    img.map(ColorSpace::Srgb, srgb_encode)
}

fn require_three(img: &ImageF, space: ColorSpace) -> Result<()> {
    img.ensure_space(space)?;
    if img.channels() != 3 {
        return Err(Error::InvalidImage("expected 3 channels".into()));
    }
    Ok(())
}

/// Hexcone RGB to HSV, every channel in [0,1]. Hue is 0 wherever the
/// saturation is 0.
pub fn rgb_to_hsv(img: &ImageF) -> Result<ImageF> {
    require_three(img, ColorSpace::Srgb)?;
    let n = img.plane_len();
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        let (h, s, v) = hsv_pixel(r[i], g[i], b[i]);
        out[i] = h;
        out[n + i] = s;
        out[2 * n + i] = v;
    }
    ImageF::new(img.width(), img.height(), ColorSpace::Hsv, out)
}

fn hsv_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 || s == 0.0 {
        return (0.0, 0.0, v);
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    (h, s, v)
}

pub fn hsv_to_rgb(img: &ImageF) -> Result<ImageF> {
    require_three(img, ColorSpace::Hsv)?;
    let n = img.plane_len();
    let (hp, sp, vp) = (img.plane(0), img.plane(1), img.plane(2));
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        let (r, g, b) = rgb_pixel(hp[i], sp[i], vp[i]);
        out[i] = r;
        out[n + i] = g;
        out[2 * n + i] = b;
    }
    ImageF::new(img.width(), img.height(), ColorSpace::Srgb, out)
}

fn rgb_pixel(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as i64).clamp(0, 5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    fn rgb(r: f64, g: f64, b: f64) -> ImageF {
        ImageF::new(1, 1, ColorSpace::Srgb, vec![r, g, b]).unwrap()
    }

    #[test]
    fn eotf_fixed_points_and_midpoint() {
        assert_eq!(srgb_decode(0.0), 0.0);
        assert!((srgb_decode(1.0) - 1.0).abs() < 1e-15);
        // ((0.5 + 0.055) / 1.055)^2.4 evaluated independently: 0.214041140...
        assert!((srgb_decode(0.5) - 0.214_041_140_482_232_5).abs() < 1e-12);
    }

    #[test]
    fn linear_roundtrip() {
        let mut r = XorShift64Star::new(3);
        let img = ImageF::from_fn(16, 16, ColorSpace::Srgb, |_, _, _| r.next_f64()).unwrap();
        let back = linear_to_srgb(&srgb_to_linear(&img).unwrap()).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_tag_rejected() {
        let img = rgb(0.1, 0.2, 0.3);
        assert!(matches!(
            linear_to_srgb(&img),
            Err(Error::WrongSpace { .. })
        ));
        let gray = ImageF::filled(2, 2, ColorSpace::Gray, 0.5).unwrap();
        assert!(rgb_to_hsv(&gray).is_err());
    }

    #[test]
    fn hsv_reference_pixels() {
        let red = rgb_to_hsv(&rgb(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(red.data(), &[0.0, 1.0, 1.0]);
        let gray = rgb_to_hsv(&rgb(0.5, 0.5, 0.5)).unwrap();
        assert_eq!(gray.data(), &[0.0, 0.0, 0.5]);
        let blue = rgb_to_hsv(&rgb(0.0, 0.0, 1.0)).unwrap();
        assert!((blue.data()[0] - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn hsv_roundtrip_random() {
        let mut r = XorShift64Star::new(11);
        let img = ImageF::from_fn(32, 32, ColorSpace::Srgb, |_, _, _| r.next_f64()).unwrap();
        let hsv = rgb_to_hsv(&img).unwrap();
        assert!(hsv.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let back = hsv_to_rgb(&hsv).unwrap();
        let n = img.plane_len();
        for i in 0..n {
            if hsv.data()[n + i] <= 1e-4 {
                continue;
            }
            for c in 0..3 {
                assert!((img.data()[c * n + i] - back.data()[c * n + i]).abs() < 1e-5);
            }
        }
    }
}
