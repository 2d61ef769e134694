use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tilegraft_ffi::*;

struct Handle(*mut TgImage);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { tg_image_free(self.0) };
    }
}

fn image(w: usize, h: usize, c: usize, data: &[f64]) -> Handle {
    let mut out = ptr::null_mut();
    let status = unsafe { tg_image_new(w, h, c, data.as_ptr(), &mut out) };
    assert_eq!(status, TgStatus::Ok, "{:?}", last_error());
    Handle(out)
}

fn samples(h: &Handle) -> Vec<f64> {
    let n = unsafe { tg_image_width(h.0) * tg_image_height(h.0) * tg_image_channels(h.0) };
    let mut buf = vec![0.0; n];
    let status = unsafe { tg_image_copy_data(h.0, buf.as_mut_ptr(), n) };
    assert_eq!(status, TgStatus::Ok);
    buf
}

fn last_error() -> Option<String> {
    let p = tg_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn ramp(n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|i| ((i * 37) % 101) as f64 / 100.0 * scale)
        .collect()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(tg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn image_roundtrip_through_handle() {
    let data = ramp(5 * 4 * 3, 1.0);
    let img = image(5, 4, 3, &data);
    unsafe {
        assert_eq!(tg_image_width(img.0), 5);
        assert_eq!(tg_image_height(img.0), 4);
        assert_eq!(tg_image_channels(img.0), 3);
    }
    assert_eq!(samples(&img), data);
}

#[test]
fn rejects_bad_arguments_with_message() {
    let data = [0.5; 8];
    let mut out = ptr::null_mut();
    let s = unsafe { tg_image_new(2, 2, 2, data.as_ptr(), &mut out) };
    assert_eq!(s, TgStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(last_error().unwrap().contains("channels"));

    let s = unsafe { tg_image_new(2, 2, 1, ptr::null(), &mut out) };
    assert_eq!(s, TgStatus::NullPointer);

    let img = image(2, 2, 1, &data[..4]);
    let mut small = [0.0; 3];
    let s = unsafe { tg_image_copy_data(img.0, small.as_mut_ptr(), 3) };
    assert_eq!(s, TgStatus::ShapeMismatch);

    let mut v = 0.0;
    let s = unsafe { tg_cdf_loss(img.0, img.0, 64, 0.02, 7, &mut v) };
    assert_eq!(s, TgStatus::InvalidArgument);
    assert!(last_error().unwrap().contains("kernel"));
}

#[test]
fn success_clears_last_error() {
    let mut out = ptr::null_mut();
    let s = unsafe { tg_image_new(1, 1, 5, [0.0].as_ptr(), &mut out) };
    assert_ne!(s, TgStatus::Ok);
    assert!(last_error().is_some());
    let _img = image(1, 1, 1, &[0.25]);
    assert!(last_error().is_none());
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        tg_image_free(ptr::null_mut());
        assert_eq!(tg_image_width(ptr::null()), 0);
    }
    let mut v = 0.0;
    let s = unsafe { tg_psnr(ptr::null(), ptr::null(), 1.0, &mut v) };
    assert_eq!(s, TgStatus::NullPointer);
}

#[test]
fn save_and_load_pfm_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.pfm").to_str().unwrap()).unwrap();
    let data: Vec<f64> = (0..6 * 3 * 3).map(|i| i as f64 / 64.0).collect();
    let img = image(6, 3, 3, &data);
    assert_eq!(
        unsafe { tg_image_save(img.0, path.as_ptr(), 32) },
        TgStatus::Ok
    );
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { tg_image_load(path.as_ptr(), &mut out) },
        TgStatus::Ok
    );
    let back = Handle(out);
    assert_eq!(samples(&back), data);

    assert_eq!(
        unsafe { tg_image_save(img.0, path.as_ptr(), 12) },
        TgStatus::InvalidArgument
    );
    let missing = CString::new(dir.path().join("nope.png").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { tg_image_load(missing.as_ptr(), &mut out) },
        TgStatus::Io
    );
}

#[test]
fn tile_translate_identity_replicates_gray() {
    let (w, h) = (70, 45);
    let data = ramp(w * h, 1.0);
    let gray = image(w, h, 1, &data);
    let op = CString::new("identity").unwrap();
    let mut out = ptr::null_mut();
    let s = unsafe {
        tg_tile_translate(
            gray.0,
            op.as_ptr(),
            32,
            24,
            1e-4,
            TgMask::Hann as u32,
            &mut out,
        )
    };
    assert_eq!(s, TgStatus::Ok, "{:?}", last_error());
    let rgb = Handle(out);
    assert_eq!(unsafe { tg_image_channels(rgb.0) }, 3);
    let got = samples(&rgb);
    for c in 0..3 {
        for (a, b) in got[c * w * h..(c + 1) * w * h].iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn tile_translate_errors_map_to_status() {
    let rgb = image(4, 4, 3, &[0.5; 48]);
    let op = CString::new("identity").unwrap();
    let mut out = ptr::null_mut();
    let s = unsafe { tg_tile_translate(rgb.0, op.as_ptr(), 4, 4, 1e-4, 0, &mut out) };
    assert_eq!(s, TgStatus::WrongSpace);

    let gray = image(4, 4, 1, &[0.5; 16]);
    let bad = CString::new("warp:9").unwrap();
    let s = unsafe { tg_tile_translate(gray.0, bad.as_ptr(), 4, 4, 1e-4, 0, &mut out) };
    assert_eq!(s, TgStatus::InvalidArgument);
    let s = unsafe { tg_tile_translate(gray.0, op.as_ptr(), 4, 4, 1e-4, 9, &mut out) };
    assert_eq!(s, TgStatus::InvalidArgument);
    let gray8 = image(8, 8, 1, &[0.5; 64]);
    let failing = CString::new("subprocess:exit 4").unwrap();
    let s = unsafe { tg_tile_translate(gray8.0, failing.as_ptr(), 8, 8, 1e-4, 0, &mut out) };
    assert_eq!(s, TgStatus::Operator, "{:?}", last_error());
    assert!(last_error().unwrap().contains("patch 0"));
}

#[test]
fn cdf_loss_and_gradient_agree_with_library() {
    use tilegraft::softhist::{cdf_loss, cdf_loss_grad, HistConfig, Kernel};
    use tilegraft::{ColorSpace, ImageF};

    let (w, h) = (16, 12);
    let p = ramp(w * h * 3, 1.0);
    let t: Vec<f64> = p.iter().map(|v| v * v).collect();
    let pred = image(w, h, 3, &p);
    let target = image(w, h, 3, &t);
    let lp = ImageF::new(w, h, ColorSpace::Srgb, p).unwrap();
    let lt = ImageF::new(w, h, ColorSpace::Srgb, t).unwrap();

    for (k, kernel) in [
        (TgKernel::Logistic, Kernel::Logistic),
        (TgKernel::Triangular, Kernel::Triangular),
    ] {
        let cfg = HistConfig {
            bins: 32,
            tau: 0.03,
            kernel,
        };
        let mut v = f64::NAN;
        let s = unsafe { tg_cdf_loss(pred.0, target.0, 32, 0.03, k as u32, &mut v) };
        assert_eq!(s, TgStatus::Ok);
        assert_eq!(v, cdf_loss(&lp, &lt, &cfg).unwrap());
        assert!(v > 0.0);

        let mut out = ptr::null_mut();
        let s = unsafe { tg_cdf_loss_grad(pred.0, target.0, 32, 0.03, k as u32, &mut out) };
        assert_eq!(s, TgStatus::Ok);
        let g = Handle(out);
        assert_eq!(
            samples(&g),
            cdf_loss_grad(&lp, &lt, &cfg).unwrap().into_data()
        );
    }

    let mut v = 0.0;
    let s = unsafe { tg_cdf_loss(pred.0, target.0, 1, 0.03, 0, &mut v) };
    assert_eq!(s, TgStatus::InvalidArgument);
}

#[test]
fn metrics_identities() {
    let data = ramp(20 * 20 * 3, 1.0);
    let a = image(20, 20, 3, &data);
    let b = image(20, 20, 3, &data);
    let (mut psnr, mut ssim, mut ae) = (0.0, 0.0, 1.0);
    unsafe {
        assert_eq!(tg_psnr(a.0, b.0, 1.0, &mut psnr), TgStatus::Ok);
        assert_eq!(tg_ssim(a.0, b.0, &mut ssim), TgStatus::Ok);
        assert_eq!(tg_angular_error(a.0, b.0, &mut ae), TgStatus::Ok);
    }
    assert_eq!(psnr, 99.0);
    assert!((ssim - 1.0).abs() < 1e-12);
    assert_eq!(ae, 0.0);

    let doubled: Vec<f64> = data.iter().map(|v| v * 0.5).collect();
    let c = image(20, 20, 3, &doubled);
    unsafe { assert_eq!(tg_angular_error(a.0, c.0, &mut ae), TgStatus::Ok) };
    assert!(ae.abs() < 1e-6);
    unsafe { assert_eq!(tg_psnr(a.0, c.0, 1.0, &mut psnr), TgStatus::Ok) };
    assert!(psnr < 99.0);

    let small = image(4, 4, 3, &[0.5; 48]);
    unsafe { assert_eq!(tg_ssim(a.0, small.0, &mut ssim), TgStatus::ShapeMismatch) };
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tilegraft.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in &exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    assert!(header.contains("typedef struct TgImage TgImage;"));

    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe.c");
    std::fs::write(
        &probe,
        "#include \"tilegraft.h\"\n\
         int main(void) {\n\
           TgImage *img = 0;\n\
           double px = 0.5;\n\
           TgStatus s = tg_image_new(1, 1, 1, &px, &img);\n\
           tg_image_free(img);\n\
           return s == TG_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_path.parent().unwrap())
        .arg(&probe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
