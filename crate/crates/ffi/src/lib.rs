//! C ABI over the tilegraft library.
//!
//! Every fallible call returns a [`TgStatus`]. On failure a message is kept
//! per thread and can be read with [`tg_last_error_message`]. Images cross
//! the boundary as opaque [`TgImage`] handles owned by the caller and
//! released with [`tg_image_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tilegraft::image::{load_image, save_image, BitDepth};
use tilegraft::metrics;
use tilegraft::softhist::{cdf_loss, cdf_loss_grad, HistConfig, Kernel};
use tilegraft::tiler::{parse_operator, tile_translate_with, MaskKind, TileOptions};
use tilegraft::{ColorSpace, Error, ImageF};

/// Opaque image handle. Planar `f64` samples, 1 (gray) or 3 (sRGB) channels.
pub struct TgImage {
    inner: ImageF,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    ShapeMismatch = 5,
    WrongSpace = 6,
    Degenerate = 7,
    Operator = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgKernel {
    Logistic = 0,
    Triangular = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgMask {
    Hann = 0,
    Box = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> TgStatus {
    match err {
        Error::Io { .. } => TgStatus::Io,
        Error::PngDecode(_)
        | Error::PngEncode(_)
        | Error::UnsupportedFormat(_)
        | Error::Malformed(_) => TgStatus::Format,
        Error::InvalidImage(_) | Error::InvalidArgument(_) => TgStatus::InvalidArgument,
        Error::WrongSpace { .. } => TgStatus::WrongSpace,
        Error::ShapeMismatch { .. } => TgStatus::ShapeMismatch,
        Error::Degenerate(_) => TgStatus::Degenerate,
        Error::Operator { .. } | Error::Protocol(_) | Error::Subprocess(_) => TgStatus::Operator,
    }
}

struct Fail(TgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TgStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            TgStatus::Panic
        }
    }
}

unsafe fn image_ref<'a>(img: *const TgImage, what: &str) -> Result<&'a ImageF, Fail> {
    img.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Fail(
            TgStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn put<T>(out: *mut T, value: T) {
    *out = value;
}

fn into_handle(img: ImageF) -> *mut TgImage {
    Box::into_raw(Box::new(TgImage { inner: img }))
}

fn hist_config(bins: usize, tau: f64, kernel: u32) -> Result<HistConfig, Fail> {
    let kernel = match kernel {
        k if k == TgKernel::Logistic as u32 => Kernel::Logistic,
        k if k == TgKernel::Triangular as u32 => Kernel::Triangular,
        k => {
            return Err(Fail(
                TgStatus::InvalidArgument,
                format!("unknown kernel {k}"),
            ))
        }
    };
    Ok(HistConfig { bins, tau, kernel })
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. Valid until the next `tg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build an image from `width * height * channels` planar samples.
///
/// # Safety
/// `data` must point to that many readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tg_image_new(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut TgImage,
) -> TgStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let space = match channels {
            1 => ColorSpace::Gray,
            3 => ColorSpace::Srgb,
            n => {
                return Err(Fail(
                    TgStatus::InvalidArgument,
                    format!("channels must be 1 or 3, got {n}"),
                ))
            }
        };
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Fail(TgStatus::InvalidArgument, "image size overflows".into()))?;
        let samples = std::slice::from_raw_parts(data, len).to_vec();
        let img = ImageF::new(width, height, space, samples)?;
        put(out, into_handle(img));
        Ok(())
    })
}

/// Decode a PNG or PFM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tg_image_load(path: *const c_char, out: *mut *mut TgImage) -> TgStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, into_handle(load_image(path)?));
        Ok(())
    })
}

/// Encode an image. `bit_depth` is 8 or 16 for PNG, 32 for PFM.
///
/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tg_image_save(
    img: *const TgImage,
    path: *const c_char,
    bit_depth: u32,
) -> TgStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let path = str_arg(path, "path")?;
        let depth = match bit_depth {
            8 => BitDepth::Eight,
            16 => BitDepth::Sixteen,
            32 => BitDepth::Float,
            d => {
                return Err(Fail(
                    TgStatus::InvalidArgument,
                    format!("bit depth must be 8, 16 or 32, got {d}"),
                ))
            }
        };
        save_image(img, path, depth)?;
        Ok(())
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `img` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tg_image_free(img: *mut TgImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be NULL or a live handle. Returns 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn tg_image_width(img: *const TgImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.width())
}

/// # Safety
/// `img` must be NULL or a live handle. Returns 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn tg_image_height(img: *const TgImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.height())
}

/// # Safety
/// `img` must be NULL or a live handle. Returns 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn tg_image_channels(img: *const TgImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.channels())
}

/// Copy the planar samples into `out`, which holds `len` doubles.
/// `len` must equal width * height * channels.
///
/// # Safety
/// `img` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_image_copy_data(
    img: *const TgImage,
    out: *mut f64,
    len: usize,
) -> TgStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = img.data();
        if len != data.len() {
            return Err(Fail(
                TgStatus::ShapeMismatch,
                format!("buffer holds {len} samples, image has {}", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, len);
        Ok(())
    })
}

/// Tile a gray image through a patch operator and blend the RGB result.
/// `mask` is a [`TgMask`] value.
///
/// `op` takes the same forms as the command line: `identity`,
/// `lut:<file>`, `toyconv:<file>` or `subprocess:<command>`.
///
/// # Safety
/// `gray` must be a live handle, `op` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tg_tile_translate(
    gray: *const TgImage,
    op: *const c_char,
    patch: usize,
    stride: usize,
    epsilon: f64,
    mask: u32,
    out: *mut *mut TgImage,
) -> TgStatus {
    guard(|| {
        let img = image_ref(gray, "gray")?;
        let spec = str_arg(op, "op")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let operator = parse_operator(spec)?;
        let opts = TileOptions {
            patch,
            stride,
            epsilon,
            mask: match mask {
                m if m == TgMask::Hann as u32 => MaskKind::Hann,
                m if m == TgMask::Box as u32 => MaskKind::Box,
                m => return Err(Fail(TgStatus::InvalidArgument, format!("unknown mask {m}"))),
            },
            threads: 0,
        };
        let rgb = tile_translate_with(img, operator.as_ref(), &opts)?;
        put(out, into_handle(rgb));
        Ok(())
    })
}

/// Soft-histogram CDF loss between two images of equal shape.
/// `kernel` is a [`TgKernel`] value.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_cdf_loss(
    pred: *const TgImage,
    target: *const TgImage,
    bins: usize,
    tau: f64,
    kernel: u32,
    out: *mut f64,
) -> TgStatus {
    guard(|| {
        let pred = image_ref(pred, "pred")?;
        let target = image_ref(target, "target")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(
            out,
            cdf_loss(pred, target, &hist_config(bins, tau, kernel)?)?,
        );
        Ok(())
    })
}

/// Gradient of [`tg_cdf_loss`] with respect to `pred`, as a new image.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_cdf_loss_grad(
    pred: *const TgImage,
    target: *const TgImage,
    bins: usize,
    tau: f64,
    kernel: u32,
    out: *mut *mut TgImage,
) -> TgStatus {
    guard(|| {
        let pred = image_ref(pred, "pred")?;
        let target = image_ref(target, "target")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grad = cdf_loss_grad(pred, target, &hist_config(bins, tau, kernel)?)?;
        put(out, into_handle(grad));
        Ok(())
    })
}

unsafe fn pair_metric(
    a: *const TgImage,
    b: *const TgImage,
    out: *mut f64,
    f: impl FnOnce(&ImageF, &ImageF) -> tilegraft::Result<f64>,
) -> TgStatus {
    guard(|| {
        let a = image_ref(a, "a")?;
        let b = image_ref(b, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, f(a, b)?);
        Ok(())
    })
}

/// PSNR in dB, capped at 99.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_psnr(
    a: *const TgImage,
    b: *const TgImage,
    max_i: f64,
    out: *mut f64,
) -> TgStatus {
    pair_metric(a, b, out, |a, b| metrics::psnr(a, b, max_i))
}

/// Mean SSIM over channels.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_ssim(a: *const TgImage, b: *const TgImage, out: *mut f64) -> TgStatus {
    pair_metric(a, b, out, metrics::ssim)
}

/// Mean per-pixel angular error in degrees. Both images must be RGB.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_angular_error(
    pred: *const TgImage,
    gt: *const TgImage,
    out: *mut f64,
) -> TgStatus {
    pair_metric(pred, gt, out, metrics::angular_error)
}
