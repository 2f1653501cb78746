//! C ABI for `mattekit`.
//!
//! Rasters cross the boundary as opaque handles (`MkMatte`, `MkImage`,
//! `MkMask`) created from caller buffers or PNG files and released with the
//! matching `*_free`. Every fallible function returns an `MkStatus`; on
//! failure, `mk_last_error_message` describes the most recent error on the
//! calling thread. Handles are not synchronized: share one across threads
//! only for concurrent reads.
//!
//! Image data is planar (`C x H x W`) `float` in `[0, 1]`; masks are bytes,
//! non-zero meaning set.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use mattekit::compositor::{binarize_alpha, composite, make_trimap};
use mattekit::fusion::{f_quant_with, fuse, FusionConfig, QuantBand};
use mattekit::harmony::{harmonize, HarmonyConfig};
use mattekit::io::{read_image, read_matte, write_image, write_matte, BitDepth};
use mattekit::losses::{bce, coarse_loss, refine_loss};
use mattekit::metrics::{evaluate_pair, MetricsConfig, Region};
use mattekit::{AlphaMatte, BinaryMask, ImageBuffer, MatteError, Warning};

/// Result codes. `MK_OK` is zero; every other value is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStatus {
    MkOk = 0,
    MkNullPointer = 1,
    MkInvalidUtf8 = 2,
    MkInvalidArgument = 3,
    MkOutOfRangeValue = 4,
    MkShapeMismatch = 5,
    MkNonBinaryValue = 6,
    MkZeroDimension = 7,
    MkUnsupportedChannels = 8,
    MkEmptyMask = 9,
    MkEmptyBackground = 10,
    MkImageTooSmall = 11,
    MkChannelMismatch = 12,
    MkImageDecode = 13,
    MkIo = 14,
    MkPanic = 15,
}

/// Single-channel alpha matte.
pub struct MkMatte(AlphaMatte);

/// Planar image with 1 or 3 channels.
pub struct MkImage(ImageBuffer);

/// Boolean pixel mask.
pub struct MkMask(BinaryMask);

/// The four matting metrics, with the default scales.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MkMetrics {
    pub sad: f64,
    pub mse: f64,
    pub grad: f64,
    pub conn: f64,
    /// Non-zero when no pixel is fully opaque in both mattes (Conn is then 0).
    pub no_opaque_region: i32,
}

/// Refinement loss and its three components.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MkRefineLoss {
    pub l1: f64,
    pub composition: f64,
    pub laplacian: f64,
    pub total: f64,
    /// Non-zero when the unknown mask was empty (all terms are then 0).
    pub empty_unknown: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MatteError) -> MkStatus {
    match e {
        MatteError::OutOfRangeValue { .. } => MkStatus::MkOutOfRangeValue,
        MatteError::ShapeMismatch { .. } => MkStatus::MkShapeMismatch,
        MatteError::NonBinaryValue { .. } => MkStatus::MkNonBinaryValue,
        MatteError::ZeroDimension { .. } => MkStatus::MkZeroDimension,
        MatteError::UnsupportedChannels(_) => MkStatus::MkUnsupportedChannels,
        MatteError::EmptyMask => MkStatus::MkEmptyMask,
        MatteError::EmptyBackground => MkStatus::MkEmptyBackground,
        MatteError::ImageTooSmall { .. } => MkStatus::MkImageTooSmall,
        MatteError::ChannelMismatch { .. } => MkStatus::MkChannelMismatch,
        MatteError::ImageDecode { .. } => MkStatus::MkImageDecode,
        MatteError::Io { .. } => MkStatus::MkIo,
        _ => MkStatus::MkInvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Utf8,
    Arg(String),
    Matte(MatteError),
}

impl From<MatteError> for Fail {
    fn from(e: MatteError) -> Self {
        Fail::Matte(e)
    }
}

type FfiResult = Result<(), Fail>;

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> FfiResult) -> MkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MkStatus::MkOk,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MkStatus::MkNullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("path is not valid UTF-8".into());
            MkStatus::MkInvalidUtf8
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            MkStatus::MkInvalidArgument
        }
        Ok(Err(Fail::Matte(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MkStatus::MkPanic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Fail::Utf8)?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn set_scalar<T>(out: *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = value };
    Ok(())
}

fn depth_of(bits: u32) -> Result<BitDepth, Fail> {
    match bits {
        8 => Ok(BitDepth::Eight),
        16 => Ok(BitDepth::Sixteen),
        other => Err(Fail::Arg(format!("bit depth must be 8 or 16, got {other}"))),
    }
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

// ---------------------------------------------------------------- errors

/// Length in bytes (without the terminator) of the last error message on
/// this thread, or 0 if there is none.
#[no_mangle]
pub extern "C" fn mk_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let msg = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

// ---------------------------------------------------------------- mattes

/// Creates a matte from `height * width` row-major values in `[0, 1]`.
///
/// # Safety
/// `values` must be valid for `height * width` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_new(height: usize, width: usize, values: *const f32, out: *mut *mut MkMatte) -> MkStatus {
    guard(|| {
        let n = height.checked_mul(width).ok_or_else(|| Fail::Arg("size overflow".into()))?;
        let v = unsafe { input(values, n, "values") }?;
        let m = AlphaMatte::new(height, width, v.to_vec())?;
        unsafe { put(out, MkMatte(m)) }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_load(path: *const c_char, out: *mut *mut MkMatte) -> MkStatus {
    guard(|| {
        let (m, _) = read_matte(unsafe { path_arg(path) }?)?;
        unsafe { put(out, MkMatte(m)) }
    })
}

/// Writes a single-channel PNG at 8 or 16 bits.
///
/// # Safety
/// `matte` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_save(matte: *const MkMatte, path: *const c_char, bits: u32) -> MkStatus {
    guard(|| {
        let m = unsafe { borrow(matte, "matte") }?;
        write_matte(unsafe { path_arg(path) }?, &m.0, depth_of(bits)?)?;
        Ok(())
    })
}

/// # Safety
/// `matte` must be a live handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_dims(matte: *const MkMatte, height: *mut usize, width: *mut usize) -> MkStatus {
    guard(|| {
        let m = unsafe { borrow(matte, "matte") }?;
        unsafe { set_scalar(height, m.0.height()) }?;
        unsafe { set_scalar(width, m.0.width()) }
    })
}

/// Copies the values out; `len` must equal `height * width`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_values(matte: *const MkMatte, out: *mut f32, len: usize) -> MkStatus {
    guard(|| {
        let m = unsafe { borrow(matte, "matte") }?;
        if len != m.0.values().len() {
            return Err(Fail::Arg(format!("buffer holds {len} values, matte has {}", m.0.values().len())));
        }
        unsafe { output(out, len, "out") }?.copy_from_slice(m.0.values());
        Ok(())
    })
}

/// # Safety
/// `matte` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mk_matte_free(matte: *mut MkMatte) {
    unsafe { free_handle(matte) }
}

// ---------------------------------------------------------------- images

/// Creates an image from planar data of `channels * height * width` values.
///
/// # Safety
/// `data` must be valid for that many reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_image_new(
    height: usize,
    width: usize,
    channels: usize,
    data: *const f32,
    out: *mut *mut MkImage,
) -> MkStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Fail::Arg("size overflow".into()))?;
        let v = unsafe { input(data, n, "data") }?;
        let img = ImageBuffer::new(height, width, channels, v.to_vec())?;
        unsafe { put(out, MkImage(img)) }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_image_load(path: *const c_char, out: *mut *mut MkImage) -> MkStatus {
    guard(|| {
        let (img, _) = read_image(unsafe { path_arg(path) }?)?;
        unsafe { put(out, MkImage(img)) }
    })
}

/// # Safety
/// `image` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mk_image_save(image: *const MkImage, path: *const c_char, bits: u32) -> MkStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        write_image(unsafe { path_arg(path) }?, &img.0, depth_of(bits)?)?;
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_image_dims(
    image: *const MkImage,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> MkStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        unsafe { set_scalar(height, img.0.height()) }?;
        unsafe { set_scalar(width, img.0.width()) }?;
        unsafe { set_scalar(channels, img.0.channels()) }
    })
}

/// Copies the planar data out; `len` must equal `channels * height * width`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mk_image_data(image: *const MkImage, out: *mut f32, len: usize) -> MkStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        if len != img.0.data().len() {
            return Err(Fail::Arg(format!("buffer holds {len} values, image has {}", img.0.data().len())));
        }
        unsafe { output(out, len, "out") }?.copy_from_slice(img.0.data());
        Ok(())
    })
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mk_image_free(image: *mut MkImage) {
    unsafe { free_handle(image) }
}

// ---------------------------------------------------------------- masks

/// Creates a mask from `height * width` bytes; non-zero means set.
///
/// # Safety
/// `values` must be valid for `height * width` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_mask_new(height: usize, width: usize, values: *const u8, out: *mut *mut MkMask) -> MkStatus {
    guard(|| {
        let n = height.checked_mul(width).ok_or_else(|| Fail::Arg("size overflow".into()))?;
        let v = unsafe { input(values, n, "values") }?;
        let m = BinaryMask::from_bools(height, width, v.iter().map(|&b| b != 0).collect())?;
        unsafe { put(out, MkMask(m)) }
    })
}

/// # Safety
/// `mask` must be a live handle; `height`, `width` and `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_mask_dims(mask: *const MkMask, height: *mut usize, width: *mut usize, count: *mut usize) -> MkStatus {
    guard(|| {
        let m = unsafe { borrow(mask, "mask") }?;
        unsafe { set_scalar(height, m.0.height()) }?;
        unsafe { set_scalar(width, m.0.width()) }?;
        unsafe { set_scalar(count, m.0.count()) }
    })
}

/// Copies the mask out as 0/1 bytes; `len` must equal `height * width`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mk_mask_values(mask: *const MkMask, out: *mut u8, len: usize) -> MkStatus {
    guard(|| {
        let m = unsafe { borrow(mask, "mask") }?;
        if len != m.0.values().len() {
            return Err(Fail::Arg(format!("buffer holds {len} values, mask has {}", m.0.values().len())));
        }
        for (o, &v) in unsafe { output(out, len, "out") }?.iter_mut().zip(m.0.values()) {
            *o = v as u8;
        }
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mk_mask_free(mask: *mut MkMask) {
    unsafe { free_handle(mask) }
}

// ---------------------------------------------------------------- operations

/// `alpha * fg + (1 - alpha) * bg`.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_composite(
    fg: *const MkImage,
    bg: *const MkImage,
    alpha: *const MkMatte,
    out: *mut *mut MkImage,
) -> MkStatus {
    guard(|| {
        let (f, b, a) = unsafe { (borrow(fg, "fg")?, borrow(bg, "bg")?, borrow(alpha, "alpha")?) };
        let c = composite(&f.0, &b.0, &a.0)?;
        unsafe { put(out, MkImage(c)) }
    })
}

/// Pixels with `alpha > 0`.
///
/// # Safety
/// `alpha` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_binarize_alpha(alpha: *const MkMatte, out: *mut *mut MkMask) -> MkStatus {
    guard(|| {
        let a = unsafe { borrow(alpha, "alpha") }?;
        unsafe { put(out, MkMask(binarize_alpha(&a.0))) }
    })
}

/// Three-level trimap (0, 0.5, 1) as a one-channel image.
///
/// # Safety
/// `alpha` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_trimap(alpha: *const MkMatte, radius: usize, out: *mut *mut MkImage) -> MkStatus {
    guard(|| {
        let a = unsafe { borrow(alpha, "alpha") }?;
        unsafe { put(out, MkImage(make_trimap(&a.0, radius))) }
    })
}

fn band(lo: f64, hi: f64) -> Result<QuantBand, Fail> {
    if !(lo < hi) {
        return Err(Fail::Arg(format!("quantization band ({lo}, {hi}) is empty")));
    }
    Ok(QuantBand { lo, hi })
}

/// Pixels with `lo < alpha < hi`; pass `(0, 1)` for the strict band.
///
/// # Safety
/// `alpha` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_f_quant(alpha: *const MkMatte, lo: f64, hi: f64, out: *mut *mut MkMask) -> MkStatus {
    guard(|| {
        let a = unsafe { borrow(alpha, "alpha") }?;
        let g = f_quant_with(&a.0, band(lo, hi)?);
        unsafe { put(out, MkMask(g)) }
    })
}

/// High-resolution values inside the band, upsampled low-resolution values
/// elsewhere. With `resize == 0` the two mattes must have equal size.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_fuse(
    high: *const MkMatte,
    low: *const MkMatte,
    lo: f64,
    hi: f64,
    resize: i32,
    out: *mut *mut MkMatte,
) -> MkStatus {
    guard(|| {
        let (h, l) = unsafe { (borrow(high, "high")?, borrow(low, "low")?) };
        let b = band(lo, hi)?;
        let cfg = FusionConfig {
            quant_lo: b.lo,
            quant_hi: b.hi,
            resize: resize != 0,
        };
        unsafe { put(out, MkMatte(fuse(&h.0, &l.0, &cfg)?)) }
    })
}

/// Re-renders the masked foreground with the background statistics.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_harmonize(
    image: *const MkImage,
    fg_mask: *const MkMask,
    epsilon: f64,
    literal_eq10: i32,
    out: *mut *mut MkImage,
) -> MkStatus {
    guard(|| {
        let (img, m) = unsafe { (borrow(image, "image")?, borrow(fg_mask, "fg_mask")?) };
        if !(epsilon >= 0.0) {
            return Err(Fail::Arg("epsilon must be >= 0".into()));
        }
        let cfg = HarmonyConfig {
            epsilon,
            literal_eq10: literal_eq10 != 0,
        };
        unsafe { put(out, MkImage(harmonize(&img.0, &m.0, &cfg)?)) }
    })
}

/// SAD, MSE, Grad and Conn over `region`, or the whole image if it is null.
///
/// # Safety
/// `pred` and `gt` must be live; `region` null or live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_metrics(
    pred: *const MkMatte,
    gt: *const MkMatte,
    region: *const MkMask,
    out: *mut MkMetrics,
) -> MkStatus {
    guard(|| {
        let (p, g) = unsafe { (borrow(pred, "pred")?, borrow(gt, "gt")?) };
        let region = match unsafe { region.as_ref() } {
            Some(m) => Region::Mask(&m.0),
            None => Region::Whole,
        };
        let m = evaluate_pair("", &p.0, &g.0, region, &MetricsConfig::default())?;
        let result = MkMetrics {
            sad: m.sad,
            mse: m.mse,
            grad: m.grad,
            conn: m.conn,
            no_opaque_region: m.warnings.contains(&Warning::NoFullyOpaqueRegion) as i32,
        };
        unsafe { set_scalar(out, result) }
    })
}

/// Mean binary cross-entropy of `pred` against `target`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_bce(pred: *const MkMatte, target: *const MkMask, out: *mut f64) -> MkStatus {
    guard(|| {
        let (p, t) = unsafe { (borrow(pred, "pred")?, borrow(target, "target")?) };
        unsafe { set_scalar(out, bce(&p.0, &t.0)?) }
    })
}

/// `dom + 0.8 aux1 + 0.6 aux2 + 0.4 aux3`.
#[no_mangle]
pub extern "C" fn mk_coarse_loss(dom: f64, aux1: f64, aux2: f64, aux3: f64) -> f64 {
    coarse_loss(dom, [aux1, aux2, aux3])
}

/// L1 + composition + Laplacian loss restricted to the unknown mask `g`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_refine_loss(
    pred: *const MkMatte,
    gt: *const MkMatte,
    fg: *const MkImage,
    bg: *const MkImage,
    g: *const MkMask,
    out: *mut MkRefineLoss,
) -> MkStatus {
    guard(|| {
        let (p, t, f, b, m) = unsafe {
            (
                borrow(pred, "pred")?,
                borrow(gt, "gt")?,
                borrow(fg, "fg")?,
                borrow(bg, "bg")?,
                borrow(g, "g")?,
            )
        };
        let r = refine_loss(&p.0, &t.0, &f.0, &b.0, &m.0)?;
        let result = MkRefineLoss {
            l1: r.l1,
            composition: r.composition,
            laplacian: r.laplacian,
            total: r.total,
            empty_unknown: (r.warning == Some(Warning::EmptyUnknown)) as i32,
        };
        unsafe { set_scalar(out, result) }
    })
}
