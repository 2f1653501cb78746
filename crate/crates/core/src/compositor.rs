//! Matting-equation compositing, binary labels and trimaps.

use crate::error::{MatteError, Result};
use crate::types::{ensure_same_dims, AlphaMatte, BinaryMask, ImageBuffer};

/// Default half-width of the trimap unknown band, in pixels.
pub const DEFAULT_TRIMAP_RADIUS: usize = 15;

/// `C = alpha * F + (1 - alpha) * B`, per pixel and channel.
pub fn composite(fg: &ImageBuffer, bg: &ImageBuffer, alpha: &AlphaMatte) -> Result<ImageBuffer> {
    ensure_same_dims("composite foreground vs alpha", alpha.dims(), fg.dims())?;
    ensure_same_dims("composite background vs alpha", alpha.dims(), bg.dims())?;
    if fg.channels() != bg.channels() {
        return Err(MatteError::ChannelMismatch {
            context: "composite background",
            expected: fg.channels(),
            found: bg.channels(),
        });
    }
    let n = alpha.dims().len();
    let a = alpha.values();
    let data: Vec<f32> = fg
        .data()
        .iter()
        .zip(bg.data())
        .enumerate()
        .map(|(i, (&f, &b))| {
            let a = a[i % n] as f64;
            let c = a * f as f64 + (1.0 - a) * b as f64;
            (c as f32).clamp(0.0, 1.0)
        })
        .collect();
    ImageBuffer::new(fg.height(), fg.width(), fg.channels(), data)
}

/// Binary coarse label: 1 wherever alpha is strictly positive.
pub fn binarize_alpha(alpha: &AlphaMatte) -> BinaryMask {
    BinaryMask::from_bools(
        alpha.height(),
        alpha.width(),
        alpha.values().iter().map(|&v| v > 0.0).collect(),
    )
    .expect("matte dimensions are valid")
}

/// For each pixel, whether the (2r+1)-wide window along one axis is entirely
/// set (`all = true`) or contains any set pixel (`all = false`). Samples
/// outside the raster count as unset.
fn window_pass(src: &[bool], h: usize, w: usize, r: usize, horizontal: bool, all: bool) -> Vec<bool> {
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut out = vec![false; h * w];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[idx(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let set = prefix[hi + 1] - prefix[lo];
            out[idx(line, i)] = if all { set == 2 * r + 1 } else { set > 0 };
        }
    }
    out
}

/// Erosion with a (2r+1) square; outside the raster is background.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    let rows = window_pass(mask.values(), h, w, radius, true, true);
    let out = window_pass(&rows, h, w, radius, false, true);
    BinaryMask::from_bools(h, w, out).expect("same dimensions")
}

/// Dilation with a (2r+1) square.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    let rows = window_pass(mask.values(), h, w, radius, true, false);
    let out = window_pass(&rows, h, w, radius, false, false);
    BinaryMask::from_bools(h, w, out).expect("same dimensions")
}

/// Three-level trimap: 1 for eroded definite foreground, 0 outside the
/// dilated support, 0.5 in between.
pub fn make_trimap(alpha: &AlphaMatte, radius: usize) -> ImageBuffer {
    let opaque = BinaryMask::from_bools(
        alpha.height(),
        alpha.width(),
        alpha.values().iter().map(|&v| v >= 1.0).collect(),
    )
    .expect("matte dimensions are valid");
    let fg = erode(&opaque, radius);
    let support = dilate(&binarize_alpha(alpha), radius);
    let data = fg
        .values()
        .iter()
        .zip(support.values())
        .map(|(&f, &s)| match (f, s) {
            (true, _) => 1.0,
            (false, false) => 0.0,
            (false, true) => 0.5,
        })
        .collect();
    ImageBuffer::new(alpha.height(), alpha.width(), 1, data).expect("trimap values are in range")
}

/// Pixels marked unknown (0.5) in a trimap.
pub fn trimap_unknown(trimap: &ImageBuffer) -> BinaryMask {
    BinaryMask::from_bools(
        trimap.height(),
        trimap.width(),
        trimap.plane(0).iter().map(|&v| v > 0.0 && v < 1.0).collect(),
    )
    .expect("trimap dimensions are valid")
}
