//! Region-masked statistics transfer.
//!
//! Pixels under the foreground mask are normalized by the foreground's
//! per-channel mean and standard deviation, then re-scaled and shifted with
//! the background's statistics, so the pasted object picks up the tone of the
//! scene it was composited into.

use serde::{Deserialize, Serialize};

use crate::error::{MatteError, Result};
use crate::types::{ensure_same_dims, BinaryMask, ImageBuffer};

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonyConfig {
    /// Added to the variance inside both square roots.
    pub epsilon: f64,
    /// Scale by the background *mean* and shift by the background *std*,
    /// i.e. the symbol assignment as literally printed. Off by default:
    /// the default scales by std and shifts by mean.
    pub literal_eq10: bool,
}

impl Default for HarmonyConfig {
    fn default() -> Self {
        HarmonyConfig {
            epsilon: DEFAULT_EPSILON,
            literal_eq10: false,
        }
    }
}

/// Per-channel statistics of a masked region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub mean: Vec<f64>,
    /// `sqrt(variance + epsilon)`.
    pub std: Vec<f64>,
    pub pixel_count: usize,
}

/// An unclamped planar image, the output of the transfer before values are
/// forced back into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl RawImage {
    pub fn from_image(img: &ImageBuffer) -> Self {
        RawImage {
            height: img.height(),
            width: img.width(),
            channels: img.channels(),
            data: img.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn to_image(&self) -> Result<ImageBuffer> {
        ImageBuffer::from_clamped(self.height, self.width, self.channels, &self.data)
    }
}

fn plane_stats(plane: &[f64], mask: &[bool], count: usize, epsilon: f64) -> (f64, f64) {
    let mut sum = 0.0;
    for (&v, _) in plane.iter().zip(mask).filter(|(_, &m)| m) {
        sum += v;
    }
    let mean = sum / count as f64;
    let mut sq = 0.0;
    for (&v, _) in plane.iter().zip(mask).filter(|(_, &m)| m) {
        sq += (v - mean) * (v - mean);
    }
    (mean, (sq / count as f64 + epsilon).sqrt())
}

/// Masked statistics of an unclamped image.
pub fn raw_masked_stats(img: &RawImage, mask: &BinaryMask, epsilon: f64) -> Result<RegionStats> {
    if (img.height, img.width) != (mask.height(), mask.width()) {
        return Err(MatteError::shape(
            "masked_stats image vs mask",
            mask.dims(),
            format!("{}x{}", img.height, img.width),
        ));
    }
    let count = mask.count();
    if count == 0 {
        return Err(MatteError::EmptyMask);
    }
    let (mean, std) = (0..img.channels)
        .map(|c| plane_stats(img.plane(c), mask.values(), count, epsilon))
        .unzip();
    Ok(RegionStats {
        mean,
        std,
        pixel_count: count,
    })
}

/// Per-channel mean and `sqrt(var + epsilon)` over the set pixels of `mask`.
pub fn masked_stats(img: &ImageBuffer, mask: &BinaryMask, epsilon: f64) -> Result<RegionStats> {
    ensure_same_dims("masked_stats image vs mask", mask.dims(), img.dims())?;
    raw_masked_stats(&RawImage::from_image(img), mask, epsilon)
}

/// Applies the transfer to an unclamped image; unmasked pixels are copied.
pub fn transfer(img: &RawImage, fg_mask: &BinaryMask, cfg: &HarmonyConfig) -> Result<RawImage> {
    let fg = raw_masked_stats(img, fg_mask, cfg.epsilon)?;
    let bg = match raw_masked_stats(img, &fg_mask.complement(), cfg.epsilon) {
        Err(MatteError::EmptyMask) => return Err(MatteError::EmptyBackground),
        other => other?,
    };
    let mut out = img.clone();
    let n = img.height * img.width;
    for c in 0..img.channels {
        let (scale, shift) = if cfg.literal_eq10 {
            (bg.mean[c], bg.std[c])
        } else {
            (bg.std[c], bg.mean[c])
        };
        let plane = &mut out.data[c * n..(c + 1) * n];
        for (v, _) in plane.iter_mut().zip(fg_mask.values()).filter(|(_, &m)| m) {
            *v = scale * (*v - fg.mean[c]) / fg.std[c] + shift;
        }
    }
    Ok(out)
}

/// The transfer before clamping.
pub fn harmonize_unclamped(composite: &ImageBuffer, fg_mask: &BinaryMask, cfg: &HarmonyConfig) -> Result<RawImage> {
    ensure_same_dims("harmonize composite vs mask", fg_mask.dims(), composite.dims())?;
    transfer(&RawImage::from_image(composite), fg_mask, cfg)
}

/// Re-renders the masked foreground with the background's statistics.
/// Background pixels are returned bit-identical.
pub fn harmonize(composite: &ImageBuffer, fg_mask: &BinaryMask, cfg: &HarmonyConfig) -> Result<ImageBuffer> {
    let raw = harmonize_unclamped(composite, fg_mask, cfg)?;
    let n = composite.dims().len();
    let mask = fg_mask.values();
    let data = raw
        .data
        .iter()
        .zip(composite.data())
        .enumerate()
        .map(|(i, (&t, &orig))| {
            if mask[i % n] {
                if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) as f32 }
            } else {
                orig
            }
        })
        .collect();
    ImageBuffer::new(composite.height(), composite.width(), composite.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_mask(h: usize, w: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |_, x| x < w / 2).unwrap()
    }

    #[test]
    fn constant_region_stats() {
        let img = ImageBuffer::filled(3, 3, 1, 0.3).unwrap();
        let s = masked_stats(&img, &BinaryMask::filled(3, 3, true).unwrap(), DEFAULT_EPSILON).unwrap();
        assert!((s.mean[0] - 0.3).abs() < 1e-7);
        assert!((s.std[0] - 1e-5f64.sqrt()).abs() < 1e-9);
        assert!((s.std[0] - 3.162e-3).abs() < 1e-6);
    }

    #[test]
    fn two_point_stats() {
        let img = ImageBuffer::new(1, 3, 1, vec![0.2, 0.4, 0.9]).unwrap();
        let mask = BinaryMask::from_bools(1, 3, vec![true, true, false]).unwrap();
        let s = masked_stats(&img, &mask, DEFAULT_EPSILON).unwrap();
        assert_eq!(s.pixel_count, 2);
        assert!((s.mean[0] - 0.3).abs() < 1e-7);
        assert!((s.std[0] - (0.01f64 + 1e-5).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn full_mask_equals_whole_image_stats() {
        let img = ImageBuffer::from_fn(4, 5, 3, |c, y, x| ((c * 7 + y * 3 + x) % 11) as f32 / 10.0).unwrap();
        let s = masked_stats(&img, &BinaryMask::filled(4, 5, true).unwrap(), DEFAULT_EPSILON).unwrap();
        for c in 0..3 {
            let p: Vec<f64> = img.plane(c).iter().map(|&v| v as f64).collect();
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p.len() as f64;
            assert!((s.mean[c] - mean).abs() < 1e-12);
            assert!((s.std[c] - (var + DEFAULT_EPSILON).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_regions_error() {
        let img = ImageBuffer::filled(2, 2, 1, 0.5).unwrap();
        let none = BinaryMask::filled(2, 2, false).unwrap();
        let all = BinaryMask::filled(2, 2, true).unwrap();
        assert_eq!(masked_stats(&img, &none, 1e-5).unwrap_err().kind(), "EmptyMask");
        let cfg = HarmonyConfig::default();
        assert_eq!(harmonize(&img, &none, &cfg).unwrap_err().kind(), "EmptyMask");
        assert_eq!(harmonize(&img, &all, &cfg).unwrap_err().kind(), "EmptyBackground");
    }

    #[test]
    fn matched_stats_leave_foreground_unchanged() {
        // Left and right halves hold the same multiset of values.
        let img = ImageBuffer::from_fn(2, 4, 1, |_, y, x| [0.2, 0.6][(x % 2 + y) % 2]).unwrap();
        let raw = harmonize_unclamped(&img, &half_mask(2, 4), &HarmonyConfig::default()).unwrap();
        for (a, b) in raw.data.iter().zip(img.data()) {
            assert!((a - *b as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn hand_transfer_oracle() {
        // fg {0.2, 0.4}; bg {0.4, 0.8} has mean 0.6 and std sqrt(0.04 + eps) ~ 0.2.
        let img = ImageBuffer::new(1, 4, 1, vec![0.2, 0.4, 0.4, 0.8]).unwrap();
        let mask = BinaryMask::from_bools(1, 4, vec![true, true, false, false]).unwrap();
        let out = harmonize(&img, &mask, &HarmonyConfig::default()).unwrap();
        let (sf, sb) = ((0.01f64 + 1e-5).sqrt(), (0.04f64 + 1e-5).sqrt());
        let oracle = |v: f64| sb * (v - 0.3) / sf + 0.6;
        assert!((out.data()[0] as f64 - oracle(0.2)).abs() < 1e-6);
        assert!((out.data()[1] as f64 - oracle(0.4)).abs() < 1e-6);
        assert!((out.data()[0] - 0.4).abs() < 1e-3);
        assert!((out.data()[1] - 0.8).abs() < 1e-3);
        assert_eq!(&out.data()[2..], &img.data()[2..]);
    }

    #[test]
    fn literal_variant_swaps_roles() {
        let img = ImageBuffer::new(1, 4, 1, vec![0.2, 0.4, 0.4, 0.8]).unwrap();
        let mask = BinaryMask::from_bools(1, 4, vec![true, true, false, false]).unwrap();
        let cfg = HarmonyConfig {
            literal_eq10: true,
            ..Default::default()
        };
        let raw = harmonize_unclamped(&img, &mask, &cfg).unwrap();
        let (sf, sb) = ((0.01f64 + 1e-5).sqrt(), (0.04f64 + 1e-5).sqrt());
        let oracle = |v: f64| 0.6 * (v - 0.3) / sf + sb;
        assert!((raw.data[0] - oracle(0.2)).abs() < 1e-6);
        assert!((raw.data[1] - oracle(0.4)).abs() < 1e-6);
    }

    #[test]
    fn transfer_is_rank_preserving() {
        let img = ImageBuffer::from_fn(4, 6, 3, |c, y, x| ((c * 5 + y * 7 + x * 3) % 13) as f32 / 12.0).unwrap();
        let mask = half_mask(4, 6);
        let raw = harmonize_unclamped(&img, &mask, &HarmonyConfig::default()).unwrap();
        let raw_img = RawImage::from_image(&img);
        for c in 0..3 {
            let (src, dst) = (raw_img.plane(c), raw.plane(c));
            let idx: Vec<usize> = (0..24).filter(|&i| mask.values()[i]).collect();
            for &p in &idx {
                for &q in &idx {
                    if src[p] < src[q] {
                        assert!(dst[p] <= dst[q]);
                    }
                }
            }
        }
    }
}
