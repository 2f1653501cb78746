//! Coarse-to-fine matte fusion.
//!
//! The high-resolution prediction is trusted where it is fractional (the edge
//! band `g`); everywhere else the upsampled low-resolution prediction is used.

use serde::{Deserialize, Serialize};

use crate::error::{MatteError, Result};
use crate::types::{ensure_same_dims, AlphaMatte, BinaryMask, Resize};

/// Open interval `(lo, hi)` that counts as "fractional".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantBand {
    pub lo: f64,
    pub hi: f64,
}

impl QuantBand {
    /// The strict `(0, 1)` band.
    pub const STRICT: QuantBand = QuantBand { lo: 0.0, hi: 1.0 };
    /// Band for 8-bit predictions: one quantization level in from each end.
    pub const EIGHT_BIT: QuantBand = QuantBand {
        lo: 1.0 / 255.0,
        hi: 254.0 / 255.0,
    };

    /// Compared at `f32` precision, so decoded `k / 255` samples land exactly
    /// on the band edges.
    pub fn contains(&self, v: f32) -> bool {
        (self.lo as f32) < v && v < (self.hi as f32)
    }
}

impl Default for QuantBand {
    fn default() -> Self {
        QuantBand::STRICT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub quant_lo: f64,
    pub quant_hi: f64,
    /// Resample the low-resolution matte when sizes differ; otherwise a size
    /// difference is an error.
    pub resize: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            quant_lo: 0.0,
            quant_hi: 1.0,
            resize: true,
        }
    }
}

impl FusionConfig {
    pub fn band(&self) -> QuantBand {
        QuantBand {
            lo: self.quant_lo,
            hi: self.quant_hi,
        }
    }
}

/// Edge mask: 1 where `lo < alpha_h < hi`.
pub fn f_quant_with(alpha_h: &AlphaMatte, band: QuantBand) -> BinaryMask {
    BinaryMask::from_bools(
        alpha_h.height(),
        alpha_h.width(),
        alpha_h.values().iter().map(|&v| band.contains(v)).collect(),
    )
    .expect("matte dimensions are valid")
}

/// Edge mask: 1 where `0 < alpha_h < 1` strictly.
pub fn f_quant(alpha_h: &AlphaMatte) -> BinaryMask {
    f_quant_with(alpha_h, QuantBand::STRICT)
}

/// Bilinear upsampling of `alpha_l` to `alpha_h`'s size.
pub fn upsample_to(alpha_l: &AlphaMatte, alpha_h: &AlphaMatte, cfg: &FusionConfig) -> Result<AlphaMatte> {
    if alpha_l.dims() == alpha_h.dims() {
        return Ok(alpha_l.clone());
    }
    if !cfg.resize {
        return Err(MatteError::shape("fuse low-res vs high-res", alpha_h.dims(), alpha_l.dims()));
    }
    alpha_l.resize_bilinear(alpha_h.height(), alpha_h.width())
}

/// Fuses and also returns the edge mask that selected the high-res pixels.
pub fn fuse_with_mask(alpha_h: &AlphaMatte, alpha_l: &AlphaMatte, cfg: &FusionConfig) -> Result<(AlphaMatte, BinaryMask)> {
    let g = f_quant_with(alpha_h, cfg.band());
    let up = upsample_to(alpha_l, alpha_h, cfg)?;
    let values = g
        .values()
        .iter()
        .zip(alpha_h.values().iter().zip(up.values()))
        .map(|(&edge, (&h, &l))| if edge { h } else { l })
        .collect();
    let fused = AlphaMatte::new(alpha_h.height(), alpha_h.width(), values)?;
    Ok((fused, g))
}

pub fn fuse(alpha_h: &AlphaMatte, alpha_l: &AlphaMatte, cfg: &FusionConfig) -> Result<AlphaMatte> {
    fuse_with_mask(alpha_h, alpha_l, cfg).map(|(fused, _)| fused)
}

/// `alpha * g`: zero outside the unknown band.
pub fn unknown_restrict(alpha: &AlphaMatte, g: &BinaryMask) -> Result<AlphaMatte> {
    ensure_same_dims("unknown_restrict matte vs mask", alpha.dims(), g.dims())?;
    let values = alpha
        .values()
        .iter()
        .zip(g.values())
        .map(|(&a, &m)| if m { a } else { 0.0 })
        .collect();
    AlphaMatte::new(alpha.height(), alpha.width(), values)
}
