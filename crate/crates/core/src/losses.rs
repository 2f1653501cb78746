//! Training losses, evaluated as plain functions (no gradients).
//!
//! Reductions run sequentially in raster order so results are bit-stable.
//! The refine-stage losses only look at the unknown band `g`: the masked
//! mattes are `pred * g` and `gt * g`, and L1 / composition terms are averaged
//! over the number of unknown pixels.

use serde::{Deserialize, Serialize};

use crate::error::{MatteError, Result, Scored, Warning};
use crate::fusion::unknown_restrict;
use crate::pyramid::{laplacian_pyramid, Plane, DEFAULT_LEVELS};
use crate::types::{ensure_same_dims, AlphaMatte, BinaryMask, ImageBuffer};

pub const BCE_CLAMP: f64 = 1e-7;
/// Weights of the three auxiliary coarse-stage losses.
pub const AUX_WEIGHTS: [f64; 3] = [0.8, 0.6, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub bce_clamp: f64,
    pub pyramid_levels: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            bce_clamp: BCE_CLAMP,
            pyramid_levels: DEFAULT_LEVELS,
        }
    }
}

/// Binary cross-entropy averaged over all pixels, with predictions clamped to
/// `[clamp, 1 - clamp]`.
pub fn bce_with(pred: &AlphaMatte, target: &BinaryMask, clamp: f64) -> Result<f64> {
    ensure_same_dims("bce prediction vs target", target.dims(), pred.dims())?;
    let mut sum = 0.0;
    for (&p_hat, &p) in pred.values().iter().zip(target.values()) {
        let q = (p_hat as f64).clamp(clamp, 1.0 - clamp);
        sum += if p { q.ln() } else { (1.0 - q).ln() };
    }
    Ok(-sum / pred.dims().len() as f64)
}

pub fn bce(pred: &AlphaMatte, target: &BinaryMask) -> Result<f64> {
    bce_with(pred, target, BCE_CLAMP)
}

/// `dom + 0.8 aux[0] + 0.6 aux[1] + 0.4 aux[2]`.
pub fn coarse_loss(dom: f64, aux: [f64; 3]) -> f64 {
    dom + AUX_WEIGHTS[0] * aux[0] + AUX_WEIGHTS[1] * aux[1] + AUX_WEIGHTS[2] * aux[2]
}

/// Mean absolute error over the unknown band.
pub fn l1_loss(pred: &AlphaMatte, gt: &AlphaMatte, g: &BinaryMask) -> Result<Scored> {
    ensure_same_dims("l1_loss prediction vs ground truth", gt.dims(), pred.dims())?;
    ensure_same_dims("l1_loss mask", gt.dims(), g.dims())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&p, &t), &m) in pred.values().iter().zip(gt.values()).zip(g.values()) {
        if m {
            sum += (p as f64 - t as f64).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Scored::warn(0.0, Warning::EmptyUnknown));
    }
    Ok(Scored::ok(sum / count as f64))
}

/// Mean absolute difference, over unknown pixels and channels, between the
/// images composited with `pred` and with `gt`.
pub fn composition_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    fg: &ImageBuffer,
    bg: &ImageBuffer,
    g: &BinaryMask,
) -> Result<Scored> {
    ensure_same_dims("composition_loss prediction vs ground truth", gt.dims(), pred.dims())?;
    ensure_same_dims("composition_loss mask", gt.dims(), g.dims())?;
    ensure_same_dims("composition_loss foreground", gt.dims(), fg.dims())?;
    ensure_same_dims("composition_loss background", gt.dims(), bg.dims())?;
    if fg.channels() != bg.channels() {
        return Err(MatteError::ChannelMismatch {
            context: "composition_loss background",
            expected: fg.channels(),
            found: bg.channels(),
        });
    }
    let n = gt.dims().len();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in (0..n).filter(|&i| g.values()[i]) {
        let (a_hat, a) = (pred.values()[i] as f64, gt.values()[i] as f64);
        for c in 0..fg.channels() {
            let (f, b) = (fg.data()[c * n + i] as f64, bg.data()[c * n + i] as f64);
            let c_hat = a_hat * f + (1.0 - a_hat) * b;
            let c_gt = a * f + (1.0 - a) * b;
            sum += (c_hat - c_gt).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Scored::warn(0.0, Warning::EmptyUnknown));
    }
    Ok(Scored::ok(sum / count as f64))
}

fn plane_of(m: &AlphaMatte) -> Plane {
    Plane::new(m.height(), m.width(), m.values().iter().map(|&v| v as f64).collect())
}

/// `sum_k 2^k * mean|Lap_k(pred * g) - Lap_k(gt * g)|`.
pub fn laplacian_loss_with(pred: &AlphaMatte, gt: &AlphaMatte, g: &BinaryMask, levels: usize) -> Result<f64> {
    ensure_same_dims("laplacian_loss prediction vs ground truth", gt.dims(), pred.dims())?;
    let p = laplacian_pyramid(&plane_of(&unknown_restrict(pred, g)?), levels)?;
    let t = laplacian_pyramid(&plane_of(&unknown_restrict(gt, g)?), levels)?;
    let mut total = 0.0;
    for (k, (a, b)) in p.iter().zip(&t).enumerate() {
        let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
        total += (1u64 << k) as f64 * sum / a.data.len() as f64;
    }
    Ok(total)
}

pub fn laplacian_loss(pred: &AlphaMatte, gt: &AlphaMatte, g: &BinaryMask) -> Result<f64> {
    laplacian_loss_with(pred, gt, g, DEFAULT_LEVELS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineLoss {
    pub l1: f64,
    pub composition: f64,
    pub laplacian: f64,
    pub total: f64,
    pub warning: Option<Warning>,
}

/// Refine-stage loss: L1 + composition + Laplacian, all on the unknown band.
pub fn refine_loss_with(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    fg: &ImageBuffer,
    bg: &ImageBuffer,
    g: &BinaryMask,
    cfg: &LossConfig,
) -> Result<RefineLoss> {
    let pred_u = unknown_restrict(pred, g)?;
    let gt_u = unknown_restrict(gt, g)?;
    let l1 = l1_loss(&pred_u, &gt_u, g)?;
    let comp = composition_loss(&pred_u, &gt_u, fg, bg, g)?;
    let laplacian = laplacian_loss_with(&pred_u, &gt_u, g, cfg.pyramid_levels)?;
    Ok(RefineLoss {
        l1: l1.value,
        composition: comp.value,
        laplacian,
        total: l1.value + comp.value + laplacian,
        warning: l1.warning.or(comp.warning),
    })
}

pub fn refine_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    fg: &ImageBuffer,
    bg: &ImageBuffer,
    g: &BinaryMask,
) -> Result<RefineLoss> {
    refine_loss_with(pred, gt, fg, bg, g, &LossConfig::default())
}
