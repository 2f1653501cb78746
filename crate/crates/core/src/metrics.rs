//! The four matting error metrics and corpus-level evaluation.
//!
//! Scaling follows the usual reporting convention: SAD is divided by 1000,
//! MSE multiplied by 1000, Grad multiplied by 0.1 and Conn divided by 1000.
//! All four scales are configurable through [`MetricsConfig`].

use std::collections::VecDeque;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositor::{make_trimap, trimap_unknown, DEFAULT_TRIMAP_RADIUS};
use crate::error::{MatteError, Result, Scored, Warning};
use crate::io::read_matte;
use crate::manifest::CorpusManifest;
use crate::types::{ensure_same_dims, AlphaMatte, BinaryMask, Resize};

pub const GRAD_SIGMA: f64 = 1.4;
/// Kernel support in multiples of sigma.
pub const GRAD_TRUNCATE: f64 = 4.0;
pub const CONN_STEP: f64 = 0.1;
pub const CONN_MIN_DISTANCE: f64 = 0.15;

/// Pixels a metric is summed over.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Whole,
    Mask(&'a BinaryMask),
}

impl Region<'_> {
    fn contains(&self, i: usize) -> bool {
        match self {
            Region::Whole => true,
            Region::Mask(m) => m.values()[i],
        }
    }

    fn check(&self, context: &'static str, dims: crate::types::Dims) -> Result<()> {
        match self {
            Region::Whole => Ok(()),
            Region::Mask(m) => ensure_same_dims(context, dims, m.dims()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    #[default]
    Whole,
    /// The unknown band of a trimap built from the ground truth.
    Unknown,
}

impl std::str::FromStr for RegionMode {
    type Err = MatteError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(RegionMode::Whole),
            "unknown" => Ok(RegionMode::Unknown),
            other => Err(MatteError::Config(format!("unknown region mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub region: RegionMode,
    /// Band radius used when `region = "unknown"`.
    pub trimap_radius: usize,
    pub sad_scale: f64,
    pub mse_scale: f64,
    pub grad_scale: f64,
    pub conn_scale: f64,
    pub grad_sigma: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            region: RegionMode::Whole,
            trimap_radius: DEFAULT_TRIMAP_RADIUS,
            sad_scale: 1e-3,
            mse_scale: 1e3,
            grad_scale: 1e-1,
            conn_scale: 1e-3,
            grad_sigma: GRAD_SIGMA,
        }
    }
}

fn check_pair(context: &'static str, pred: &AlphaMatte, gt: &AlphaMatte, region: &Region) -> Result<()> {
    ensure_same_dims(context, gt.dims(), pred.dims())?;
    region.check(context, gt.dims())
}

fn abs_sum(pred: &AlphaMatte, gt: &AlphaMatte, region: &Region) -> f64 {
    let mut sum = 0.0;
    for (i, (&p, &t)) in pred.values().iter().zip(gt.values()).enumerate() {
        if region.contains(i) {
            sum += (p as f64 - t as f64).abs();
        }
    }
    sum
}

/// Sum of absolute differences, divided by 1000.
pub fn sad(pred: &AlphaMatte, gt: &AlphaMatte, region: Region) -> Result<f64> {
    check_pair("sad", pred, gt, &region)?;
    Ok(abs_sum(pred, gt, &region) * MetricsConfig::default().sad_scale)
}

fn squared_mean(pred: &AlphaMatte, gt: &AlphaMatte, region: &Region) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (&p, &t)) in pred.values().iter().zip(gt.values()).enumerate() {
        if region.contains(i) {
            let d = p as f64 - t as f64;
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean squared error over the region, multiplied by 1000.
pub fn mse(pred: &AlphaMatte, gt: &AlphaMatte, region: Region) -> Result<f64> {
    check_pair("mse", pred, gt, &region)?;
    Ok(squared_mean(pred, gt, &region) * MetricsConfig::default().mse_scale)
}

/// Half-sample symmetric folding: `d c b a | a b c d | d c b a`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let i = i.rem_euclid(period);
    if i >= n as isize {
        (period - 1 - i) as usize
    } else {
        i as usize
    }
}

/// Gaussian and first-derivative-of-Gaussian taps over `[-r, r]`, each scaled
/// to unit L2 norm so their outer product has unit norm.
pub fn gaussian_derivative_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let radius = (GRAD_TRUNCATE * sigma).ceil() as isize;
    let gauss = |u: f64| (-u * u / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let smooth: Vec<f64> = (-radius..=radius).map(|u| gauss(u as f64)).collect();
    let deriv: Vec<f64> = (-radius..=radius).map(|u| u as f64 * gauss(u as f64) / (sigma * sigma)).collect();
    let unit = |v: Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<_>>()
    };
    (unit(smooth), unit(deriv))
}

fn correlate_axis(src: &[f64], h: usize, w: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                let off = t as isize - r;
                let v = if horizontal {
                    src[y * w + reflect(x as isize + off, w)]
                } else {
                    src[reflect(y as isize + off, h) * w + x]
                };
                acc += k * v;
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Per-pixel gradient magnitude from Gaussian derivative filters.
pub fn gradient_magnitude(m: &AlphaMatte, sigma: f64) -> Result<Vec<f64>> {
    let (smooth, deriv) = gaussian_derivative_kernels(sigma);
    let (h, w) = (m.height(), m.width());
    if h.min(w) < smooth.len() {
        return Err(MatteError::ImageTooSmall {
            height: h,
            width: w,
            min: smooth.len(),
        });
    }
    let src: Vec<f64> = m.values().iter().map(|&v| v as f64).collect();
    let gx = correlate_axis(&correlate_axis(&src, h, w, &deriv, true), h, w, &smooth, false);
    let gy = correlate_axis(&correlate_axis(&src, h, w, &smooth, true), h, w, &deriv, false);
    Ok(gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect())
}

fn grad_sum(pred: &AlphaMatte, gt: &AlphaMatte, region: &Region, sigma: f64) -> Result<f64> {
    let gp = gradient_magnitude(pred, sigma)?;
    let gg = gradient_magnitude(gt, sigma)?;
    let mut sum = 0.0;
    for (i, (a, b)) in gp.iter().zip(&gg).enumerate() {
        if region.contains(i) {
            sum += (a - b) * (a - b);
        }
    }
    Ok(sum)
}

/// Squared difference of gradient magnitudes, summed and multiplied by 0.1.
pub fn grad_error(pred: &AlphaMatte, gt: &AlphaMatte, region: Region) -> Result<f64> {
    check_pair("grad_error", pred, gt, &region)?;
    let cfg = MetricsConfig::default();
    Ok(grad_sum(pred, gt, &region, cfg.grad_sigma)? * cfg.grad_scale)
}

const NEIGHBOURS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

fn neighbours(i: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (y, x) = ((i / w) as isize, (i % w) as isize);
    NEIGHBOURS.iter().filter_map(move |&(dy, dx)| {
        let (ny, nx) = (y + dy, x + dx);
        (ny >= 0 && nx >= 0 && ny < h as isize && nx < w as isize).then(|| ny as usize * w + nx as usize)
    })
}

/// Largest 4-connected component of `inside`; ties go to the component whose
/// first pixel comes first in raster order.
fn largest_component(inside: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut seen = vec![false; h * w];
    let mut best: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if !inside[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbours(i, h, w) {
                if inside[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut out = vec![false; h * w];
    for i in best {
        out[i] = true;
    }
    out
}

/// Connectivity-based opacity `phi` for one matte given the anchor region.
fn connectivity_phi(m: &AlphaMatte, omega: &[bool], step: f64, min_distance: f64) -> Vec<f64> {
    let (h, w) = (m.height(), m.width());
    let values: Vec<f64> = m.values().iter().map(|&v| v as f64).collect();
    let mut level = vec![0.0f64; h * w];
    let levels = (1.0 / step).round() as usize;
    let mut reached = vec![false; h * w];
    let mut queue = VecDeque::new();
    for k in 1..=levels {
        let theta = k as f64 / levels as f64;
        reached.iter_mut().for_each(|r| *r = false);
        for (i, &o) in omega.iter().enumerate() {
            if o && values[i] >= theta {
                reached[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            level[i] = theta;
            for j in neighbours(i, h, w) {
                if !reached[j] && values[j] >= theta {
                    reached[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    values
        .iter()
        .zip(&level)
        .map(|(v, l)| {
            let d = v - l;
            if d >= min_distance {
                1.0 - d
            } else {
                1.0
            }
        })
        .collect()
}

fn conn_sum(pred: &AlphaMatte, gt: &AlphaMatte, region: &Region) -> Scored {
    let (h, w) = (gt.height(), gt.width());
    let both_opaque: Vec<bool> = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &t)| p >= 1.0 && t >= 1.0)
        .collect();
    let omega = largest_component(&both_opaque, h, w);
    if !omega.iter().any(|&o| o) {
        return Scored::warn(0.0, Warning::NoFullyOpaqueRegion);
    }
    let pp = connectivity_phi(pred, &omega, CONN_STEP, CONN_MIN_DISTANCE);
    let pg = connectivity_phi(gt, &omega, CONN_STEP, CONN_MIN_DISTANCE);
    let mut sum = 0.0;
    for (i, (a, b)) in pp.iter().zip(&pg).enumerate() {
        if region.contains(i) {
            sum += (a - b).abs();
        }
    }
    Scored::ok(sum)
}

/// Connectivity error, divided by 1000.
///
/// The anchor `Omega` is the largest 4-connected region that is fully opaque
/// in both mattes. For threshold `theta` in `{0.1, ..., 1.0}` a pixel is
/// connected when it reaches `Omega` through pixels `>= theta`; `l` is the
/// highest such `theta` (0 if none), `d = value - l` and
/// `phi = 1 - d * [d >= 0.15]`.
pub fn conn_error(pred: &AlphaMatte, gt: &AlphaMatte, region: Region) -> Result<Scored> {
    check_pair("conn_error", pred, gt, &region)?;
    let s = conn_sum(pred, gt, &region);
    Ok(Scored {
        value: s.value * MetricsConfig::default().conn_scale,
        ..s
    })
}

/// Metrics of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub sad: f64,
    pub mse: f64,
    pub grad: f64,
    pub conn: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

/// All four metrics with the configured scales.
pub fn evaluate_pair(id: &str, pred: &AlphaMatte, gt: &AlphaMatte, region: Region, cfg: &MetricsConfig) -> Result<ImageMetrics> {
    check_pair("evaluate", pred, gt, &region)?;
    let conn = conn_sum(pred, gt, &region);
    Ok(ImageMetrics {
        id: id.to_string(),
        sad: abs_sum(pred, gt, &region) * cfg.sad_scale,
        mse: squared_mean(pred, gt, &region) * cfg.mse_scale,
        grad: grad_sum(pred, gt, &region, cfg.grad_sigma)? * cfg.grad_scale,
        conn: conn.value * cfg.conn_scale,
        warnings: conn.warning.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_sad: f64,
    pub mean_mse: f64,
    pub mean_grad: f64,
    pub mean_conn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<ImageMetrics>,
    pub aggregate: Aggregate,
    pub count: usize,
    #[serde(default)]
    pub failures: Vec<Failure>,
}

impl MetricsReport {
    /// Builds a report; means are a sequential fold in input order.
    pub fn from_results(per_image: Vec<ImageMetrics>, failures: Vec<Failure>) -> Self {
        let count = per_image.len();
        let mut agg = Aggregate::default();
        if count > 0 {
            let n = count as f64;
            let mut sums = [0.0f64; 4];
            for m in &per_image {
                sums[0] += m.sad;
                sums[1] += m.mse;
                sums[2] += m.grad;
                sums[3] += m.conn;
            }
            agg = Aggregate {
                mean_sad: sums[0] / n,
                mean_mse: sums[1] / n,
                mean_grad: sums[2] / n,
                mean_conn: sums[3] / n,
            };
        }
        MetricsReport {
            per_image,
            aggregate: agg,
            count,
            failures,
        }
    }
}

/// Options for corpus evaluation beyond the metric conventions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Resize prediction and ground truth to `n x n` before scoring.
    pub resize: Option<usize>,
}

fn evaluate_record(
    manifest: &CorpusManifest,
    idx: usize,
    pred_dir: &Path,
    cfg: &MetricsConfig,
    opts: &EvalOptions,
) -> Result<ImageMetrics> {
    let record = &manifest.records[idx];
    let id = record.id();
    let pred_path = pred_dir.join(format!("{id}.png"));
    if !pred_path.is_file() {
        return Err(MatteError::MissingPrediction { id, path: pred_path });
    }
    let (mut pred, _) = read_matte(&pred_path)?;
    let (mut gt, _) = read_matte(manifest.resolve(&record.alpha))?;
    if let Some(n) = opts.resize {
        pred = pred.resize_bilinear(n, n)?;
        gt = gt.resize_bilinear(n, n)?;
    }
    match cfg.region {
        RegionMode::Whole => evaluate_pair(&id, &pred, &gt, Region::Whole, cfg),
        RegionMode::Unknown => {
            let band = trimap_unknown(&make_trimap(&gt, cfg.trimap_radius));
            evaluate_pair(&id, &pred, &gt, Region::Mask(&band), cfg)
        }
    }
}

/// Scores every manifest record against `<pred_dir>/<id>.png`.
///
/// Records are evaluated in parallel on the current rayon pool; per-image
/// failures are collected rather than aborting, and output order is manifest
/// order.
pub fn evaluate_corpus(
    manifest: &CorpusManifest,
    pred_dir: &Path,
    cfg: &MetricsConfig,
    opts: &EvalOptions,
) -> MetricsReport {
    let results: Vec<Result<ImageMetrics>> = (0..manifest.len())
        .into_par_iter()
        .map(|i| evaluate_record(manifest, i, pred_dir, cfg, opts))
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (record, r) in manifest.records.iter().zip(results) {
        match r {
            Ok(m) => ok.push(m),
            Err(e) => failures.push(Failure {
                id: record.id(),
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    MetricsReport::from_results(ok, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matte(h: usize, w: usize, v: &[f32]) -> AlphaMatte {
        AlphaMatte::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn sad_hand_sum() {
        let p = matte(1, 2, &[0.5, 0.25]);
        let g = matte(1, 2, &[0.0, 0.0]);
        assert!((sad(&p, &g, Region::Whole).unwrap() - 0.00075).abs() < 1e-15);
        assert_eq!(sad(&p, &p, Region::Whole).unwrap(), 0.0);
    }

    #[test]
    fn mse_constant_offset() {
        let p = AlphaMatte::filled(4, 4, 0.6).unwrap();
        let g = AlphaMatte::filled(4, 4, 0.5).unwrap();
        let v = mse(&p, &g, Region::Whole).unwrap();
        assert!((v - 10.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn region_mask_restricts_sum() {
        let p = matte(1, 3, &[1.0, 1.0, 1.0]);
        let g = matte(1, 3, &[0.0, 0.0, 0.0]);
        let m = BinaryMask::from_bools(1, 3, vec![true, false, false]).unwrap();
        assert!((sad(&p, &g, Region::Mask(&m)).unwrap() - 1e-3).abs() < 1e-15);
        let all = BinaryMask::filled(1, 3, true).unwrap();
        assert_eq!(
            sad(&p, &g, Region::Mask(&all)).unwrap(),
            sad(&p, &g, Region::Whole).unwrap()
        );
        let wrong = BinaryMask::filled(3, 1, true).unwrap();
        assert_eq!(sad(&p, &g, Region::Mask(&wrong)).unwrap_err().kind(), "ShapeMismatch");
    }

    #[test]
    fn kernels_have_unit_norm_and_expected_width() {
        let (s, d) = gaussian_derivative_kernels(1.4);
        assert_eq!(s.len(), 13);
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        assert!((n(&s) - 1.0).abs() < 1e-12 && (n(&d) - 1.0).abs() < 1e-12);
        assert!(d[12] > 0.0 && d[6] == 0.0);
    }

    #[test]
    fn grad_constant_and_small() {
        let a = AlphaMatte::filled(16, 16, 0.3).unwrap();
        let b = AlphaMatte::filled(16, 16, 0.9).unwrap();
        assert!(grad_error(&a, &b, Region::Whole).unwrap().abs() < 1e-20);
        let tiny = AlphaMatte::filled(12, 20, 0.3).unwrap();
        assert_eq!(grad_error(&tiny, &tiny, Region::Whole).unwrap_err().kind(), "ImageTooSmall");
    }

    #[test]
    fn conn_solid_square_is_zero() {
        let sq = AlphaMatte::from_fn(10, 10, |y, x| if (2..7).contains(&y) && (3..8).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let s = conn_error(&sq, &sq.clone(), Region::Whole).unwrap();
        assert_eq!(s, Scored::ok(0.0));
    }

    #[test]
    fn conn_without_opaque_region_warns() {
        let a = AlphaMatte::filled(5, 5, 0.5).unwrap();
        let b = AlphaMatte::filled(5, 5, 0.2).unwrap();
        assert_eq!(
            conn_error(&a, &b, Region::Whole).unwrap(),
            Scored::warn(0.0, Warning::NoFullyOpaqueRegion)
        );
    }

    #[test]
    fn conn_detached_blob_hand_case() {
        // Opaque 2x2 anchor at the left, a detached 0.6 pixel at the right in
        // pred only. That pixel never connects, so l = 0, d = 0.6, phi = 0.4;
        // in gt it is 0 with phi = 1.
        let gt = AlphaMatte::from_fn(4, 6, |y, x| if y < 2 && x < 2 { 1.0 } else { 0.0 }).unwrap();
        let pred = AlphaMatte::from_fn(4, 6, |y, x| {
            if y < 2 && x < 2 {
                1.0
            } else if (y, x) == (3, 5) {
                0.6
            } else {
                0.0
            }
        })
        .unwrap();
        let v = conn_error(&pred, &gt, Region::Whole).unwrap();
        assert!((v.value - 0.6e-3).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn report_means() {
        let mk = |id: &str, v: f64| ImageMetrics {
            id: id.into(),
            sad: v,
            mse: 2.0 * v,
            grad: 3.0 * v,
            conn: 4.0 * v,
            warnings: vec![],
        };
        let r = MetricsReport::from_results(vec![mk("a", 1.0), mk("b", 2.0), mk("c", 6.0)], vec![]);
        assert_eq!(r.count, 3);
        assert_eq!(r.aggregate.mean_sad, 3.0);
        assert_eq!(r.aggregate.mean_conn, 12.0);
        let empty = MetricsReport::from_results(vec![], vec![]);
        assert_eq!(empty.aggregate, Aggregate::default());
    }
}
