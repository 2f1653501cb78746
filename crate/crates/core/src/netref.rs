//! Forward-pass reference implementations of the coarse-stage blocks:
//! head attention, global-context gating and the three-branch interweaved
//! aggregation. Weights are supplied by the caller; nothing here trains.
//!
//! Tensors are `C x H x W`. Channel widths are parameters, so the blocks can
//! run at small test widths as well as at `2048 -> 512 / 256`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{MatteError, Result};
use crate::types::{resample_plane, Tensor};

/// Convolution parameters: `values` is `out x in x kh x kw`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    in_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
    values: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        values: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 {
            return Err(MatteError::InvalidTensor("convolution dimensions must be positive".into()));
        }
        let expected = out_channels * in_channels * kernel_h * kernel_w;
        if values.len() != expected {
            return Err(MatteError::shape("convolution weight count", expected, values.len()));
        }
        if bias.len() != out_channels {
            return Err(MatteError::shape("convolution bias count", out_channels, bias.len()));
        }
        Ok(ConvWeights {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            values,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Result<Self> {
        let n = out_channels * in_channels * kernel_h * kernel_w;
        Self::new(out_channels, in_channels, kernel_h, kernel_w, vec![0.0; n], vec![0.0; out_channels])
    }

    /// 1x1 identity over `channels`, zero bias.
    pub fn identity(channels: usize) -> Self {
        let mut values = vec![0.0; channels * channels];
        for c in 0..channels {
            values[c * channels + c] = 1.0;
        }
        ConvWeights::new(channels, channels, 1, 1, values, vec![0.0; channels]).expect("valid identity")
    }

    /// Builds from a `[out, in, kh, kw]` weight tensor and `[out]` bias.
    pub fn from_tensors(weight: &Tensor, bias: &Tensor) -> Result<Self> {
        match weight.shape() {
            &[o, i, kh, kw] => {
                if bias.shape() != [o] {
                    return Err(MatteError::shape("convolution bias shape", format!("[{o}]"), format!("{:?}", bias.shape())));
                }
                ConvWeights::new(o, i, kh, kw, weight.data().to_vec(), bias.data().to_vec())
            }
            other => Err(MatteError::shape("convolution weight shape", "[out, in, kh, kw]", format!("{other:?}"))),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.kernel_h, self.kernel_w)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.values[((o * self.in_channels + i) * self.kernel_h + ky) * self.kernel_w + kx]
    }

    /// Same weights with every entry (and bias) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> ConvWeights {
        ConvWeights {
            values: self.values.iter().map(|v| v * s).collect(),
            bias: self.bias.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}

/// Cross-correlation with zero padding that keeps `H x W`.
///
/// For even kernels the extra padding goes to the bottom/right.
pub fn conv2d(input: &Tensor, w: &ConvWeights) -> Result<Tensor> {
    let (c, h, wd) = input.chw()?;
    if c != w.in_channels {
        return Err(MatteError::ChannelMismatch {
            context: "conv2d input",
            expected: w.in_channels,
            found: c,
        });
    }
    let (pad_y, pad_x) = (((w.kernel_h - 1) / 2) as isize, ((w.kernel_w - 1) / 2) as isize);
    let x = input.data();
    let mut out = Vec::with_capacity(w.out_channels * h * wd);
    for o in 0..w.out_channels {
        for y in 0..h {
            for xx in 0..wd {
                let mut acc = w.bias[o];
                for i in 0..c {
                    for ky in 0..w.kernel_h {
                        let sy = y as isize + ky as isize - pad_y;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..w.kernel_w {
                            let sx = xx as isize + kx as isize - pad_x;
                            if sx < 0 || sx >= wd as isize {
                                continue;
                            }
                            acc += w.weight(o, i, ky, kx) * x[(i * h + sy as usize) * wd + sx as usize];
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    Tensor::new(vec![w.out_channels, h, wd], out)
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| v.max(0.0))
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Splits a `C x H x W` tensor into two `C/2` halves along channels.
pub fn split_channels(t: &Tensor) -> Result<(Tensor, Tensor)> {
    let (c, h, w) = t.chw()?;
    if c % 2 != 0 {
        return Err(MatteError::OddSplit(c));
    }
    let half = c / 2 * h * w;
    let (a, b) = t.data().split_at(half);
    Ok((
        Tensor::new(vec![c / 2, h, w], a.to_vec())?,
        Tensor::new(vec![c / 2, h, w], b.to_vec())?,
    ))
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(MatteError::shape("elementwise operands", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect())
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, |x, y| x * y)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, |x, y| x + y)
}

/// Head attention: `W, b = split(conv1(f))`, `f^ = relu(conv2(f))`,
/// `out = relu(W * f^ + b)`. The first half of conv1's channels is `W`.
pub fn head_attention(f_top: &Tensor, w1: &ConvWeights, w2: &ConvWeights) -> Result<Tensor> {
    if w1.out_channels % 2 != 0 {
        return Err(MatteError::OddSplit(w1.out_channels));
    }
    if w1.out_channels != 2 * w2.out_channels {
        return Err(MatteError::ChannelMismatch {
            context: "head_attention conv1 output (twice conv2 output)",
            expected: 2 * w2.out_channels,
            found: w1.out_channels,
        });
    }
    let (weight, bias) = split_channels(&conv2d(f_top, w1)?)?;
    let feat = relu(&conv2d(f_top, w2)?);
    Ok(relu(&add(&mul(&weight, &feat)?, &bias)?))
}

/// Per-channel affine parameters of the context gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

/// Global-context gating: channel `c` is multiplied by
/// `sigmoid(scale_c * mean(f_c) + shift_c)`.
pub fn gcf(f: &Tensor, params: &GateParams) -> Result<Tensor> {
    let (c, h, w) = f.chw()?;
    if params.scale.len() != c || params.shift.len() != c {
        return Err(MatteError::ChannelMismatch {
            context: "gcf gate parameters",
            expected: c,
            found: params.scale.len().min(params.shift.len()),
        });
    }
    let n = h * w;
    let mut out = f.clone();
    for (ch, plane) in out.data_mut().chunks_mut(n).enumerate() {
        let mean = plane.iter().sum::<f64>() / n as f64;
        let gate = sigmoid(params.scale[ch] * mean + params.shift[ch]);
        plane.iter_mut().for_each(|v| *v *= gate);
    }
    Ok(out)
}

/// Bilinear (half-pixel) resize of every channel plane.
pub fn resize_tensor(t: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = t.chw()?;
    if (h, w) == (out_h, out_w) {
        return Ok(t.clone());
    }
    if out_h == 0 || out_w == 0 {
        return Err(MatteError::ZeroDimension {
            height: out_h,
            width: out_w,
        });
    }
    let mut data = Vec::with_capacity(c * out_h * out_w);
    for plane in t.data().chunks(h * w) {
        data.extend(resample_plane(plane, h, w, out_h, out_w));
    }
    Tensor::new(vec![c, out_h, out_w], data)
}

/// Parameters of the interweaved aggregation block.
///
/// `proj_*` are 1x1 projections of each input to a common width; the three
/// branch convolutions map that width to the output width.
#[derive(Debug, Clone, PartialEq)]
pub struct IaParams {
    pub proj_low: ConvWeights,
    pub proj_high: ConvWeights,
    pub proj_global: ConvWeights,
    pub detail: ConvWeights,
    pub semantic: ConvWeights,
    pub context: ConvWeights,
}

/// Per-branch pre-activation outputs of [`ia_fuse`].
#[derive(Debug, Clone, PartialEq)]
pub struct IaBranches {
    pub detail: Tensor,
    pub semantic: Tensor,
    pub context: Tensor,
}

/// The three branches before they are summed and rectified.
pub fn ia_branches(f_l: &Tensor, f_h: &Tensor, f_g: &Tensor, p: &IaParams) -> Result<IaBranches> {
    let (_, h, w) = f_l.chw()?;
    let f_h = resize_tensor(f_h, h, w)?;
    let f_g = resize_tensor(f_g, h, w)?;
    let low = conv2d(f_l, &p.proj_low)?;
    let high = conv2d(&f_h, &p.proj_high)?;
    let global = conv2d(&f_g, &p.proj_global)?;
    Ok(IaBranches {
        detail: conv2d(&mul(&low, &high)?, &p.detail)?,
        semantic: conv2d(&high, &p.semantic)?,
        context: conv2d(&mul(&low, &global)?, &p.context)?,
    })
}

/// `relu(detail(p_l(f_l) * p_h(f_h)) + semantic(p_h(f_h)) + context(p_l(f_l) * p_g(f_g)))`,
/// with `f_h` and `f_g` first resized to `f_l`'s resolution.
pub fn ia_fuse(f_l: &Tensor, f_h: &Tensor, f_g: &Tensor, p: &IaParams) -> Result<Tensor> {
    let b = ia_branches(f_l, f_h, f_g, p)?;
    Ok(relu(&add(&add(&b.detail, &b.semantic)?, &b.context)?))
}

/// Named arrays loaded from a weight file.
///
/// Text format, one array per block:
///
/// ```text
/// # comment
/// @head.conv1.weight 8 8 3 3
/// 0.1 -0.2 ...            (row-major values, any line breaks)
/// @head.conv1.bias 8
/// 0 0 0 0 0 0 0 0
/// ```
///
/// The header is `@name` followed by the shape. Value count must equal the
/// product of the shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    arrays: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.arrays.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.arrays.get(name).ok_or_else(|| MatteError::MissingWeight(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.keys().map(String::as_str)
    }

    /// `<prefix>.weight` and `<prefix>.bias` as a convolution.
    pub fn conv(&self, prefix: &str) -> Result<ConvWeights> {
        ConvWeights::from_tensors(self.get(&format!("{prefix}.weight"))?, self.get(&format!("{prefix}.bias"))?)
    }

    pub fn insert_conv(&mut self, prefix: &str, w: &ConvWeights) {
        let (kh, kw) = w.kernel();
        let weight = Tensor::new(vec![w.out_channels(), w.in_channels(), kh, kw], w.values().to_vec()).expect("consistent");
        let bias = Tensor::new(vec![w.out_channels()], w.bias().to_vec()).expect("consistent");
        self.insert(format!("{prefix}.weight"), weight);
        self.insert(format!("{prefix}.bias"), bias);
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut store = WeightStore::new();
        let mut current: Option<(String, Vec<usize>, Vec<f64>, usize)> = None;
        let finish = |store: &mut WeightStore, cur: Option<(String, Vec<usize>, Vec<f64>, usize)>| -> Result<()> {
            if let Some((name, shape, data, line)) = cur {
                let t = Tensor::new(shape, data).map_err(|e| MatteError::WeightFile {
                    line,
                    message: format!("`{name}`: {e}"),
                })?;
                if store.arrays.insert(name.clone(), t).is_some() {
                    return Err(MatteError::WeightFile {
                        line,
                        message: format!("duplicate array `{name}`"),
                    });
                }
            }
            Ok(())
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('@') {
                finish(&mut store, current.take())?;
                let mut parts = header.split_whitespace();
                let name = parts.next().ok_or_else(|| MatteError::WeightFile {
                    line: i + 1,
                    message: "missing array name".into(),
                })?;
                let shape = parts
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| MatteError::WeightFile {
                        line: i + 1,
                        message: format!("bad shape: {e}"),
                    })?;
                current = Some((name.to_string(), shape, Vec::new(), i + 1));
                continue;
            }
            let Some((_, _, data, _)) = current.as_mut() else {
                return Err(MatteError::WeightFile {
                    line: i + 1,
                    message: "values before any `@name` header".into(),
                });
            };
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| MatteError::WeightFile {
                    line: i + 1,
                    message: format!("bad value `{tok}`: {e}"),
                })?);
            }
        }
        finish(&mut store, current.take())?;
        Ok(store)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, t) in &self.arrays {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "@{name} {}", dims.join(" "));
            let last = *t.shape().last().expect("rank >= 1");
            for row in t.data().chunks(last.max(1)) {
                let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| MatteError::io(path, e))?)
    }

    /// Gate parameters stored as `<prefix>.scale` and `<prefix>.shift`.
    pub fn gate(&self, prefix: &str) -> Result<GateParams> {
        Ok(GateParams {
            scale: self.get(&format!("{prefix}.scale"))?.data().to_vec(),
            shift: self.get(&format!("{prefix}.shift"))?.data().to_vec(),
        })
    }

    /// IA parameters stored under `<prefix>.{proj_low,proj_high,proj_global,detail,semantic,context}`.
    pub fn ia(&self, prefix: &str) -> Result<IaParams> {
        Ok(IaParams {
            proj_low: self.conv(&format!("{prefix}.proj_low"))?,
            proj_high: self.conv(&format!("{prefix}.proj_high"))?,
            proj_global: self.conv(&format!("{prefix}.proj_global"))?,
            detail: self.conv(&format!("{prefix}.detail"))?,
            semantic: self.conv(&format!("{prefix}.semantic"))?,
            context: self.conv(&format!("{prefix}.context"))?,
        })
    }
}
