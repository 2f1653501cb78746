//! Raster and tensor containers shared by every module.
//!
//! All rasters are stored **planar** (channel-major): channel `c`, row `y`,
//! column `x` lives at `c * height * width + y * width + x`. Pixel values are
//! `f32` in `[0, 1]`; arithmetic on them is carried out in `f64`.

use std::fmt;

use crate::error::{MatteError, Result};

/// Height and width of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize) -> Self {
        Dims { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(MatteError::ZeroDimension { height, width });
    }
    Ok(())
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(MatteError::shape(context, expected, found));
    }
    Ok(())
}

fn check_unit_range(values: &[f32]) -> Result<()> {
    // `contains` is false for NaN, so NaN is reported as out of range.
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(MatteError::OutOfRangeValue {
            index,
            value: values[index] as f64,
        }),
        None => Ok(()),
    }
}

/// Checks raw image data against the [`ImageBuffer`] invariants.
pub fn validate_image(height: usize, width: usize, channels: usize, data: &[f32]) -> Result<()> {
    check_dims(height, width)?;
    if channels != 1 && channels != 3 {
        return Err(MatteError::UnsupportedChannels(channels));
    }
    check_len("image data length", height * width * channels, data.len())?;
    check_unit_range(data)
}

/// Checks raw matte data against the [`AlphaMatte`] invariants.
pub fn validate_matte(height: usize, width: usize, values: &[f32]) -> Result<()> {
    check_dims(height, width)?;
    check_len("matte data length", height * width, values.len())?;
    check_unit_range(values)
}

/// Checks raw mask data against the [`BinaryMask`] invariants.
pub fn validate_mask(height: usize, width: usize, values: &[f32]) -> Result<()> {
    check_dims(height, width)?;
    check_len("mask data length", height * width, values.len())?;
    match values.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(MatteError::NonBinaryValue {
            index,
            value: values[index] as f64,
        }),
        None => Ok(()),
    }
}

/// A 1- or 3-channel planar raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        validate_image(height, width, channels, &data)?;
        Ok(ImageBuffer {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from `f(channel, y, x)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Clamps arbitrary planar values into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(height: usize, width: usize, channels: usize, data: &[f64]) -> Result<Self> {
        let data = data
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) as f32 })
            .collect();
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    /// Replicates a single-channel image to three channels; 3-channel input is cloned.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }
}

/// A single-channel opacity field with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl AlphaMatte {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        validate_matte(height, width, &values)?;
        Ok(AlphaMatte {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Views the matte as a one-channel image.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.values.clone(),
        }
    }

    /// Takes a one-channel image as a matte; 3-channel input uses its first channel.
    pub fn from_image(img: &ImageBuffer) -> AlphaMatte {
        AlphaMatte {
            height: img.height,
            width: img.width,
            values: img.plane(0).to_vec(),
        }
    }
}

impl From<&BinaryMask> for AlphaMatte {
    fn from(mask: &BinaryMask) -> Self {
        AlphaMatte {
            height: mask.height,
            width: mask.width,
            values: mask.values.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// A single-channel {0, 1} field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn from_bools(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        check_dims(height, width)?;
        check_len("mask data length", height * width, values.len())?;
        Ok(BinaryMask {
            height,
            width,
            values,
        })
    }

    /// Builds a mask from float data that must be exactly 0 or 1.
    pub fn from_f32(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        validate_mask(height, width, values)?;
        Ok(BinaryMask {
            height,
            width,
            values: values.iter().map(|&v| v == 1.0).collect(),
        })
    }

    /// Reads a matte as a strict mask: values must be exactly 0 or 1.
    pub fn from_matte(matte: &AlphaMatte) -> Result<Self> {
        Self::from_f32(matte.height, matte.width, &matte.values)
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::from_bools(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self::from_bools(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.height, self.width)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.values[y * self.width + x]
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&b| !b).collect(),
        }
    }
}

/// Dense row-major `f64` tensor, used in `C x H x W` layout by the network blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(MatteError::InvalidTensor("rank must be at least 1".into()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(MatteError::shape("tensor data length", expected, data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            other => Err(MatteError::shape("tensor layout", "rank 3 (C x H x W)", format!("{other:?}"))),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Bilinear resampling of one plane with half-pixel centres.
///
/// Output pixel `o` samples the input at `(o + 0.5) * in / out - 0.5`,
/// clamped to `[0, in - 1]`.
pub(crate) fn resample_plane<T: Copy + Into<f64>>(
    src: &[T],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let rows = axis(in_h, out_h);
    let cols = axis(in_w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            let at = |y: usize, x: usize| -> f64 { src[y * in_w + x].into() };
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
            let bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

fn to_unit_f32(v: f64) -> f32 {
    (v as f32).clamp(0.0, 1.0)
}

/// Bilinear resizing with half-pixel centres.
pub trait Resize: Sized {
    fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Result<Self>;
}

impl Resize for ImageBuffer {
    fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Result<Self> {
        check_dims(out_h, out_w)?;
        if out_h == self.height && out_w == self.width {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(out_h * out_w * self.channels);
        for c in 0..self.channels {
            let plane = resample_plane(self.plane(c), self.height, self.width, out_h, out_w);
            data.extend(plane.into_iter().map(to_unit_f32));
        }
        Ok(ImageBuffer {
            height: out_h,
            width: out_w,
            channels: self.channels,
            data,
        })
    }
}

impl Resize for AlphaMatte {
    fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Result<Self> {
        check_dims(out_h, out_w)?;
        if out_h == self.height && out_w == self.width {
            return Ok(self.clone());
        }
        let values = resample_plane(&self.values, self.height, self.width, out_h, out_w)
            .into_iter()
            .map(to_unit_f32)
            .collect();
        Ok(AlphaMatte {
            height: out_h,
            width: out_w,
            values,
        })
    }
}

pub(crate) fn ensure_same_dims(context: &'static str, a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(MatteError::shape(context, a, b));
    }
    Ok(())
}
