//! PNG input/output and atomic file writes.
//!
//! 8-bit samples map to `[0, 1]` by dividing by 255, 16-bit samples by 65535.
//! Writing quantizes with round-half-up (`floor(v * max + 0.5)`).

use std::fs;
use std::io::Write;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::error::{MatteError, Result};
use crate::types::{AlphaMatte, ImageBuffer};

/// Sample depth of a PNG file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|e| MatteError::io(path, e))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| {
        MatteError::ImageDecode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })
}

/// Converts interleaved samples to planar unit floats.
fn planar<T: Copy + Into<f64>>(samples: &[T], stride: usize, keep: usize, max: f64, n: usize) -> Vec<f32> {
    let mut data = Vec::with_capacity(n * keep);
    for c in 0..keep {
        data.extend((0..n).map(|i| (samples[i * stride + c].into() / max) as f32));
    }
    data
}

fn to_planar(img: &DynamicImage) -> (usize, usize, usize, Vec<f32>, BitDepth) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = w * h;
    match img {
        DynamicImage::ImageLuma8(b) => (h, w, 1, planar(b.as_raw(), 1, 1, 255.0, n), BitDepth::Eight),
        DynamicImage::ImageLumaA8(b) => (h, w, 1, planar(b.as_raw(), 2, 1, 255.0, n), BitDepth::Eight),
        DynamicImage::ImageRgb8(b) => (h, w, 3, planar(b.as_raw(), 3, 3, 255.0, n), BitDepth::Eight),
        DynamicImage::ImageRgba8(b) => (h, w, 3, planar(b.as_raw(), 4, 3, 255.0, n), BitDepth::Eight),
        DynamicImage::ImageLuma16(b) => (h, w, 1, planar(b.as_raw(), 1, 1, 65535.0, n), BitDepth::Sixteen),
        DynamicImage::ImageLumaA16(b) => (h, w, 1, planar(b.as_raw(), 2, 1, 65535.0, n), BitDepth::Sixteen),
        DynamicImage::ImageRgb16(b) => (h, w, 3, planar(b.as_raw(), 3, 3, 65535.0, n), BitDepth::Sixteen),
        DynamicImage::ImageRgba16(b) => (h, w, 3, planar(b.as_raw(), 4, 3, 65535.0, n), BitDepth::Sixteen),
        other => {
            let rgb = other.to_rgb8();
            (h, w, 3, planar(rgb.as_raw(), 3, 3, 255.0, n), BitDepth::Eight)
        }
    }
}

/// Reads a PNG as an image. Any alpha channel in the file is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<(ImageBuffer, BitDepth)> {
    let (h, w, c, data, depth) = to_planar(&decode(path.as_ref())?);
    Ok((ImageBuffer::new(h, w, c, data)?, depth))
}

/// Reads a PNG as a matte. Colour files contribute their first channel.
pub fn read_matte(path: impl AsRef<Path>) -> Result<(AlphaMatte, BitDepth)> {
    let (img, depth) = read_image(path)?;
    Ok((AlphaMatte::from_image(&img), depth))
}

fn quantize(v: f32, max: f64) -> f64 {
    (v as f64 * max + 0.5).floor().min(max)
}

/// Encodes a planar image to PNG bytes.
pub fn encode_png(img: &ImageBuffer, depth: BitDepth) -> Result<Vec<u8>> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let n = h * w;
    let max = depth.max();
    let mut out = Vec::new();
    let encoder = PngEncoder::new(&mut out);
    let color = match (c, depth) {
        (1, BitDepth::Eight) => ExtendedColorType::L8,
        (1, BitDepth::Sixteen) => ExtendedColorType::L16,
        (3, BitDepth::Eight) => ExtendedColorType::Rgb8,
        (_, BitDepth::Sixteen) => ExtendedColorType::Rgb16,
        _ => return Err(MatteError::UnsupportedChannels(c)),
    };
    let sample = |i: usize| quantize(img.data()[(i % c) * n + i / c], max);
    let bytes: Vec<u8> = match depth {
        BitDepth::Eight => (0..n * c).map(|i| sample(i) as u8).collect(),
        // PNG stores 16-bit samples big-endian; the encoder takes native-endian bytes.
        BitDepth::Sixteen => (0..n * c).flat_map(|i| (sample(i) as u16).to_ne_bytes()).collect(),
    };
    encoder
        .write_image(&bytes, w as u32, h as u32, color)
        .map_err(|e| MatteError::Config(format!("png encode failed: {e}")))?;
    Ok(out)
}

pub fn write_image(path: impl AsRef<Path>, img: &ImageBuffer, depth: BitDepth) -> Result<()> {
    write_atomic(path, &encode_png(img, depth)?)
}

/// Writes a matte as a single-channel PNG.
pub fn write_matte(path: impl AsRef<Path>, matte: &AlphaMatte, depth: BitDepth) -> Result<()> {
    write_image(path, &matte.to_image(), depth)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| MatteError::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(MatteError::io(path, e));
    }
    Ok(())
}
