//! Laplacian pyramid with a 5-tap binomial kernel.
//!
//! * blur: separable `[1, 4, 6, 4, 1] / 16`, mirror borders (`d c b | a b c d | c b a`)
//! * down: blur, then keep even rows and columns (`ceil(n / 2)` samples)
//! * up: zero-insertion followed by the same kernel, normalized by the weight
//!   that lands on inserted samples, so constants survive at any border
//! * band `k < levels - 1` is `G_k - up(G_{k+1})`; the last band is the
//!   Gaussian residual `G_{levels - 1}`

use crate::error::{MatteError, Result};

pub const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
pub const DEFAULT_LEVELS: usize = 5;

/// Smallest side accepted by the pyramid: the kernel width.
pub const MIN_SIDE: usize = BINOMIAL5.len();

/// A single-channel `f64` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width);
        Plane { height, width, data }
    }
}

/// Mirror index folding without edge repetition; valid for any offset.
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let i = i.rem_euclid(period);
    if i >= n as isize {
        (period - i) as usize
    } else {
        i as usize
    }
}

fn blur_axis(src: &Plane, horizontal: bool) -> Plane {
    let (h, w) = (src.height, src.width);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, k) in BINOMIAL5.iter().enumerate() {
                let off = t as isize - 2;
                let v = if horizontal {
                    src.data[y * w + mirror(x as isize + off, w)]
                } else {
                    src.data[mirror(y as isize + off, h) * w + x]
                };
                acc += k * v;
            }
            out[y * w + x] = acc;
        }
    }
    Plane::new(h, w, out)
}

pub fn blur(src: &Plane) -> Plane {
    blur_axis(&blur_axis(src, true), false)
}

pub fn downsample(src: &Plane) -> Plane {
    let b = blur(src);
    let (h, w) = (src.height.div_ceil(2), src.width.div_ceil(2));
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            data.push(b.data[2 * y * b.width + 2 * x]);
        }
    }
    Plane::new(h, w, data)
}

/// One axis of the zero-insertion upsampler.
fn up_axis(src: &Plane, out_len: usize, horizontal: bool) -> Plane {
    let (h, w) = if horizontal {
        (src.height, out_len)
    } else {
        (out_len, src.width)
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let j = if horizontal { x } else { y };
            let (mut num, mut den) = (0.0, 0.0);
            for (t, k) in BINOMIAL5.iter().enumerate() {
                let jj = mirror(j as isize + t as isize - 2, out_len);
                if jj % 2 == 0 {
                    let v = if horizontal {
                        src.data[y * src.width + jj / 2]
                    } else {
                        src.data[(jj / 2) * src.width + x]
                    };
                    num += k * v;
                    den += k;
                }
            }
            out[y * w + x] = num / den;
        }
    }
    Plane::new(h, w, out)
}

/// Expands `src` to `height x width`, where `src` is the `downsample` of a
/// plane of that size.
pub fn upsample(src: &Plane, height: usize, width: usize) -> Plane {
    up_axis(&up_axis(src, width, true), height, false)
}

/// Bands from finest (index 0) to the coarsest residual.
pub fn laplacian_pyramid(src: &Plane, levels: usize) -> Result<Vec<Plane>> {
    if src.height.min(src.width) < MIN_SIDE {
        return Err(MatteError::ImageTooSmall {
            height: src.height,
            width: src.width,
            min: MIN_SIDE,
        });
    }
    if levels == 0 {
        return Err(MatteError::Config("pyramid needs at least one level".into()));
    }
    let mut bands = Vec::with_capacity(levels);
    let mut current = src.clone();
    for _ in 0..levels - 1 {
        let down = downsample(&current);
        let up = upsample(&down, current.height, current.width);
        let band = current.data.iter().zip(&up.data).map(|(a, b)| a - b).collect();
        bands.push(Plane::new(current.height, current.width, band));
        current = down;
    }
    bands.push(current);
    Ok(bands)
}
