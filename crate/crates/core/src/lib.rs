//! Deterministic building blocks for trimap-free image matting.
//!
//! Rasters are planar `f32` in `[0, 1]`; all arithmetic runs in `f64`.
//!
//! - [`compositor`]: matting-equation compositing, binarization, trimaps
//! - [`harmony`]: masked statistics transfer from background to foreground
//! - [`fusion`]: edge mask and coarse-to-fine matte fusion
//! - [`losses`]: BCE, coarse, L1, composition and Laplacian losses
//! - [`metrics`]: SAD, MSE, Grad and Conn, per image and per corpus
//! - [`netref`]: reference forward passes for the attention, gate and fusion blocks
//!
//! The `mattekit` binary wraps these behind a CLI (see [`cli`]).

pub mod cli;
pub mod compositor;
pub mod config;
pub mod error;
pub mod fusion;
pub mod harmony;
pub mod io;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod netref;
pub mod pyramid;
pub mod report;
pub mod types;

pub use config::Config;
pub use error::{MatteError, Result, Scored, Warning};
pub use manifest::{CorpusManifest, ManifestRecord, Split};
pub use types::{AlphaMatte, BinaryMask, Dims, ImageBuffer, Resize, Tensor};
