//! Command-line front end.
//!
//! Exit codes: 0 success, 1 data error (the message names the violated
//! invariant), 2 usage error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::compositor::{binarize_alpha, composite, make_trimap};
use crate::config::{Config, CONFIG_ENV};
use crate::error::{MatteError, Result, Warning};
use crate::fusion::{f_quant_with, fuse, QuantBand};
use crate::harmony::harmonize;
use crate::io::{read_image, read_matte, write_image, write_matte, BitDepth};
use crate::losses::{bce_with, coarse_loss, composition_loss, l1_loss, laplacian_loss_with, refine_loss_with};
use crate::manifest::{CorpusManifest, ManifestRecord};
use crate::metrics::{evaluate_corpus, EvalOptions, RegionMode};
use crate::report::{aggregate_line, write_report};
use crate::types::{BinaryMask, ImageBuffer, Resize};

#[derive(Debug, Parser)]
#[command(name = "mattekit", version, about = "Deterministic matting toolkit")]
pub struct Cli {
    /// TOML config file; flags override it, it overrides built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Composite every manifest record over its background.
    Compose(ComposeArgs),
    /// Transfer background statistics onto the masked foreground.
    Harmonize(HarmonizeArgs),
    /// Build a 0 / 0.5 / 1 trimap from an alpha matte.
    Trimap(TrimapArgs),
    /// Fuse a high-resolution and a low-resolution matte.
    Fuse(FuseArgs),
    /// Compute training losses between a prediction and ground truth.
    Loss(LossArgs),
    /// Score predictions against a manifest's ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Harmonize each composite, using `alpha > 0` as the foreground mask.
    #[arg(long)]
    pub harmonize: bool,
    /// Seed for drawing backgrounds for records without one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resize inputs to N x N before compositing.
    #[arg(long, value_name = "N")]
    pub resize: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct HarmonizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Strictly binary foreground mask (0 and full scale only).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub literal_eq10: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrimapArgs {
    #[arg(long)]
    pub alpha: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub radius: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// High-resolution matte; its fractional pixels are kept.
    #[arg(long)]
    pub high: PathBuf,
    /// Low-resolution matte, upsampled to the high-resolution size.
    #[arg(long)]
    pub low: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub quant_lo: Option<f64>,
    #[arg(long)]
    pub quant_hi: Option<f64>,
    /// Use the 8-bit band (1/255, 254/255) for the edge mask.
    #[arg(long, conflicts_with_all = ["quant_lo", "quant_hi"])]
    pub quant_8bit: bool,
    /// Fail on a size difference instead of resampling.
    #[arg(long)]
    pub no_resize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    All,
    Bce,
    Coarse,
    L1,
    Composition,
    Laplacian,
    Refine,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value_t = LossKind::All)]
    pub kind: LossKind,
    #[arg(long, required_unless_present = "dom")]
    pub pred: Option<PathBuf>,
    #[arg(long, required_unless_present = "dom")]
    pub gt: Option<PathBuf>,
    /// Unknown-band mask; defaults to the fractional pixels of the prediction.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, requires = "bg")]
    pub fg: Option<PathBuf>,
    #[arg(long, requires = "fg")]
    pub bg: Option<PathBuf>,
    /// Dominant loss for `--kind coarse`.
    #[arg(long, requires = "aux")]
    pub dom: Option<f64>,
    /// Three comma-separated auxiliary losses for `--kind coarse`.
    #[arg(long, value_delimiter = ',')]
    pub aux: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long, value_enum)]
    pub region: Option<RegionArg>,
    /// Directory for `per_image.jsonl`, `summary.json` and `summary.txt`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub trimap_radius: Option<usize>,
    /// Resize prediction and ground truth to N x N before scoring.
    #[arg(long, value_name = "N")]
    pub resize: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionArg {
    Whole,
    Unknown,
}

impl From<RegionArg> for RegionMode {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::Whole => RegionMode::Whole,
            RegionArg::Unknown => RegionMode::Unknown,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Effective config for a parsed command line, before command flags apply.
pub fn base_config(cli: &Cli) -> Result<Config> {
    Config::resolve(cli.config.as_deref())
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Compose(a) => {
            if let Some(seed) = a.seed {
                cfg.compose.seed = seed;
            }
            cmd_compose(a, &cfg, out, err)
        }
        Command::Harmonize(a) => {
            if let Some(e) = a.epsilon {
                cfg.harmony.epsilon = e;
            }
            if let Some(l) = a.literal_eq10 {
                cfg.harmony.literal_eq10 = l;
            }
            cfg.check()?;
            cmd_harmonize(a, &cfg)
        }
        Command::Trimap(a) => {
            if let Some(r) = a.radius {
                cfg.trimap.radius = r;
            }
            cmd_trimap(a, &cfg)
        }
        Command::Fuse(a) => {
            if a.quant_8bit {
                cfg.fusion.quant_lo = QuantBand::EIGHT_BIT.lo;
                cfg.fusion.quant_hi = QuantBand::EIGHT_BIT.hi;
            }
            if let Some(lo) = a.quant_lo {
                cfg.fusion.quant_lo = lo;
            }
            if let Some(hi) = a.quant_hi {
                cfg.fusion.quant_hi = hi;
            }
            if a.no_resize {
                cfg.fusion.resize = false;
            }
            cfg.check()?;
            cmd_fuse(a, &cfg)
        }
        Command::Loss(a) => cmd_loss(a, &cfg, out),
        Command::Eval(a) => {
            if let Some(r) = a.region {
                cfg.metrics.region = r.into();
            }
            if let Some(r) = a.trimap_radius {
                cfg.metrics.trimap_radius = r;
            }
            cmd_eval(a, &cfg, out, err)
        }
    }
}

fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MatteError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn check_unique_ids(manifest: &CorpusManifest) -> Result<()> {
    let mut seen = HashSet::new();
    for r in &manifest.records {
        let id = r.id();
        if !seen.insert(id.clone()) {
            return Err(MatteError::ManifestParse {
                line: 0,
                message: format!("duplicate record id `{id}`"),
            });
        }
    }
    Ok(())
}

/// Distinct backgrounds named in the manifest, in first-appearance order.
fn background_pool(manifest: &CorpusManifest) -> Vec<PathBuf> {
    let mut seen = HashSet::new();
    manifest
        .records
        .iter()
        .filter_map(|r| r.background.clone())
        .filter(|b| seen.insert(b.clone()))
        .collect()
}

/// Background for record `index`: its own, else a seeded draw from the pool.
/// Each record draws from its own ChaCha stream, so the choice does not
/// depend on scheduling.
pub fn pick_background(record: &ManifestRecord, index: usize, pool: &[PathBuf], seed: u64) -> Option<PathBuf> {
    if let Some(b) = &record.background {
        return Some(b.clone());
    }
    if pool.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    Some(pool[rng.random_range(0..pool.len())].clone())
}

fn compose_record(
    manifest: &CorpusManifest,
    index: usize,
    pool: &[PathBuf],
    args: &ComposeArgs,
    cfg: &Config,
) -> Result<()> {
    let record = &manifest.records[index];
    let id = record.id();
    let bg_path = pick_background(record, index, pool, cfg.compose.seed).ok_or_else(|| MatteError::ManifestParse {
        line: 0,
        message: format!("record `{id}` has no background and the manifest names none to draw from"),
    })?;
    let (fg, _) = read_image(manifest.resolve(&record.foreground))?;
    let (mut alpha, alpha_depth) = read_matte(manifest.resolve(&record.alpha))?;
    let (bg, _) = read_image(manifest.resolve(&bg_path))?;
    let mut fg = fg.to_rgb();
    let mut bg = bg.to_rgb();
    if let Some(n) = args.resize {
        fg = fg.resize_bilinear(n, n)?;
        alpha = alpha.resize_bilinear(n, n)?;
    }
    if bg.dims() != fg.dims() {
        bg = bg.resize_bilinear(fg.height(), fg.width())?;
    }
    let mut comp = composite(&fg, &bg, &alpha)?;
    if args.harmonize {
        comp = harmonize(&comp, &binarize_alpha(&alpha), &cfg.harmony)?;
    }
    write_image(args.out.join("composite").join(format!("{id}.png")), &comp, BitDepth::Eight)?;
    write_matte(args.out.join("alpha").join(format!("{id}.png")), &alpha, alpha_depth)
}

fn cmd_compose(args: &ComposeArgs, cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let manifest = CorpusManifest::load(&args.manifest)?;
    check_unique_ids(&manifest)?;
    let pool = background_pool(&manifest);
    let results: Vec<Result<()>> = with_pool(args.threads, || {
        (0..manifest.len())
            .into_par_iter()
            .map(|i| compose_record(&manifest, i, &pool, args, cfg))
            .collect()
    })?;
    let mut failed = 0;
    for (record, r) in manifest.records.iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            log::warn!("record `{}` failed: {e}", record.id());
            let _ = writeln!(err, "record `{}`: {e}", record.id());
        }
    }
    let _ = writeln!(
        out,
        "{} records, {} composited, {} failed",
        manifest.len(),
        manifest.len() - failed,
        failed
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_harmonize(args: &HarmonizeArgs, cfg: &Config) -> Result<i32> {
    let (img, depth) = read_image(&args.image)?;
    let (mask, _) = read_matte(&args.mask)?;
    let mask = BinaryMask::from_matte(&mask)?;
    let result = harmonize(&img, &mask, &cfg.harmony)?;
    write_image(&args.out, &result, depth)?;
    Ok(0)
}

fn cmd_trimap(args: &TrimapArgs, cfg: &Config) -> Result<i32> {
    let (alpha, _) = read_matte(&args.alpha)?;
    write_image(&args.out, &make_trimap(&alpha, cfg.trimap.radius), BitDepth::Eight)?;
    Ok(0)
}

fn cmd_fuse(args: &FuseArgs, cfg: &Config) -> Result<i32> {
    let (high, depth) = read_matte(&args.high)?;
    let (low, _) = read_matte(&args.low)?;
    let fused = fuse(&high, &low, &cfg.fusion)?;
    write_matte(&args.out, &fused, depth)?;
    Ok(0)
}

fn load_rgb(p: &Path) -> Result<ImageBuffer> {
    Ok(read_image(p)?.0.to_rgb())
}

fn cmd_loss(args: &LossArgs, cfg: &Config, out: &mut dyn Write) -> Result<i32> {
    let mut rec = serde_json::Map::new();
    rec.insert("kind".into(), json!(format!("{:?}", args.kind).to_lowercase()));
    if args.kind == LossKind::Coarse {
        let (dom, aux) = match (args.dom, &args.aux) {
            (Some(d), Some(a)) if a.len() == 3 => (d, [a[0], a[1], a[2]]),
            _ => return Err(MatteError::Config("--kind coarse needs --dom and three --aux values".into())),
        };
        rec.insert("coarse".into(), json!(coarse_loss(dom, aux)));
        let _ = writeln!(out, "{}", serde_json::Value::Object(rec));
        return Ok(0);
    }
    let (Some(pred_path), Some(gt_path)) = (&args.pred, &args.gt) else {
        return Err(MatteError::Config("--pred and --gt are required".into()));
    };
    let (pred, _) = read_matte(pred_path)?;
    let (gt, _) = read_matte(gt_path)?;
    let g = match &args.mask {
        Some(p) => BinaryMask::from_matte(&read_matte(p)?.0)?,
        None => f_quant_with(&pred, QuantBand::STRICT),
    };
    let images = match (&args.fg, &args.bg) {
        (Some(f), Some(b)) => Some((load_rgb(f)?, load_rgb(b)?)),
        _ => None,
    };
    let want = |k: LossKind| args.kind == LossKind::All || args.kind == k;
    let needs_images = matches!(args.kind, LossKind::Composition | LossKind::Refine);
    if needs_images && images.is_none() {
        return Err(MatteError::Config("composition and refine losses need --fg and --bg".into()));
    }
    let mut warnings: Vec<Warning> = Vec::new();
    rec.insert("unknown_pixels".into(), json!(g.count()));
    if want(LossKind::Bce) {
        rec.insert("bce".into(), json!(bce_with(&pred, &binarize_alpha(&gt), cfg.losses.bce_clamp)?));
    }
    if want(LossKind::L1) {
        let v = l1_loss(&pred, &gt, &g)?;
        warnings.extend(v.warning);
        rec.insert("l1".into(), json!(v.value));
    }
    if want(LossKind::Laplacian) {
        rec.insert(
            "laplacian".into(),
            json!(laplacian_loss_with(&pred, &gt, &g, cfg.losses.pyramid_levels)?),
        );
    }
    if let Some((fg, bg)) = &images {
        if want(LossKind::Composition) {
            let v = composition_loss(&pred, &gt, fg, bg, &g)?;
            warnings.extend(v.warning);
            rec.insert("composition".into(), json!(v.value));
        }
        if want(LossKind::Refine) {
            let r = refine_loss_with(&pred, &gt, fg, bg, &g, &cfg.losses)?;
            warnings.extend(r.warning);
            rec.insert("refine".into(), json!(r.total));
        }
    }
    warnings.dedup();
    rec.insert("warnings".into(), json!(warnings));
    let _ = writeln!(out, "{}", serde_json::Value::Object(rec));
    Ok(0)
}

fn cmd_eval(args: &EvalArgs, cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let manifest = CorpusManifest::load(&args.manifest)?;
    check_unique_ids(&manifest)?;
    let opts = EvalOptions { resize: args.resize };
    let report = with_pool(args.threads, || evaluate_corpus(&manifest, &args.pred_dir, &cfg.metrics, &opts))?;
    if let Some(dir) = &args.report {
        write_report(dir, &report, cfg, &opts)?;
    }
    for f in &report.failures {
        log::warn!("record `{}` failed: {}", f.id, f.message);
        let _ = writeln!(err, "record `{}`: {}", f.id, f.message);
    }
    let _ = writeln!(out, "{}", aggregate_line(&report.aggregate));
    let _ = writeln!(out, "evaluated {}, failed {}", report.count, report.failures.len());
    Ok(if report.failures.is_empty() { 0 } else { 1 })
}
