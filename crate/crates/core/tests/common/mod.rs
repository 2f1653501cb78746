#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mattekit::io::{write_image, write_matte, BitDepth};
use mattekit::{AlphaMatte, ImageBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matte with runs of exact 0 and 1 mixed with fractional values, so that
/// opaque regions, thresholds and borders all get exercised.
pub fn random_matte(rng: &mut ChaCha8Rng, h: usize, w: usize) -> AlphaMatte {
    let cx = rng.random_range(0.0..w as f64);
    let cy = rng.random_range(0.0..h as f64);
    let r = rng.random_range(2.0..(h.min(w) as f64 * 0.6));
    AlphaMatte::from_fn(h, w, |y, x| {
        let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
        let base = ((r - d) / 3.0 + 0.5).clamp(0.0, 1.0);
        let roll: f64 = rng.random();
        let v = if roll < 0.15 {
            rng.random::<f64>()
        } else if roll < 0.2 {
            1.0 - base
        } else {
            base
        };
        ((v * 255.0).round() / 255.0) as f32
    })
    .unwrap()
}

pub fn uniform_matte(rng: &mut ChaCha8Rng, h: usize, w: usize) -> AlphaMatte {
    AlphaMatte::from_fn(h, w, |_, _| rng.random::<f32>()).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, c, |_, _, _| rng.random::<f32>()).unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mattekit")
}

pub fn run_bin(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("MATTEKIT_CONFIG")
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn mattekit")
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn corpus_dir() -> PathBuf {
    fixture_dir().join("corpus")
}

pub fn golden_dir() -> PathBuf {
    fixture_dir().join("golden")
}

pub fn blessing() -> bool {
    std::env::var_os("MATTEKIT_BLESS").is_some_and(|v| v == "1")
}

/// All regular files under `root`, as sorted `(relative path, bytes)` pairs.
pub fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub const FIXTURE_SIZES: [(usize, usize); 10] = [
    (24, 32),
    (32, 24),
    (28, 28),
    (20, 36),
    (36, 20),
    (24, 24),
    (30, 26),
    (26, 30),
    (32, 32),
    (22, 34),
];

fn soft_disc(h: usize, w: usize, cy: f64, cx: f64, r: f64, soft: f64) -> AlphaMatte {
    AlphaMatte::from_fn(h, w, |y, x| {
        let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
        let a = ((r - d) / soft + 0.5).clamp(0.0, 1.0);
        ((a * 255.0).round() / 255.0) as f32
    })
    .unwrap()
}

/// Writes the ten-record fixture corpus: foregrounds, alphas, three shared
/// backgrounds, predictions and `manifest.jsonl`. Fully determined by the
/// fixed seed.
pub fn write_fixture_corpus(dir: &Path) {
    let mut r = rng(20_240_611);
    for sub in ["fg", "alpha", "bg", "preds"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
    }
    for b in 0..3 {
        let (h, w) = (40, 40);
        let tint: [f64; 3] = [r.random(), r.random(), r.random()];
        let bg = ImageBuffer::from_fn(h, w, 3, |c, y, x| {
            let wave = ((x as f64 * 0.3 + c as f64).sin() * 0.5 + 0.5) * ((y as f64 * 0.2).cos() * 0.25 + 0.75);
            (0.6 * tint[c] + 0.4 * wave) as f32
        })
        .unwrap();
        write_image(dir.join("bg").join(format!("bg{b}.png")), &bg, BitDepth::Eight).unwrap();
    }
    let mut manifest = String::from("# ten-record fixture corpus\n");
    for (i, &(h, w)) in FIXTURE_SIZES.iter().enumerate() {
        let id = format!("r{i:02}");
        let hue: [f64; 3] = [r.random(), r.random(), r.random()];
        let fg = ImageBuffer::from_fn(h, w, 3, |c, y, x| {
            let ramp = (x + y) as f64 / (h + w) as f64;
            (0.5 * hue[c] + 0.3 * ramp + 0.2 * ((x * (c + 1)) % 7) as f64 / 7.0) as f32
        })
        .unwrap();
        let cy = h as f64 / 2.0 + r.random_range(-2.0..2.0);
        let cx = w as f64 / 2.0 + r.random_range(-2.0..2.0);
        let radius = h.min(w) as f64 * r.random_range(0.3..0.4);
        let alpha = soft_disc(h, w, cy, cx, radius, r.random_range(2.0..5.0));
        let pred = AlphaMatte::from_fn(h, w, |y, x| {
            let a = alpha.get(y, x) as f64;
            let noise = if a > 0.0 && a < 1.0 { r.random_range(-0.2..0.2) } else { 0.0 };
            let blob = if y < 3 && x < 3 && i % 3 == 0 { 0.4 } else { 0.0 };
            let v = (a + noise + blob).clamp(0.0, 1.0);
            ((v * 255.0).round() / 255.0) as f32
        })
        .unwrap();
        write_image(dir.join("fg").join(format!("{id}.png")), &fg, BitDepth::Eight).unwrap();
        write_matte(dir.join("alpha").join(format!("{id}.png")), &alpha, BitDepth::Eight).unwrap();
        let pred_depth = if i == 4 { BitDepth::Sixteen } else { BitDepth::Eight };
        write_matte(dir.join("preds").join(format!("{id}.png")), &pred, pred_depth).unwrap();
        let split = ["train", "val", "test"][i % 3];
        let background = if i < 7 {
            format!(",\"background\":\"bg/bg{}.png\"", i % 3)
        } else {
            String::new()
        };
        manifest.push_str(&format!(
            "{{\"foreground\":\"fg/{id}.png\",\"alpha\":\"alpha/{id}.png\"{background},\"split\":\"{split}\"}}\n"
        ));
    }
    fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
}
