mod common;

use std::fs;
use std::path::Path;

use mattekit::io::{read_image, read_matte, write_image, write_matte, BitDepth};
use mattekit::{AlphaMatte, ImageBuffer};
use serde_json::Value;

use common::*;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `n` records whose ground truth is all zero and whose predictions
/// are the constants in `pred_levels` (in 1/255 steps).
fn constant_corpus(dir: &Path, pred_levels: &[u8]) {
    let (h, w) = (13, 13);
    let mut manifest = String::new();
    for (i, &lvl) in pred_levels.iter().enumerate() {
        let id = format!("c{i}");
        write_image(dir.join(format!("{id}_fg.png")), &ImageBuffer::filled(h, w, 3, 0.5).unwrap(), BitDepth::Eight).unwrap();
        write_matte(dir.join(format!("{id}.png")), &AlphaMatte::filled(h, w, 0.0).unwrap(), BitDepth::Eight).unwrap();
        let pred = AlphaMatte::filled(h, w, lvl as f32 / 255.0).unwrap();
        write_matte(dir.join("preds").join(format!("{id}.png")), &pred, BitDepth::Eight).unwrap();
        manifest.push_str(&format!("{{\"foreground\":\"{id}_fg.png\",\"alpha\":\"{id}.png\",\"split\":\"test\"}}\n"));
    }
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
}

#[test]
fn compose_empty_manifest_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.jsonl");
    fs::write(&m, "# nothing here\n\n").unwrap();
    let out = dir.path().join("out");
    let o = run_bin(&["compose", "--manifest", s(&m), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 records"));
    assert!(!out.exists() || tree_bytes(&out).is_empty());
}

#[test]
fn compose_single_record_writes_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_image(d.join("f.png"), &ImageBuffer::filled(6, 7, 3, 0.8).unwrap(), BitDepth::Eight).unwrap();
    write_image(d.join("b.png"), &ImageBuffer::filled(6, 7, 3, 0.2).unwrap(), BitDepth::Eight).unwrap();
    let alpha = AlphaMatte::from_fn(6, 7, |_, x| x as f32 / 6.0).unwrap();
    write_matte(d.join("a.png"), &alpha, BitDepth::Sixteen).unwrap();
    fs::write(
        d.join("m.jsonl"),
        "{\"id\":\"only\",\"foreground\":\"f.png\",\"alpha\":\"a.png\",\"background\":\"b.png\",\"split\":\"train\"}\n",
    )
    .unwrap();
    let out = d.join("out");
    let o = run_bin(&["compose", "--manifest", s(&d.join("m.jsonl")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree_bytes(&out);
    let names: Vec<_> = files.iter().map(|(p, _)| p.as_str()).collect();
    assert_eq!(names, ["alpha/only.png", "composite/only.png"]);
    let (copy, depth) = read_matte(out.join("alpha/only.png")).unwrap();
    assert_eq!(depth, BitDepth::Sixteen);
    assert_eq!(copy, read_matte(d.join("a.png")).unwrap().0);
    let (comp, _) = read_image(out.join("composite/only.png")).unwrap();
    let expected = (0.2 + 0.6 * (6.0 / 6.0)) as f32;
    assert!((comp.get(0, 0, 6) - expected).abs() < 1.0 / 255.0);
}

#[test]
fn compose_is_deterministic_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = corpus_dir().join("manifest.jsonl");
    for out in [a.path(), b.path()] {
        let o = run_bin(&["compose", "--manifest", s(&m), "--out", s(out), "--seed", "11"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
}

#[test]
fn compose_rejects_bad_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    fs::write(&m, "{\"foreground\":\"f.png\",\"alpha\":\"a.png\",\"split\":\"holdout\"}\n").unwrap();
    let o = run_bin(&["compose", "--manifest", s(&m), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ManifestParse"), "{}", stderr(&o));
}

#[test]
fn compose_reports_per_record_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_image(d.join("f.png"), &ImageBuffer::filled(4, 4, 3, 0.8).unwrap(), BitDepth::Eight).unwrap();
    write_matte(d.join("a.png"), &AlphaMatte::filled(4, 4, 1.0).unwrap(), BitDepth::Eight).unwrap();
    fs::write(
        d.join("m.jsonl"),
        "{\"foreground\":\"f.png\",\"alpha\":\"a.png\",\"background\":\"missing.png\",\"split\":\"train\"}\n",
    )
    .unwrap();
    let out = d.join("out");
    let o = run_bin(&["compose", "--manifest", s(&d.join("m.jsonl")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("1 failed"));
    assert!(!out.exists() || tree_bytes(&out).is_empty());
}

#[test]
fn eval_perfect_predictions_print_zeros() {
    let corpus = corpus_dir();
    let o = run_bin(&[
        "eval", "--manifest", s(&corpus.join("manifest.jsonl")), "--pred-dir", s(&corpus.join("alpha")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("SAD 0.000  MSE 0.000  Grad 0.000  Conn 0.000\n"));
}

#[test]
fn eval_missing_prediction_exits_one_with_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    constant_corpus(d, &[10, 20]);
    fs::remove_file(d.join("preds/c1.png")).unwrap();
    let report = d.join("report");
    let o = run_bin(&[
        "eval", "--manifest", s(&d.join("manifest.jsonl")), "--pred-dir", s(&d.join("preds")), "--report", s(&report),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let per_image = fs::read_to_string(report.join("per_image.jsonl")).unwrap();
    assert_eq!(per_image.lines().count(), 1);
    let summary: Value = serde_json::from_str(&fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["count"], 1);
    assert_eq!(summary["failures"][0]["kind"], "MissingPrediction");
}

#[test]
fn eval_summary_matches_hand_computed_means() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let levels = [51u8, 102, 153];
    constant_corpus(d, &levels);
    let report = d.join("report");
    let o = run_bin(&[
        "eval", "--manifest", s(&d.join("manifest.jsonl")), "--pred-dir", s(&d.join("preds")), "--report", s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // Constant offsets c = 0.2, 0.4, 0.6 over 169 pixels: SAD = 169 c / 1000,
    // MSE = 1000 c^2, zero gradients, and no opaque anchor for Conn.
    let cs: Vec<f64> = levels.iter().map(|&l| (l as f32 / 255.0) as f64).collect();
    let sad = cs.iter().map(|c| 169.0 * c / 1000.0).sum::<f64>() / 3.0;
    let mse = cs.iter().map(|c| 1000.0 * c * c).sum::<f64>() / 3.0;
    let summary: Value = serde_json::from_str(&fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    let agg = &summary["aggregate"];
    assert!((agg["mean_sad"].as_f64().unwrap() - sad).abs() < 1e-9);
    assert!((agg["mean_mse"].as_f64().unwrap() - mse).abs() < 1e-9);
    assert!(agg["mean_grad"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(agg["mean_conn"].as_f64().unwrap(), 0.0);
    assert!(stdout(&o).starts_with(&format!("SAD {sad:.3}  MSE {mse:.3}  Grad 0.000  Conn 0.000")));
    let per_image = fs::read_to_string(report.join("per_image.jsonl")).unwrap();
    assert!(per_image.lines().all(|l| l.contains("NoFullyOpaqueRegion")));
    let table = fs::read_to_string(report.join("summary.txt")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("mean")));
}

#[test]
fn config_precedence_flag_over_file_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    constant_corpus(d, &[10]);
    let cfg = d.join("cfg.toml");
    fs::write(&cfg, "[metrics]\nregion = \"unknown\"\ntrimap_radius = 3\n").unwrap();
    let summary = |report: &Path| -> Value {
        serde_json::from_str(&fs::read_to_string(report.join("summary.json")).unwrap()).unwrap()
    };
    let (manifest, preds) = (d.join("manifest.jsonl"), d.join("preds"));
    let base = ["eval", "--manifest", s(&manifest), "--pred-dir", s(&preds)];

    let r0 = d.join("r0");
    let mut args = base.to_vec();
    args.extend(["--report", s(&r0)]);
    assert_eq!(run_bin(&args).status.code(), Some(0));
    let v = summary(&r0);
    assert_eq!(v["config"]["metrics"]["region"], "whole");
    assert_eq!(v["config"]["metrics"]["trimap_radius"], 15);

    let r1 = d.join("r1");
    let mut args = base.to_vec();
    args.extend(["--report", s(&r1), "--config", s(&cfg), "--trimap-radius", "5"]);
    assert_eq!(run_bin(&args).status.code(), Some(0));
    let v = summary(&r1);
    assert_eq!(v["config"]["metrics"]["region"], "unknown");
    assert_eq!(v["config"]["metrics"]["trimap_radius"], 5);
    assert_eq!(v["config"]["metrics"]["sad_scale"], 0.001);

    let r2 = d.join("r2");
    let mut args = base.to_vec();
    args.extend(["--report", s(&r2)]);
    let o = std::process::Command::new(bin())
        .args(&args)
        .env("MATTEKIT_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = summary(&r2);
    assert_eq!(v["config"]["metrics"]["region"], "unknown");
    assert_eq!(v["config"]["metrics"]["trimap_radius"], 3);
}

#[test]
fn fuse_identical_fractional_mattes_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = AlphaMatte::from_fn(9, 11, |y, x| ((y * 11 + x) % 254 + 1) as f32 / 255.0).unwrap();
    write_matte(d.join("m.png"), &m, BitDepth::Eight).unwrap();
    let o = run_bin(&["fuse", "--high", s(&d.join("m.png")), "--low", s(&d.join("m.png")), "--out", s(&d.join("f.png"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_matte(d.join("f.png")).unwrap(), read_matte(d.join("m.png")).unwrap());
}

#[test]
fn fuse_upsamples_low_resolution_outside_the_edge_band() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let high = AlphaMatte::from_fn(8, 8, |_, x| if x < 4 { 0.0 } else { 0.5 }).unwrap();
    write_matte(d.join("h.png"), &high, BitDepth::Sixteen).unwrap();
    write_matte(d.join("l.png"), &AlphaMatte::filled(2, 2, 1.0).unwrap(), BitDepth::Eight).unwrap();
    let o = run_bin(&["fuse", "--high", s(&d.join("h.png")), "--low", s(&d.join("l.png")), "--out", s(&d.join("f.png"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (fused, depth) = read_matte(d.join("f.png")).unwrap();
    assert_eq!(depth, BitDepth::Sixteen);
    assert_eq!(fused.get(3, 0), 1.0);
    assert!((fused.get(3, 7) - 0.5).abs() < 1e-4);
    let o = run_bin(&[
        "fuse", "--high", s(&d.join("h.png")), "--low", s(&d.join("l.png")), "--out", s(&d.join("g.png")), "--no-resize",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ShapeMismatch"));
    assert!(!d.join("g.png").exists());
}

#[test]
fn trimap_radius_zero_on_binary_matte_has_no_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = AlphaMatte::from_fn(10, 10, |y, x| if (3..7).contains(&y) && (2..8).contains(&x) { 1.0 } else { 0.0 }).unwrap();
    write_matte(d.join("a.png"), &m, BitDepth::Eight).unwrap();
    let o = run_bin(&["trimap", "--alpha", s(&d.join("a.png")), "--out", s(&d.join("t.png")), "--radius", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (t, _) = read_matte(d.join("t.png")).unwrap();
    assert!(t.values().iter().all(|&v| v == 0.0 || v == 1.0));
    assert_eq!(t, m);
    let o = run_bin(&["trimap", "--alpha", s(&d.join("a.png")), "--out", s(&d.join("t2.png")), "--radius", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let (t2, _) = read_matte(d.join("t2.png")).unwrap();
    assert!(t2.values().iter().any(|&v| (v - 128.0 / 255.0).abs() < 1e-6));
}

#[test]
fn harmonize_requires_a_strictly_binary_mask() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = ImageBuffer::from_fn(8, 8, 3, |c, y, x| ((c + y + x) % 5) as f32 / 5.0).unwrap();
    write_image(d.join("c.png"), &img, BitDepth::Eight).unwrap();
    write_matte(d.join("soft.png"), &AlphaMatte::filled(8, 8, 0.5).unwrap(), BitDepth::Eight).unwrap();
    let o = run_bin(&["harmonize", "--image", s(&d.join("c.png")), "--mask", s(&d.join("soft.png")), "--out", s(&d.join("h.png"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NonBinaryValue"), "{}", stderr(&o));
    assert!(!d.join("h.png").exists());

    let mask = AlphaMatte::from_fn(8, 8, |y, _| if y < 4 { 1.0 } else { 0.0 }).unwrap();
    write_matte(d.join("mask.png"), &mask, BitDepth::Eight).unwrap();
    let o = run_bin(&["harmonize", "--image", s(&d.join("c.png")), "--mask", s(&d.join("mask.png")), "--out", s(&d.join("h.png"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (out, _) = read_image(d.join("h.png")).unwrap();
    let (orig, _) = read_image(d.join("c.png")).unwrap();
    for c in 0..3 {
        for y in 4..8 {
            for x in 0..8 {
                assert_eq!(out.get(c, y, x), orig.get(c, y, x));
            }
        }
    }

    let full = AlphaMatte::filled(8, 8, 1.0).unwrap();
    write_matte(d.join("full.png"), &full, BitDepth::Eight).unwrap();
    let o = run_bin(&["harmonize", "--image", s(&d.join("c.png")), "--mask", s(&d.join("full.png")), "--out", s(&d.join("x.png"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("EmptyBackground"), "{}", stderr(&o));
}

#[test]
fn loss_emits_one_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_matte(d.join("p.png"), &AlphaMatte::filled(8, 8, 0.5).unwrap(), BitDepth::Eight).unwrap();
    write_matte(d.join("g.png"), &AlphaMatte::filled(8, 8, 1.0).unwrap(), BitDepth::Eight).unwrap();
    let o = run_bin(&["loss", "--pred", s(&d.join("p.png")), "--gt", s(&d.join("g.png")), "--kind", "bce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let bce = v["bce"].as_f64().unwrap();
    // 0.5 does not survive 8-bit quantization exactly: 128 / 255.
    assert!((bce + (128.0f32 / 255.0).ln() as f64).abs() < 1e-6, "{bce}");

    let o = run_bin(&["loss", "--kind", "coarse", "--dom", "1", "--aux", "1,1,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["coarse"].as_f64().unwrap(), 2.8);

    let o = run_bin(&["loss", "--pred", s(&d.join("g.png")), "--gt", s(&d.join("g.png")), "--kind", "l1"]);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["l1"].as_f64().unwrap(), 0.0);
    assert_eq!(v["warnings"][0], "EmptyUnknown");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run_bin(&[]).status.code(), Some(2));
    assert_eq!(run_bin(&["nope"]).status.code(), Some(2));
    assert_eq!(run_bin(&["eval", "--manifest", "m.jsonl"]).status.code(), Some(2));
    assert_eq!(run_bin(&["fuse", "--high", "a", "--low", "b", "--out", "c", "--quant-8bit", "--quant-lo", "0.1"]).status.code(), Some(2));
}
