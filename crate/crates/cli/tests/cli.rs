use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use shlab::forms::narrow_class_group;
use shlab::output::{read_cycle_points, read_stats, CYCLE_POINTS_HEADER};
use tempfile::TempDir;

fn shlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classgroup_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = shlab(&["--mode", "classgroup", "--dk", "12"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("classgroup.json"));
    assert_eq!(v["order"], 2);
    let g = narrow_class_group(12).unwrap();
    let want: Vec<String> = g.classes().iter().map(|q| q.to_string()).collect();
    let got: Vec<String> = v["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect();
    assert_eq!(got, want);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn sh_cycles_csv_shape() {
    let dir = TempDir::new().unwrap();
    let out = shlab(
        &[
            "--mode",
            "sh-cycles",
            "--dk",
            "5",
            "--f",
            "1",
            "--p",
            "3",
            "--samples",
            "100",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("cycle_points.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CYCLE_POINTS_HEADER.join(","));
    assert!(lines.all(|l| l.split(',').count() == 9));
    let rows = read_cycle_points(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(rows
        .iter()
        .all(|r| r.r < 6 && r.re_z.abs() <= 0.5 + 1e-9 && r.re_z.hypot(r.im_z) >= 1.0 - 1e-9));
    let v = json(&dir.path().join("sh_cycles.json"));
    assert_eq!(v["toral_discriminant"], 20);
}

#[test]
fn sh_cycles_default_sample_count_follows_step() {
    let dir = TempDir::new().unwrap();
    let out = shlab(
        &[
            "--mode",
            "sh-cycles",
            "--dk",
            "12",
            "--p",
            "5",
            "--step",
            "0.05",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(&dir.path().join("sh_cycles.json"));
    let cycles = v["cycles"].as_array().unwrap();
    assert_eq!(cycles.len(), 2);
    let rows = read_cycle_points(std::fs::File::open(dir.path().join("cycle_points.csv")).unwrap())
        .unwrap();
    let total: u64 = cycles.iter().map(|c| c["samples"].as_u64().unwrap()).sum();
    assert_eq!(rows.len() as u64, total);
}

#[test]
fn duke_outputs() {
    let dir = TempDir::new().unwrap();
    let out = shlab(
        &[
            "--mode",
            "duke",
            "--disc-min",
            "100",
            "--disc-max",
            "200",
            "--boxes",
            "-0.5,0.5,1,2",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_stats(std::fs::File::open(dir.path().join("stats.csv")).unwrap()).unwrap();
    // one box plus the rest cell, one class
    assert_eq!(rows.iter().filter(|r| r.kind == "box").count(), 2);
    let v = json(&dir.path().join("duke.json"));
    assert!(v["report"]["tv"].as_f64().unwrap() >= 0.0);
    let expected = v["report"]["boxes"][0]["expected"].as_f64().unwrap();
    assert!((expected - 3.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn stats_outputs() {
    let dir = TempDir::new().unwrap();
    let out = shlab(
        &[
            "--mode",
            "stats",
            "--disc-min",
            "100",
            "--disc-max",
            "400",
            "--p",
            "3",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("stats.json"));
    assert_eq!(v["pooled"]["classes"].as_array().unwrap().len(), 6);
    assert!(!v["per_order"].as_array().unwrap().is_empty());
    let rows = read_stats(std::fs::File::open(dir.path().join("stats.csv")).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.kind == "cell"));
}

#[test]
fn atr_outputs() {
    let dir = TempDir::new().unwrap();
    let out = shlab(&["--mode", "atr"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("atr.json"));
    let exts = v["extensions"].as_array().unwrap();
    assert_eq!(exts.len(), 6);
    assert_eq!(exts[0]["disc_norm"], "704");
    assert!(exts.iter().all(|e| e["unit_fixes_cycle"] == true));
    let out = shlab(
        &["--mode", "atr", "--base", "5", "--delta", "3-2*sqrt5"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(
        json(&dir.path().join("atr.json"))["extensions"][0]["disc_norm"],
        "11"
    );
}

#[test]
fn outputs_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        assert!(shlab(
            &[
                "--mode",
                "sh-cycles",
                "--dk",
                "13",
                "--p",
                "5",
                "--samples",
                "50"
            ],
            dir.path()
        )
        .status
        .success());
        assert!(shlab(
            &[
                "--mode",
                "stats",
                "--disc-min",
                "100",
                "--disc-max",
                "300",
                "--p",
                "3"
            ],
            dir.path()
        )
        .status
        .success());
    }
    for name in [
        "cycle_points.csv",
        "sh_cycles.json",
        "stats.csv",
        "stats.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "mode = \"classgroup\"\ndk = 40\n\n[thresholds]\ntv_max = 0.1\n",
    )
    .unwrap();
    let out = shlab(&["--config", cfg.to_str().unwrap()], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&dir.path().join("classgroup.json"))["disc"], 40);
    let out = shlab(
        &["--config", cfg.to_str().unwrap(), "--dk", "5", "--f", "3"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("classgroup.json"))["disc"], 45);
    std::fs::write(&cfg, "mode = \"classgroup\"\ncolour = 1\n").unwrap();
    assert_eq!(
        shlab(&["--config", cfg.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| shlab(args, dir.path()).status.code();
    assert_eq!(code(&["--mode", "nonsense"]), Some(1));
    assert_eq!(code(&["--dk", "5"]), Some(1));
    assert_eq!(code(&["--mode", "classgroup"]), Some(1));
    assert_eq!(code(&["--mode", "classgroup", "--dk", "7"]), Some(1));
    assert_eq!(
        code(&["--mode", "sh-cycles", "--dk", "5", "--p", "2"]),
        Some(1)
    );
    assert_eq!(code(&["--mode", "duke", "--disc-min", "10"]), Some(1));
    assert_eq!(
        code(&[
            "--mode",
            "duke",
            "--disc-min",
            "10",
            "--disc-max",
            "50",
            "--boxes",
            "0,0.7,1,2"
        ]),
        Some(1)
    );
    // 11 splits in Q(√5)
    assert_eq!(
        code(&["--mode", "sh-cycles", "--dk", "5", "--p", "11"]),
        Some(2)
    );
    // 3 divides the conductor
    assert_eq!(
        code(&["--mode", "sh-cycles", "--dk", "5", "--f", "3", "--p", "3"]),
        Some(2)
    );
    // δ = 1 + √5 is totally positive, so not ATR
    assert_eq!(
        code(&["--mode", "atr", "--base", "5", "--delta", "1+sqrt5"]),
        Some(2)
    );
    assert_eq!(
        code(&["--mode", "atr", "--base", "3", "--delta", "1-sqrt3"]),
        Some(1)
    );
}
