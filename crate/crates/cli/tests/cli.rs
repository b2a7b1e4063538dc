use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffwalker::io::{read_assignments, read_label_image, read_weights, write_label_image, write_seeds, write_weights};
use diffwalker::{EdgeWeights, LabelImage, LatticeGraph, SeedSet};
use tempfile::TempDir;

/// Runs the binary in `dir` with a whitespace-separated argument line.
fn diffwalker(line: &str, dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffwalker"))
        .args(line.split_whitespace())
        .current_dir(dir)
        .env_remove("DIFFWALKER_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(line: &str, dir: &Path) -> Output {
    let out = diffwalker(line, dir);
    assert!(
        out.status.success(),
        "`{line}` failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(line: &str, dir: &Path) -> i32 {
    diffwalker(line, dir).status.code().expect("exit code")
}

/// Files in `dir` and their bytes, sorted by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Two regions split by a vertical line, as a CSV label grid.
fn halves(dir: &Path, h: usize, w: usize) -> PathBuf {
    let path = dir.join("gt.csv");
    let labels = (0..h * w).map(|v| u32::from(v % w >= w / 2)).collect();
    write_label_image(&path, &LabelImage::new(h, w, labels).unwrap()).unwrap();
    path
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

#[test]
fn midpoint_of_three_pixels_is_even() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "img.pgm", "P2\n3 1\n255\n10 200 30\n");
    write(d, "seeds.csv", "row,col,label\n0,0,0\n0,2,1\n");
    ok("solve --image img.pgm --beta 0 --seeds seeds.csv --out-dir out", d);
    let z = read_assignments(&d.join("out/assignments.csv")).unwrap();
    assert!((z.get(1, 0) - 0.5).abs() < 1e-12);
    assert!((z.get(1, 1) - 0.5).abs() < 1e-12);
    for name in ["labels.pgm", "entropy.csv", "solve.json", "run.json"] {
        assert!(d.join("out").join(name).exists(), "{name}");
    }
}

#[test]
fn zero_beta_matches_unit_weights() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "img.csv", "0.1,0.9,0.4,0.2\n0.7,0.3,0.8,0.5\n0.0,1.0,0.6,0.3\n");
    write(d, "seeds.csv", "row,col,label\n0,0,0\n2,3,1\n1,2,2\n");
    let graph = LatticeGraph::new(3, 4).unwrap();
    let unit = EdgeWeights::uniform(graph.edge_count(), 1.0).unwrap();
    write_weights(&d.join("unit.bin"), &graph, &unit).unwrap();
    ok("solve --image img.csv --beta 0 --seeds seeds.csv --out-dir a", d);
    ok("solve --weights unit.bin --seeds seeds.csv --out-dir b", d);
    assert_eq!(
        fs::read(d.join("a/assignments.csv")).unwrap(),
        fs::read(d.join("b/assignments.csv")).unwrap()
    );
}

#[test]
fn replay_reproduces_every_command_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 10, 10);
    let runs = [
        ("seed", "seed --gt gt.csv --mode sparse --rng-seed 4"),
        (
            "train",
            "train --gt gt.csv --mode sampled --n 30 --epochs 15 --rng-seed 9",
        ),
        ("solve", "solve --weights train/weights.bin --seeds seed/seeds.csv"),
        ("eval", "eval --pred solve/labels.pgm --gt gt.csv"),
        ("errors", "error-map --pred solve/labels.pgm --gt gt.csv"),
    ];
    for (name, line) in runs {
        ok(&format!("{line} --out-dir {name}"), d);
        ok(&format!("replay {name}/run.json --out-dir {name}-replay"), d);
        assert_eq!(
            snapshot(&d.join(name)),
            snapshot(&d.join(format!("{name}-replay"))),
            "{line}"
        );
    }
}

#[test]
fn replay_defaults_to_the_run_directory_and_ignores_the_cwd() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 6, 6);
    ok("seed --gt gt.csv --out-dir seed", d);
    let before = snapshot(&d.join("seed"));
    let elsewhere = TempDir::new().unwrap();
    ok(
        &format!("replay {}", d.join("seed/run.json").display()),
        elsewhere.path(),
    );
    assert_eq!(before, snapshot(&d.join("seed")));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 8, 8);
    for (threads, out) in [(1, "one"), (3, "three")] {
        ok(
            &format!("--threads {threads} train --gt gt.csv --mode pruned --n 20 --epochs 10 --out-dir {out}"),
            d,
        );
    }
    assert_eq!(snapshot(&d.join("one")), snapshot(&d.join("three")));
}

#[test]
fn zero_epochs_emit_initial_weights() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 5, 7);
    ok("train --gt gt.csv --epochs 0 --initial-weight 0.25 --out-dir t", d);
    let (graph, weights) = read_weights(&d.join("t/weights.bin")).unwrap();
    assert_eq!((graph.height(), graph.width()), (5, 7));
    assert!(weights.values().iter().all(|&w| (w - 0.25).abs() < 1e-12));
    let trace = fs::read_to_string(d.join("t/trace.csv")).unwrap();
    assert_eq!(trace, "step,loss,ce,side,reg\n");
}

#[test]
fn trace_and_report_have_the_documented_shape() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 8, 8);
    let out = ok(
        "train --gt gt.csv --seed-mode extended --epochs 12 --no-early-stop --out-dir t",
        d,
    );
    let trace = fs::read_to_string(d.join("t/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,loss,ce,side,reg"));
    assert_eq!(lines.count(), 12);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("t/eval.json")).unwrap()).unwrap();
    for key in ["voi_split", "voi_merge", "voi_total", "arand", "excluded_pixels"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, report);
}

#[test]
fn trained_weights_reload_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 6, 6);
    ok("train --gt gt.csv --epochs 5 --out-dir t", d);
    let bytes = fs::read(d.join("t/weights.bin")).unwrap();
    let (graph, weights) = read_weights(&d.join("t/weights.bin")).unwrap();
    write_weights(&d.join("again.bin"), &graph, &weights).unwrap();
    assert_eq!(bytes, fs::read(d.join("again.bin")).unwrap());
}

#[test]
fn watershed_splits_along_a_ridge() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "ridge.csv", "0,0.1,1,0.1,0\n0,0.2,1,0.2,0\n");
    let seeds = SeedSet::from_pairs(&[(0, 0), (4, 1)]).unwrap();
    write_seeds(&d.join("seeds.csv"), &seeds, 5).unwrap();
    ok("watershed --boundary ridge.csv --seeds seeds.csv --out-dir w", d);
    let labels = read_label_image(&d.join("w/labels.pgm")).unwrap();
    assert_eq!(labels.labels, [0, 0, 0, 1, 1, 0, 0, 0, 1, 1]);
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 4, 4);
    write(d, "seeds.csv", "row,col,label\n0,0,0\n3,3,1\n");

    // A 4×4 lattice has 24 edges.
    assert_eq!(exit_code("train --gt gt.csv --mode sampled --n 25 --out-dir t", d), 2);
    // The default of 1024 samples is too many for it as well.
    assert_eq!(exit_code("train --gt gt.csv --mode sampled --out-dir t", d), 2);
    assert_eq!(
        exit_code("solve --weights w.bin --image gt.csv --seeds seeds.csv --out-dir s", d),
        2
    );

    // Zero weights cut vertex 5 off from both seeds.
    let graph = LatticeGraph::new(4, 4).unwrap();
    let cut = graph
        .edges()
        .iter()
        .map(|&(i, j)| if i == 5 || j == 5 { 0.0 } else { 1.0 })
        .collect();
    write_weights(&d.join("cut.bin"), &graph, &EdgeWeights::new(cut).unwrap()).unwrap();
    assert_eq!(exit_code("solve --weights cut.bin --seeds seeds.csv --out-dir s", d), 3);

    write_weights(&d.join("unit.bin"), &graph, &EdgeWeights::uniform(24, 1.0).unwrap()).unwrap();
    let starved = "solve --weights unit.bin --seeds seeds.csv --solver cg --cg-max-iter-factor 0 --out-dir s";
    assert_eq!(exit_code(starved, d), 4);

    assert_eq!(exit_code("eval --pred missing.pgm --gt gt.csv --out-dir e", d), 5);
    write(d, "bad.bin", "not a weights file");
    assert_eq!(exit_code("solve --weights bad.bin --seeds seeds.csv --out-dir s", d), 5);
}

#[test]
fn threads_env_var_overrides_the_flag() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    halves(d, 4, 4);
    let out = Command::new(env!("CARGO_BIN_EXE_diffwalker"))
        .args("--threads 2 seed --gt gt.csv --out-dir s".split_whitespace())
        .current_dir(d)
        .env("DIFFWALKER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DIFFWALKER_THREADS"));
}

#[test]
fn help_documents_every_subcommand() {
    let tmp = TempDir::new().unwrap();
    let help = String::from_utf8(ok("--help", tmp.path()).stdout).unwrap();
    for name in ["solve", "train", "eval", "seed", "watershed", "error-map", "replay"] {
        assert!(help.contains(name), "{name}");
    }
}
