//! End-to-end tests of the `kms` binary and its file formats.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kms_core::grid::{GridSpec, Label, LabelGrid};
use kms_core::harness::io::{read_label_grid, write_label_grid};
use tempfile::tempdir;

fn kms(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kms"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn cluster_on_one_point_reports_one_cluster() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("pts.csv"), "x,y\n1.5,2.5\n").unwrap();
    let output = kms(&["cluster", "--input", "pts.csv", "--k", "1", "--out", "run"], dir.path());
    assert_ok(&output);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("run.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cluster_count"], 1);
    assert_eq!(stats["converged"], true);
    for suffix in ["run.labels.csv", "run.labels.pgm", "run.labels.json", "run.png"] {
        assert!(dir.path().join(suffix).exists(), "{suffix} missing");
    }
}

#[test]
fn cluster_csv_round_trip_preserves_instance_count() {
    let dir = tempdir().unwrap();
    let mut csv = String::from("x,y\n");
    for i in 0..40 {
        // Two blobs, with a duplicated point to exercise cell collapsing.
        let (x, y) = if i % 2 == 0 { (i as f64 * 0.01, 0.0) } else { (5.0, i as f64 * 0.01) };
        csv.push_str(&format!("{x},{y}\n"));
    }
    csv.push_str("5.0,0.01\n");
    fs::write(dir.path().join("pts.csv"), &csv).unwrap();
    let output = kms(
        &["cluster", "--input", "pts.csv", "--k", "4", "--gamma", "10", "--out", "run"],
        dir.path(),
    );
    assert_ok(&output);

    let labels = fs::read_to_string(dir.path().join("run.labels.csv")).unwrap();
    let mut lines = labels.lines();
    assert_eq!(lines.next(), Some("x,y,cluster"));
    assert_eq!(lines.count(), 41, "one output row per input instance");
}

#[test]
fn stats_cluster_count_matches_png_colors() {
    let dir = tempdir().unwrap();
    let mut csv = String::from("x,y\n");
    for blob in 0..5 {
        for i in 0..4 {
            csv.push_str(&format!("{},{}\n", blob as f64 * 10.0 + i as f64 * 0.1, 0.0));
        }
    }
    fs::write(dir.path().join("pts.csv"), &csv).unwrap();
    let output = kms(
        &["cluster", "--input", "pts.csv", "--k", "9", "--gamma", "1", "--out", "run"],
        dir.path(),
    );
    assert_ok(&output);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("run.stats.json")).unwrap()).unwrap();
    let cluster_count = stats["cluster_count"].as_u64().unwrap() as usize;

    let image = image::open(dir.path().join("run.png")).unwrap().to_rgb8();
    let non_white: BTreeSet<[u8; 3]> =
        image.pixels().map(|p| p.0).filter(|&c| c != [255, 255, 255]).collect();
    assert_eq!(non_white.len(), cluster_count);
}

#[test]
fn denoise_erases_small_clusters_via_files() {
    let dir = tempdir().unwrap();
    // Clusters of sizes 3 and 1 on one row each.
    let spec = GridSpec::unit(4, 2).unwrap();
    let cells = vec![0, 0, 0, -1, 1, -1, -1, -1]
        .into_iter()
        .map(Label::from_raw)
        .collect();
    let grid = LabelGrid::from_cells(spec, cells).unwrap();
    write_label_grid(&dir.path().join("in.pgm"), &grid).unwrap();

    let output =
        kms(&["denoise", "--input", "in.pgm", "--tau", "1", "--out", "clean"], dir.path());
    assert_ok(&output);
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["removed_clusters"], 1);
    assert_eq!(report["remaining_cells"], 3);

    let cleaned = read_label_grid(&dir.path().join("clean.labels.pgm")).unwrap();
    assert_eq!(cleaned.distinct_labels(), vec![Label::from_raw(0)]);
}

#[test]
fn components_counts_connected_blobs() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("pts.csv"), "x,y\n0,0\n0,1\n9,9\n").unwrap();
    let output = kms(&["components", "--input", "pts.csv", "--gamma", "1"], dir.path());
    assert_ok(&output);
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "2");
}

#[test]
fn cluster_accepts_image_input_and_b2() {
    let dir = tempdir().unwrap();
    // 30x20 image with two dark blobs.
    let mut image = image::GrayImage::from_pixel(30, 20, image::Luma([255u8]));
    for y in 2..5 {
        for x in 2..5 {
            image.put_pixel(x, y, image::Luma([0]));
        }
    }
    for y in 12..15 {
        for x in 22..26 {
            image.put_pixel(x, y, image::Luma([10]));
        }
    }
    image.save(dir.path().join("in.png")).unwrap();

    let output = kms(
        &["cluster", "--input", "in.png", "--k", "5", "--se", "b2", "--out", "img"],
        dir.path(),
    );
    assert_ok(&output);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("img.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cluster_count"], 2);
}

#[test]
fn cluster_supports_custom_se_files_and_pad_and_wrap() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("se.txt"), "0 0 0\n0 1 0\n0 -1 0\n1 0 0\n-1 0 0\n").unwrap();
    fs::write(dir.path().join("pts.csv"), "x,y\n0,0\n3,0\n").unwrap();

    // Under wrap without padding, the row ends fold together: columns 0 and
    // 3 of the 4-wide grid touch, giving one cluster even at delta 1.
    let output = kms(
        &[
            "cluster", "--input", "pts.csv", "--k", "2", "--se", "se.txt", "--boundary", "wrap",
            "--out", "wrapped",
        ],
        dir.path(),
    );
    assert_ok(&output);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("wrapped.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cluster_count"], 1);

    // Padding separates them again.
    let output = kms(
        &[
            "cluster", "--input", "pts.csv", "--k", "2", "--se", "se.txt", "--boundary", "wrap",
            "--pad", "2", "--out", "padded",
        ],
        dir.path(),
    );
    assert_ok(&output);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("padded.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cluster_count"], 2);
}

#[test]
fn bench_writes_schema_stable_csv() {
    let dir = tempdir().unwrap();
    let spec = serde_json::json!({
        "grids": [{"width": 24, "height": 24, "instances": 60}],
        "ks": [2, 4],
        "repetitions": 1,
        "seed": 11,
        "algorithms": ["kms-seq", "kmeans-par"],
    });
    fs::write(dir.path().join("spec.json"), spec.to_string()).unwrap();
    let output =
        kms(&["bench", "--spec", "spec.json", "--out", "records.csv"], dir.path());
    assert_ok(&output);
    let text = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,engine,width,height,instances,k,repetition,wall_time_s,cluster_count,converged")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn render_round_trips_from_pgm() {
    let dir = tempdir().unwrap();
    let spec = GridSpec::unit(3, 1).unwrap();
    let cells = vec![0, -1, 1].into_iter().map(Label::from_raw).collect();
    write_label_grid(&dir.path().join("g.pgm"), &LabelGrid::from_cells(spec, cells).unwrap())
        .unwrap();
    let output = kms(&["render", "--input", "g.pgm", "--out", "g.png"], dir.path());
    assert_ok(&output);
    let image = image::open(dir.path().join("g.png")).unwrap().to_rgb8();
    let distinct: BTreeSet<[u8; 3]> = image.pixels().map(|p| p.0).collect();
    assert_eq!(distinct.len(), 3);
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let dir = tempdir().unwrap();
    let output = kms(&["cluster", "--input", "missing.csv", "--k", "1", "--out", "x"], dir.path());
    assert!(!output.status.success());
    assert!(!output.stderr.is_empty());

    fs::write(dir.path().join("pts.csv"), "x,y\n1,1\n").unwrap();
    let output = kms(
        &["cluster", "--input", "pts.csv", "--k", "0", "--out", "x"],
        dir.path(),
    );
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("invalid input"));
}
