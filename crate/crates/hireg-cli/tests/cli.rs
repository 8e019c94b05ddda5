//! Binary-level tests for the `hireg` CLI.

use std::path::Path;
use std::process::Command;

use nalgebra::Vector3;

use hireg::localization::AnchorSet;
use hireg::regularization::optimal_mu2_k1;
use hireg::spectral::eig_sym;

fn hireg_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hireg"))
}

fn write(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

fn unit_frame_anchor_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("anchors.csv");
    write(&path, "1,0,0\n0,1,0\n0,0,1\n0,0,0\n");
    path
}

fn measurements_for(anchors: &AnchorSet, points: &[Vector3<f64>]) -> String {
    let mut body = String::from("tick,d1,d2,d3,d4\n");
    for (tick, p) in points.iter().enumerate() {
        let d = anchors.true_distances(p);
        body.push_str(&format!("{tick},{},{},{},{}\n", d[0], d[1], d[2], d[3]));
    }
    body
}

fn unit_frame_anchors() -> AnchorSet {
    AnchorSet::new(vec![
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, 0.0, 0.0),
    ])
    .unwrap()
}

#[test]
fn locate_exact_ranges_give_exact_positions() {
    let dir = tempfile::tempdir().unwrap();
    let anchors_path = unit_frame_anchor_file(dir.path());
    let anchors = unit_frame_anchors();
    let truth = [Vector3::new(0.3, 0.4, 0.2), Vector3::new(0.1, -0.2, 0.5)];
    let meas_path = dir.path().join("ranges.csv");
    write(&meas_path, &measurements_for(&anchors, &truth));

    let output = hireg_bin()
        .args(["locate", "--anchors"])
        .arg(&anchors_path)
        .arg("--measurements")
        .arg(&meas_path)
        .args(["--method", "ls"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("tick"))
        .collect();
    assert_eq!(rows.len(), 2);
    for (row, p) in rows.iter().zip(&truth) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[4], "ls");
        assert_eq!(fields[5], "no");
        for axis in 0..3 {
            let value: f64 = fields[1 + axis].parse().unwrap();
            assert!((value - p[axis]).abs() < 1e-9, "{row}");
        }
    }
}

#[test]
fn locate_marks_rows_uncorrected_until_window_fills() {
    let dir = tempfile::tempdir().unwrap();
    let anchors_path = unit_frame_anchor_file(dir.path());
    let anchors = unit_frame_anchors();
    let truth: Vec<Vector3<f64>> = (0..10).map(|_| Vector3::new(0.2, 0.3, 0.4)).collect();
    let meas_path = dir.path().join("ranges.csv");
    write(&meas_path, &measurements_for(&anchors, &truth));

    let output = hireg_bin()
        .args(["locate", "--anchors"])
        .arg(&anchors_path)
        .arg("--measurements")
        .arg(&meas_path)
        .args(["--method", "hr", "--k", "1", "--mu2", "auto", "--window", "5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let flags: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("tick"))
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(flags.len(), 10);
    assert!(flags[..4].iter().all(|&f| f == "no"));
    assert!(flags[4..].iter().all(|&f| f == "yes"));
}

#[test]
fn locate_echoes_auto_mu2_in_header() {
    let dir = tempfile::tempdir().unwrap();
    let anchors_path = dir.path().join("anchors.csv");
    write(
        &anchors_path,
        "0,0,2.29\n5.30,4.12,1.20\n-0.56,2.01,0.30\n6.00,0,1.20\n",
    );
    let anchors = hireg::localization::reference_experiment_anchors();
    let truth = [Vector3::new(2.0, 1.0, 0.5)];
    let meas_path = dir.path().join("ranges.csv");
    write(&meas_path, &measurements_for(&anchors, &truth));

    let output = hireg_bin()
        .args(["locate", "--anchors"])
        .arg(&anchors_path)
        .arg("--measurements")
        .arg(&meas_path)
        .args(["--method", "hr", "--k", "1", "--mu2", "auto"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let header = stdout.lines().next().unwrap();
    assert!(header.starts_with("# method=hr k=1 mu2="));
    assert!(header.contains("(auto)"));

    let a = anchors.design_matrix();
    let spec = eig_sym(&(a.transpose() * &a)).unwrap();
    let expected =
        optimal_mu2_k1(spec.largest(), spec.second_smallest(), spec.smallest()).unwrap();
    let echoed: f64 = header
        .split("mu2=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((echoed - expected).abs() <= 1e-12 * expected);
}

#[test]
fn analyze_flags_coplanar_anchors() {
    let dir = tempfile::tempdir().unwrap();
    let anchors_path = dir.path().join("anchors.csv");
    write(&anchors_path, "0,0,1\n6,0,1\n6,4,1\n0,4,1\n");
    let output = hireg_bin()
        .args(["analyze", "--anchors"])
        .arg(&anchors_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(doc["report"]["rank"], 2);
    assert!(doc["warnings"][0]
        .as_str()
        .unwrap()
        .contains("rank 2"));
}

#[test]
fn simulate_rejects_malformed_config_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    write(&config_path, "{\n  \"anchors\": [[0,0,0]],\n  \"oops\n}\n");
    let output = hireg_bin()
        .args(["simulate", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("line"), "stderr: {stderr}");
}

#[test]
fn sweep_grid_minimum_matches_first_order_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.json");
    write(
        &config_path,
        r#"{
  "anchors": [[0.0,0.0,1.0],[6.0,0.0,1.2],[6.0,4.0,0.8],[0.0,4.0,1.1]],
  "k": [0, 1],
  "grid": {"count": 201}
}"#,
    );
    let output = hireg_bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let body = std::fs::read_to_string(dir.path().join("sweep.sweep.csv")).unwrap();

    let anchors = AnchorSet::new(vec![
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(6.0, 0.0, 1.2),
        Vector3::new(6.0, 4.0, 0.8),
        Vector3::new(0.0, 4.0, 1.1),
    ])
    .unwrap();
    let a = anchors.design_matrix();
    let spec = eig_sym(&(a.transpose() * &a)).unwrap();
    let expected =
        optimal_mu2_k1(spec.largest(), spec.second_smallest(), spec.smallest()).unwrap();
    let grid_step = (spec.second_smallest() - spec.smallest()) / 200.0;

    let best_k1 = body
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse::<usize>().unwrap(),
                f[1].parse::<f64>().unwrap(),
                f[2].parse::<f64>().unwrap(),
            )
        })
        .filter(|(k, _, _)| *k == 1)
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .unwrap();
    assert!(
        (best_k1.1 - expected).abs() <= grid_step,
        "grid argmin {} vs closed form {expected}",
        best_k1.1
    );
}

#[test]
fn sweep_single_point_grid_emits_single_row_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep1.json");
    write(
        &config_path,
        r#"{
  "anchors": [[0.0,0.0,1.0],[6.0,0.0,1.2],[6.0,4.0,0.8],[0.0,4.0,1.1]],
  "k": [1],
  "grid": {"count": 1}
}"#,
    );
    let output = hireg_bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let body = std::fs::read_to_string(dir.path().join("sweep1.sweep.csv")).unwrap();
    assert_eq!(body.trim_end().lines().count(), 2);
}
