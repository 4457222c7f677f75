//! End-to-end runs of the `rdpg` binary against temp directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rdpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdpg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_four_cycle(path: &Path) {
    fs::write(path, "# 4-cycle\n0 1\n1 2\n2 3\n3 0\n").unwrap();
}

fn spec_json(path: &Path) {
    fs::write(
        path,
        r#"{"nu": [[0.3, 0.3], [0.3, 0.6], [0.6, 0.3]], "pi": [0.3, 0.3, 0.4], "rho": 1.0}"#,
    )
    .unwrap();
}

#[test]
fn embed_four_cycle_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.txt");
    write_four_cycle(&graph);

    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let res = rdpg(&[
            "embed",
            "--input",
            graph.to_str().unwrap(),
            "--method",
            "ase",
            "--d",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv1 = fs::read(out1.join("embedding.csv")).unwrap();
    let csv2 = fs::read(out2.join("embedding.csv")).unwrap();
    assert!(!csv1.is_empty());
    assert_eq!(csv1, csv2);

    let sidecar: rdpg_cli::Sidecar =
        serde_json::from_str(&fs::read_to_string(out1.join("embedding.json")).unwrap()).unwrap();
    assert_eq!(sidecar.method, "ASE");
    assert_eq!(sidecar.d, 2);
    assert_eq!(sidecar.n, 4);
}

#[test]
fn malformed_edge_list_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.txt");
    fs::write(&graph, "0 1\noops\n").unwrap();
    let res = rdpg(&[
        "embed",
        "--input",
        graph.to_str().unwrap(),
        "--method",
        "ase",
        "--d",
        "1",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn sample_then_embed_auto_finds_planted_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    // Near-orthogonal blocks so the spectrum has a clean two-value head.
    fs::write(
        &spec,
        r#"{"nu": [[0.65, 0.05], [0.05, 0.65]], "pi": [0.5, 0.5], "rho": 1.0}"#,
    )
    .unwrap();
    let sample_out = dir.path().join("sample");
    let res = rdpg(&[
        "sample",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "300",
        "--seed",
        "5",
        "--out",
        sample_out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let embed_out = dir.path().join("embed");
    let res = rdpg(&[
        "embed",
        "--input",
        sample_out.join("edges.txt").to_str().unwrap(),
        "--method",
        "ose-a",
        "--auto",
        "--qmax",
        "20",
        "--out",
        embed_out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let sidecar: rdpg_cli::Sidecar =
        serde_json::from_str(&fs::read_to_string(embed_out.join("embedding.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar.d, 2);
    assert_eq!(sidecar.method, "OSE_A");

    let dims_out = dir.path().join("dims");
    let res = rdpg(&[
        "dimselect",
        "--input",
        sample_out.join("edges.txt").to_str().unwrap(),
        "--qmax",
        "20",
        "--out",
        dims_out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("selected d = 2"));
}

#[test]
fn simulate_is_rerun_identical_and_prefix_stable() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{
            "input": {"Sbm": {"nu": [[0.3, 0.3], [0.3, 0.6], [0.6, 0.3]], "pi": [0.3, 0.3, 0.4], "rho": 1.0}},
            "n_values": [80],
            "replicates": 3,
            "seed": 17,
            "estimators": ["ASE", "OSE_A"],
            "metrics": ["SSE"],
            "alpha": 0.05,
            "d": {"fixed": 2}
        }"#,
    )
    .unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let res = rdpg(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(
        fs::read(out1.join("replicates.csv")).unwrap(),
        fs::read(out2.join("replicates.csv")).unwrap()
    );
    assert!(out1.join("summary.csv").exists());
    assert!(out1.join("manifest.json").exists());

    // The first three replicates of a longer run match the short run.
    let config5 = dir.path().join("config5.json");
    fs::write(
        &config5,
        fs::read_to_string(&config)
            .unwrap()
            .replace("\"replicates\": 3", "\"replicates\": 5"),
    )
    .unwrap();
    let out5 = dir.path().join("c");
    let res = rdpg(&[
        "simulate",
        "--config",
        config5.to_str().unwrap(),
        "--out",
        out5.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let short = fs::read_to_string(out1.join("replicates.csv")).unwrap();
    let long = fs::read_to_string(out5.join("replicates.csv")).unwrap();
    for line in short.lines().skip(1) {
        assert!(long.contains(line), "missing prefix row: {line}");
    }
}

#[test]
fn ci_width_shrinks_with_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"nu": [[0.5]], "pi": [1.0], "rho": 1.0}"#).unwrap();
    let sample_out = dir.path().join("sample");
    let res = rdpg(&[
        "sample",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "200",
        "--seed",
        "2",
        "--out",
        sample_out.to_str().unwrap(),
    ]);
    assert!(res.status.success());

    let widths = |alpha: &str, out: &Path| -> Vec<f64> {
        let res = rdpg(&[
            "ci",
            "--input",
            sample_out.join("edges.txt").to_str().unwrap(),
            "--alpha",
            alpha,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        fs::read_to_string(out.join("x_intervals.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let fields: Vec<&str> = line.split(',').collect();
                fields[3].parse::<f64>().unwrap() - fields[2].parse::<f64>().unwrap()
            })
            .collect()
    };
    let wide = widths("0.05", &dir.path().join("w"));
    let narrow = widths("0.5", &dir.path().join("n"));
    assert_eq!(wide.len(), 200);
    for (w, n) in wide.iter().zip(narrow.iter()) {
        assert!(w > n, "alpha=0.05 width {w} should exceed alpha=0.5 width {n}");
    }
}

#[test]
fn chernoff_outputs_rates_and_ratio_grid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    spec_json(&spec);
    let out = dir.path().join("rates");
    let res = rdpg(&[
        "chernoff",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "800",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rates = fs::read_to_string(out.join("rho_star.csv")).unwrap();
    assert_eq!(rates.lines().count(), 5);
    let value_of = |kind: &str| -> f64 {
        rates
            .lines()
            .find(|l| l.starts_with(kind))
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value_of("OSE_A,") >= value_of("ASE,"));
    assert!(value_of("OSE_L,") >= value_of("LSE,"));

    let grid_out = dir.path().join("grid");
    let res = rdpg(&[
        "chernoff",
        "--family",
        "two-block",
        "--p-steps",
        "4",
        "--r-steps",
        "4",
        "--n",
        "500",
        "--num",
        "ose-a",
        "--den",
        "ose-a",
        "--out",
        grid_out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(grid_out.join("ratio.csv")).unwrap();
    for line in table.lines().skip(1) {
        let ratio = line.split(',').nth(2).unwrap();
        if !ratio.is_empty() {
            let ratio: f64 = ratio.parse().unwrap();
            assert!((ratio - 1.0).abs() < 1e-12, "self-ratio {ratio}");
        }
    }
}

#[test]
fn estimate_writes_covariance_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    spec_json(&spec);
    let out = dir.path().join("est");
    let res = rdpg(&[
        "estimate",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("covariance_reports.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);
    let g11 = parsed[0]["report"]["g_inverse"][0][0].as_f64().unwrap();
    assert!((g11 - 3.220559).abs() < 1e-3);
}
