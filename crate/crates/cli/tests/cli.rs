use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geolift::io;
use geolift::losses::LossReport;
use geolift_cli::commands::{self, GeodesicsSummary, MeshReport};
use geolift_cli::EvalReport;

fn geolift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geolift"))
        .args(args)
        .env_remove("GEOLIFT_OUTPUT_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = geolift(args);
    assert!(
        out.status.success(),
        "geolift {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small cube cloud plus its distance matrix under `root`.
fn prepared_cube(root: &Path, n: &str) -> (PathBuf, PathBuf) {
    let gen = root.join("gen");
    ok(&[
        "gen",
        "--kind",
        "cube",
        "-n",
        n,
        "--seed",
        "3",
        "--out",
        s(&gen),
    ]);
    let cloud = gen.join("cloud.ply");
    let geo = root.join("geo");
    ok(&[
        "geodesics",
        "--cloud",
        s(&cloud),
        "-k",
        "8",
        "--out",
        s(&geo),
    ]);
    (cloud, geo.join("distances.ghdm"))
}

const SMALL_FIT: [&str; 8] = [
    "--set",
    "training.hidden=[24, 24]",
    "--set",
    "training.lifting_dim=6",
    "--set",
    "training.sample_batch=64",
    "--set",
    "eval.samples=400",
];

#[test]
fn gen_writes_labelled_ply_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "gen",
            "--kind",
            "cube",
            "-n",
            "6000",
            "--seed",
            "1",
            "--out",
            s(out),
        ]);
    }
    let bytes = fs::read(a.join("cloud.ply")).unwrap();
    assert_eq!(bytes, fs::read(b.join("cloud.ply")).unwrap());
    let cloud = io::read_ply(&bytes).unwrap();
    assert_eq!(cloud.len(), 6000);
    let mut labels = cloud.labels.unwrap();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels, vec![0, 1, 2, 3, 4, 5]);
    let echo = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(
        echo.contains("kind = \"cube\"") && echo.contains("n = 6000"),
        "{echo}"
    );
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = geolift(&["gen", "--kind", "blob", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blob"));
    let out = geolift(&[
        "geodesics",
        "--cloud",
        "/nonexistent/cloud.ply",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = geolift(&["gen", "--set", "training.bogus=1", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "seed = 4\n[shape]\nkind = \"sphere\"\nn = 50\n").unwrap();
    let out = dir.path().join("out");
    ok(&["gen", "--config", s(&file), "-n", "70", "--out", s(&out)]);
    let cloud = io::read_ply(&fs::read(out.join("cloud.ply")).unwrap()).unwrap();
    assert_eq!(cloud.len(), 70);
    let echo = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(
        echo.contains("seed = 4") && echo.contains("radius = 1.0"),
        "{echo}"
    );
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geolift"))
        .args(["gen", "-n", "10"])
        .env("GEOLIFT_OUTPUT_ROOT", dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("gen").join("cloud.ply").exists());
}

#[test]
fn sphere_geodesics_summary_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&[
        "gen",
        "--kind",
        "sphere",
        "-n",
        "2000",
        "--seed",
        "2",
        "--out",
        s(&gen),
    ]);
    let geo = dir.path().join("geo");
    let stdout = ok(&[
        "geodesics",
        "--cloud",
        s(&gen.join("cloud.ply")),
        "-k",
        "8",
        "--out",
        s(&geo),
    ]);
    let summary: GeodesicsSummary = serde_json::from_str(&stdout).unwrap();
    let pi = std::f64::consts::PI;
    assert_eq!((summary.n, summary.k, summary.bridges_added), (2000, 8, 0));
    assert!(
        summary.max_distance >= 0.95 * pi && summary.max_distance <= 1.10 * pi,
        "max distance {}",
        summary.max_distance
    );
    let bytes = fs::read(geo.join("distances.ghdm")).unwrap();
    assert_eq!(io::write_matrix(&io::read_matrix(&bytes).unwrap()), bytes);
}

#[test]
fn disconnected_cloud_gets_bridges() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..10 {
        text.push_str(&format!("{} 0 0\n", i as f64 * 0.1));
        text.push_str(&format!("{} 0 0\n", 50.0 + i as f64 * 0.1));
    }
    let cloud = dir.path().join("two.xyz");
    fs::write(&cloud, text).unwrap();
    let stdout = ok(&[
        "geodesics",
        "--cloud",
        s(&cloud),
        "-k",
        "3",
        "--out",
        s(&dir.path().join("geo")),
    ]);
    let summary: GeodesicsSummary = serde_json::from_str(&stdout).unwrap();
    assert!(summary.bridges_added > 0);
    assert!(summary.max_distance > 50.0);
}

#[test]
fn fit_trains_and_checkpoint_reproduces_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let (cloud, distances) = prepared_cube(dir.path(), "500");
    let fit = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--cloud",
        s(&cloud),
        "--distances",
        s(&distances),
        "--steps",
        "60",
        "--out",
        s(&fit),
    ];
    args.extend(SMALL_FIT);
    ok(&args);

    let trace: Vec<LossReport> =
        serde_json::from_str(&fs::read_to_string(fit.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace.len(), 60);
    assert!(trace.last().unwrap().total < trace[0].total);

    let (net, sidecar) = commands::load_checkpoint(&fit.join("network.ghnn")).unwrap();
    assert_eq!(sidecar.lifting_dim, 6);
    let again = commands::embed(&net, 400, sidecar.seed);
    let exported =
        io::read_embedding(&fs::read_to_string(fit.join("embedding.txt")).unwrap()).unwrap();
    assert_eq!(exported.dim(), 9);
    for (a, b) in again.as_slice().iter().zip(exported.as_slice()) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn zero_geodesic_weight_still_reports_the_term() {
    let dir = tempfile::tempdir().unwrap();
    let (cloud, distances) = prepared_cube(dir.path(), "300");
    let fit = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--cloud",
        s(&cloud),
        "--distances",
        s(&distances),
        "--steps",
        "5",
        "--lambda-g",
        "0",
        "--out",
        s(&fit),
    ];
    args.extend(SMALL_FIT);
    ok(&args);
    let trace: Vec<LossReport> =
        serde_json::from_str(&fs::read_to_string(fit.join("trace.json")).unwrap()).unwrap();
    for r in trace {
        assert!(r.geodesic > 0.0);
        assert_eq!(r.total, r.chamfer);
    }
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (cloud, distances) = prepared_cube(dir.path(), "300");
    let fit = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--cloud",
        s(&cloud),
        "--distances",
        s(&distances),
        "--steps",
        "30",
        "--lr",
        "1e300",
        "--out",
        s(&fit),
    ];
    args.extend(SMALL_FIT);
    let out = geolift(&args);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn analyze_and_mesh_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (cloud, distances) = prepared_cube(dir.path(), "500");
    let fit = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--cloud",
        s(&cloud),
        "--distances",
        s(&distances),
        "--steps",
        "40",
        "--out",
        s(&fit),
    ];
    args.extend(SMALL_FIT);
    ok(&args);
    let checkpoint = fit.join("network.ghnn");

    let analyze = dir.path().join("analyze");
    let mut args = vec![
        "analyze",
        "--checkpoint",
        s(&checkpoint),
        "--cloud",
        s(&cloud),
        "--distances",
        s(&distances),
        "--out",
        s(&analyze),
    ];
    args.extend(SMALL_FIT);
    let report: EvalReport = serde_json::from_str(&ok(&args)).unwrap();
    assert!(report.units_consistent());
    assert!(report.normal_euc.is_some() && report.normal_geo.is_some());
    assert!(report.geodesic_mre.unwrap() > 0.0);
    assert!(report.chart_purity.unwrap() > 0.0);
    assert_eq!(report.metadata.config_hash.len(), 64);
    for f in [
        "report.json",
        "charts.ply",
        "normals_euc.ply",
        "normals_geo.ply",
        "config.toml",
    ] {
        assert!(analyze.join(f).exists(), "{f}");
    }
    let charts = io::read_ply(&fs::read(analyze.join("charts.ply")).unwrap()).unwrap();
    assert_eq!(charts.len(), 400);

    let mesh = dir.path().join("mesh");
    let mut args = vec![
        "mesh",
        "--checkpoint",
        s(&checkpoint),
        "--cloud",
        s(&cloud),
        "--charts",
        "4",
        "--resolution",
        "6",
        "--out",
        s(&mesh),
        "--set",
        "mesh.steps=10",
        "--set",
        "mesh.samples=2000",
    ];
    args.extend(SMALL_FIT);
    let report: MeshReport = serde_json::from_str(&ok(&args)).unwrap();
    let obj = io::read_obj(&fs::read_to_string(mesh.join("mesh.obj")).unwrap()).unwrap();
    assert_eq!(
        obj.charts().len(),
        report.charts_requested - report.skipped_charts.len()
    );
    assert_eq!(obj.faces.len(), report.faces);
    assert!(report.eval.units_consistent());
}

#[test]
fn repro_runs_named_suites_and_rejects_unknown_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = geolift(&["repro", "pythagoras", "--out", s(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("criterion 4 pythagoras: PASS"));
    assert!(dir.path().join("summary.txt").exists());

    let out = geolift(&["repro", "nope", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("available suites") && err.contains("cube-charts"),
        "{err}"
    );
}
