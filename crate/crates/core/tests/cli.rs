use std::fs;
use std::path::Path;

use steklov_match::cli::{run, ENERGY_FILE, MANIFEST_FILE, MAP_ST_FILE, MAP_TS_FILE};
use steklov_match::matching::VertexMap;
use steklov_match::mesh::io::{save_landmarks, save_mesh};
use steklov_match::mesh::shapes;

fn write_pair(dir: &Path) -> Vec<usize> {
    let mesh = shapes::bumpy_sphere(8, 0.08);
    let lm = shapes::sphere_landmarks(&mesh, 6);
    save_mesh(&mesh, dir.join("a.off")).unwrap();
    save_landmarks(&lm, dir.join("a.txt")).unwrap();
    lm
}

fn match_args(dir: &Path, out: &str) -> Vec<String> {
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    vec![
        "steklov-match".into(),
        "match".into(),
        "--source".into(),
        p("a.off"),
        "--target".into(),
        p("a.off"),
        "--source-landmarks".into(),
        p("a.txt"),
        "--target-landmarks".into(),
        p("a.txt"),
        "--out-dir".into(),
        p(out),
        "--n-lb".into(),
        "30".into(),
        "--n-ds".into(),
        "5".into(),
    ]
}

#[test]
fn match_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let lm = write_pair(dir.path());
    let mut args = match_args(dir.path(), "run1");
    args.push("--distances".into());
    assert_eq!(run(&args), 0);
    let out = dir.path().join("run1");
    let map = VertexMap::load(out.join(MAP_ST_FILE)).unwrap();
    assert!(map.distances().is_some());
    assert!(map.identity_fraction() > 0.99);
    for &l in &lm {
        assert_eq!(map.get(l), l);
    }
    let energy = fs::read_to_string(out.join(ENERGY_FILE)).unwrap();
    assert!(energy.starts_with("iteration,g_size,"));
    assert_eq!(energy.lines().count(), 1 + 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    let opts = &manifest["config"]["options"];
    for key in ["r_f", "wedges", "n_lb", "n_ds", "weights", "k_step", "mode", "init", "steklov_mass"] {
        assert!(!opts[key].is_null(), "manifest lacks {key}");
    }
    assert_eq!(opts["n_lb"], 30);
    assert!(manifest["gram"]["warning"].is_boolean());

    let mut again = match_args(dir.path(), "run2");
    again.push("--distances".into());
    assert_eq!(run(&again), 0);
    let run2 = dir.path().join("run2");
    for f in [MAP_ST_FILE, MAP_TS_FILE, ENERGY_FILE] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(run2.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "rf = 1.5\nk-step = 15\n").unwrap();
    let mut args = match_args(dir.path(), "out");
    args.extend(["--config".into(), cfg.to_string_lossy().into_owned()]);
    // The file's r_f is invalid; rejected before anything is loaded.
    assert_eq!(run(&args), 2);
    args.extend(["--rf".into(), "0.4".into(), "--threads".into(), "1".into()]);
    assert_eq!(run(&args), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["config"]["options"]["r_f"], 0.4);
    assert_eq!(manifest["config"]["options"]["k_step"], 15);
    assert_eq!(manifest["config"]["threads"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let mut args = match_args(dir.path(), "out");
    args.extend(["--rf".into(), "1.5".into()]);
    assert_eq!(run(&args), 2);

    let mut args = match_args(dir.path(), "out");
    args[7] = dir.path().join("missing.txt").to_string_lossy().into_owned();
    assert_eq!(run(&args), 3);

    fs::write(dir.path().join("bad.off"), "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    let bad = dir.path().join("bad.off").to_string_lossy().into_owned();
    let out = dir.path().join("e").to_string_lossy().into_owned();
    assert_eq!(run(["steklov-match", "eigs", "--mesh", &bad, "--out-dir", &out]), 3);
    assert_eq!(run(["steklov-match", "frobnicate"]), 2);
}

#[test]
fn eigs_on_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::annulus(0.5, 1.0, 0.08);
    let path = dir.path().join("annulus.obj");
    save_mesh(&mesh, &path).unwrap();
    let out = dir.path().join("eigs");
    let code = run([
        "steklov-match",
        "eigs",
        "--mesh",
        path.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--n-lb",
        "8",
        "--n-ds",
        "4",
    ]);
    assert_eq!(code, 0);
    let steklov = fs::read_to_string(out.join("steklov.csv")).unwrap();
    // Header plus four values on each of the two circles.
    assert_eq!(steklov.lines().count(), 1 + 8);
    let outer_first: Vec<f64> = steklov
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1] == "0").then(|| f[2].parse().unwrap())
        })
        .collect();
    // Lowest value on either circle: 1/(ρ ln(1/ρ)) inside, 1/ln(1/ρ) outside.
    let exact = [1.0 / (0.5 * 2f64.ln()), 1.0 / 2f64.ln()];
    for v in outer_first {
        assert!(exact.iter().any(|e| (v - e).abs() / e < 0.05), "sigma {v}");
    }
    assert!(out.join("laplacian.csv").exists());
    assert!(out.join("basis.csv").exists());
    assert!(out.join("gram.csv").exists());
}

#[test]
fn eval_scores_maps() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::icosphere(4);
    let n = mesh.num_vertices();
    save_mesh(&mesh, dir.path().join("m.off")).unwrap();
    VertexMap::new((0..n).collect()).save(dir.path().join("gt.txt"), false).unwrap();
    let mut shifted: Vec<usize> = (0..n).collect();
    shifted.swap(0, 1);
    VertexMap::new(shifted).save(dir.path().join("map.txt"), false).unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let code = run([
        "steklov-match".to_string(),
        "eval".into(),
        "--map".into(),
        p("map.txt"),
        "--ground-truth".into(),
        p("gt.txt"),
        "--target".into(),
        p("m.off"),
        "--source".into(),
        p("m.off"),
        "--out".into(),
        p("curve.csv"),
    ]);
    assert_eq!(code, 0);
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 27);
    assert!(curve.lines().last().unwrap().ends_with(",100.0000"));

    // Ground truth shorter than the map.
    VertexMap::new(vec![0, 1]).save(dir.path().join("short.txt"), false).unwrap();
    let code = run([
        "steklov-match".to_string(),
        "eval".into(),
        "--map".into(),
        p("map.txt"),
        "--ground-truth".into(),
        p("short.txt"),
        "--target".into(),
        p("m.off"),
        "--out".into(),
        p("curve2.csv"),
    ]);
    assert_eq!(code, 3);
}
