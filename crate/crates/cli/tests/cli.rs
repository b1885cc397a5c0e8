use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dg3pd_core::io::{read_metrics_csv, read_pfm, write_mask, write_pfm};
use dg3pd_core::{Grid, Mask};
use tempfile::TempDir;

fn dg3pd<A: AsRef<OsStr>>(args: &[A]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dg3pd")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// The 64x64 scene with the default mask, written under `dir/scene`.
fn scene(dir: &Path, extra: &[&str]) -> PathBuf {
    let at = dir.join("scene");
    let mut args = vec!["make-scene".to_string(), "--output".into(), s(&at), "--seed".into(), "42".into()];
    args.extend(extra.iter().map(|a| a.to_string()));
    ok(&dg3pd(&args));
    at.join("scene.cfg")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn zero_input_gives_zero_outputs() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("zero.pfm");
    write_pfm(&input, &Grid::zeros(16, 16)).unwrap();
    let out_dir = dir.path().join("out");
    ok(&dg3pd(&["decompose", "--input", &s(&input), "--output", &s(&out_dir), "--iterations", "5"]));
    for name in ["u.pfm", "v.pfm", "eps.pfm"] {
        let g: Grid = read_pfm(out_dir.join(name)).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0), "{name}");
    }
    assert_eq!(read_metrics_csv(out_dir.join("metrics.csv")).unwrap().len(), 5);
}

#[test]
fn missing_input_leaves_no_files() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let res = dg3pd(&["decompose", "--input", &s(&dir.path().join("nope.pfm")), "--output", &s(&out_dir)]);
    assert_eq!(res.status.code(), Some(4));
    assert!(!out_dir.exists());

    let res = dg3pd(&["decompose", "--output", &s(&out_dir)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    for args in [
        &["--beta4", "-0.1"][..],
        &["--theta", "1.5"],
        &["--no_such_key", "3"],
        &["--tvl2_rho", "0"],
    ] {
        let mut full = vec!["decompose".to_string(), "--config".into(), s(&cfg), "--output".into(), s(&out_dir)];
        full.extend(args.iter().map(|a| a.to_string()));
        let res = dg3pd(&full);
        assert_eq!(res.status.code(), Some(2), "{args:?}");
        assert!(!out_dir.exists());
    }
    // inpaint needs a mask; the mask must match the input.
    let input = s(&cfg.with_file_name("degraded.pfm"));
    assert_eq!(dg3pd(&["inpaint", "--input", &input, "--output", &s(&out_dir)]).status.code(), Some(2));
    let small = dir.path().join("small.pgm");
    write_mask(&small, &Mask::empty(8, 8)).unwrap();
    let res = dg3pd(&["inpaint", "--input", &input, "--mask", &s(&small), "--output", &s(&out_dir)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn fixture_metrics_have_one_row_per_iteration() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    ok(&dg3pd(&["decompose", "--config", &s(&cfg), "--output", &s(&out_dir), "--trace"]));
    let rows = read_metrics_csv(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().enumerate().all(|(i, r)| r.iteration == i + 1));
    let text = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(text.starts_with("#schema:dg3pd-metrics-v1\n"));
    for name in ["u.pgm", "v.pgm", "eps.pgm", "e_pyramid/manifest.txt"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
}

#[test]
fn analytic_unity_report_passes() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    ok(&dg3pd(&["analyze-filters", "--output", &s(&out_dir), "--rows", "32", "--cols", "48"]));
    let rows = csv_rows(&out_dir.join("report.csv"));
    let get = |k: &str| rows.iter().find(|r| r[0] == k).map(|r| r[1].clone());
    assert_eq!(get("unity").as_deref(), Some("PASS"));
    assert_eq!(get("beta1").unwrap().parse::<f64>().unwrap(), 0.04);
    assert!((get("beta2").unwrap().parse::<f64>().unwrap() - 0.3).abs() < 1e-12);
    assert!(get("empirical_unity_mse").is_none());
    assert!(out_dir.join("spectra/u_phi_re.pfm").is_file());
    assert!(out_dir.join("spectra/g_psi_dual3_logmag.pgm").is_file());
}

#[test]
fn empirical_unity_mse_is_one_float() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    ok(&dg3pd(&["analyze-filters", "--config", &s(&cfg), "--output", &s(&out_dir), "--iterations", "40"]));
    let rows = csv_rows(&out_dir.join("report.csv"));
    let mse: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "empirical_unity_mse").collect();
    assert_eq!(mse.len(), 1);
    assert_eq!(mse[0].len(), 2);
    let v: f64 = mse[0][1].parse().unwrap();
    assert!(v.is_finite() && v >= 0.0);
    assert!(out_dir.join("spectra/empirical_bp3_re.pfm").is_file());
}

#[test]
fn zero_input_spectrum_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("zero.pfm");
    write_pfm(&input, &Grid::zeros(16, 16)).unwrap();
    let out_dir = dir.path().join("out");
    let res = dg3pd(&["analyze-filters", "--input", &s(&input), "--output", &s(&out_dir), "--iterations", "3"]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("degenerate spectrum"));
    assert!(!out_dir.exists());
}

#[test]
fn compare_is_deterministic_with_one_row_per_method() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &[]);
    let external = format!("degraded:{}", s(&cfg.with_file_name("degraded.pfm")));
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        ok(&dg3pd(&[
            "compare",
            "--config",
            &s(&cfg),
            "--output",
            &s(&out_dir),
            "--tvl2_iterations",
            "50",
            "--external",
            &external,
        ]));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let table = fs::read(a.join("compare.csv")).unwrap();
    assert_eq!(table, fs::read(b.join("compare.csv")).unwrap());
    let rows = csv_rows(&a.join("compare.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["dg3pd", "tvl2", "degraded"]);
    // The texture region comes from the scene, so every column is filled.
    assert!(rows.iter().all(|r| r.iter().all(|x| !x.is_empty())));
    assert_eq!(read_metrics_csv(a.join("tvl2_metrics.csv")).unwrap().len(), 50);
    assert_eq!(read_metrics_csv(a.join("dg3pd_metrics.csv")).unwrap().len(), 200);
}

#[test]
fn trace_writes_quarter_snapshots() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &["--sigma", "10", "--mask_kind", "blobs", "--mask_fraction", "0.05", "--seed", "1"]);
    let out_dir = dir.path().join("out");
    ok(&dg3pd(&[
        "inpaint",
        "--config",
        &s(&cfg),
        "--output",
        &s(&out_dir),
        "--preset",
        "fingerprint",
        "--patch_size",
        "9",
        "--trace",
    ]));
    for p in [25, 50, 75, 100] {
        assert!(out_dir.join(format!("trace/texture_{p:03}.pgm")).is_file(), "{p}");
    }
    let roi = dg3pd_core::io::read_mask(out_dir.join("roi.pgm")).unwrap();
    assert!(roi.count() > 0);
    for name in ["restored.pfm", "restored.pgm", "texture.pfm", "inpaint_mask.pgm", "scores.csv"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
}

#[test]
fn empty_mask_inpaint_matches_decompose() {
    let dir = TempDir::new().unwrap();
    let cfg = scene(dir.path(), &["--sigma", "20"]);
    let empty = dir.path().join("empty.pgm");
    write_mask(&empty, &Mask::empty(64, 64)).unwrap();
    let input = s(&cfg.with_file_name("noisy.pfm"));
    let (dec, inp) = (dir.path().join("dec"), dir.path().join("inp"));
    ok(&dg3pd(&["decompose", "--input", &input, "--output", &s(&dec), "--iterations", "40"]));
    ok(&dg3pd(&["inpaint", "--input", &input, "--mask", &s(&empty), "--output", &s(&inp), "--iterations", "40"]));
    for name in ["u.pfm", "v.pfm", "eps.pfm"] {
        assert_eq!(fs::read(dec.join(name)).unwrap(), fs::read(inp.join(name)).unwrap(), "{name}");
    }
    // No targets: the restored image is u plus the denoised texture.
    let u: Grid = read_pfm(inp.join("u.pfm")).unwrap();
    let t: Grid = read_pfm(inp.join("texture.pfm")).unwrap();
    let r: Grid = read_pfm(inp.join("restored.pfm")).unwrap();
    for k in 0..u.len() {
        let want = (u.as_slice()[k] as f32 + t.as_slice()[k] as f32) as f64;
        assert!((r.as_slice()[k] - want).abs() <= 1e-4 * want.abs().max(1.0));
    }
}

#[test]
fn make_scene_repeats_and_diagnostics_run() {
    let dir = TempDir::new().unwrap();
    let a = scene(&dir.path().join("a"), &[]);
    let b = scene(&dir.path().join("b"), &[]);
    for name in ["clean.pfm", "noisy.pfm", "mask.pgm", "texture_region.pgm"] {
        assert_eq!(fs::read(a.with_file_name(name)).unwrap(), fs::read(b.with_file_name(name)).unwrap());
    }
    let out_dir = dir.path().join("diag");
    ok(&dg3pd(&["diagnostics", "--config", &s(&a), "--output", &s(&out_dir), "--iterations", "30"]));
    let summary = csv_rows(&out_dir.join("summary.csv"));
    assert_eq!(summary.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["u", "v", "eps", "e", "e1", "e2"]);
    assert!(!csv_rows(&out_dir.join("qq.csv")).is_empty());
    assert!(out_dir.join("e1.pfm").is_file());
}

#[test]
fn usage_errors() {
    assert_eq!(dg3pd::<&str>(&[]).status.code(), Some(2));
    assert_eq!(dg3pd(&["reconstruct"]).status.code(), Some(2));
    assert!(dg3pd(&["inpaint", "--help"]).status.success());
}
