//! End-to-end runs of the `helicity` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn helicity(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helicity"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: impl AsRef<Path>) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(path: impl AsRef<Path>, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|x| x.unwrap()[i].parse().unwrap())
        .collect()
}

#[test]
fn mesh_writes_tetrahedra_and_report() {
    let d = tempfile::tempdir().unwrap();
    let out = helicity(&["mesh", "--res", "2,8,16", "--report"], d.path());
    assert_eq!(out.status.code(), Some(0));
    let vtk = std::fs::read_to_string(d.path().join("mesh.vtk")).unwrap();
    let types = vtk.split("CELL_TYPES").nth(1).unwrap();
    assert!(types.lines().skip(1).take(5).all(|l| l.trim() == "10"));
    let geo = json(d.path().join("geometry.json"));
    for key in ["area", "volume", "min_radius"] {
        assert!(geo[key].as_f64().unwrap() > 0.0, "{key}");
    }
}

#[test]
fn folded_surface_is_a_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    let s = r#"{"n_fp":1,"modes":[[0,0],[1,0],[2,0],[3,0]],"r_cos":[1.0,0.3,-0.12,0.08],"z_sin":[0.0,0.3,-0.08,0.12]}"#;
    std::fs::write(d.path().join("bean.json"), s).unwrap();
    let out = helicity(
        &["mesh", "--surface", "bean.json", "--res", "2,8,16"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inverted cell"));
}

#[test]
fn input_errors_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        helicity(&["helicity", "--surface", "missing.json"], d.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        helicity(&["helicity", "--res", "2,8"], d.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        helicity(&["helicity", "--res", "1,8,16"], d.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(helicity(&["frobnicate"], d.path()).status.code(), Some(1));
    std::fs::write(d.path().join("bad.json"), "{\"n_fp\": 0}").unwrap();
    assert_eq!(
        helicity(&["helicity", "--surface", "bad.json"], d.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn axisymmetric_helicity_vanishes() {
    let d = tempfile::tempdir().unwrap();
    let out = helicity(
        &[
            "helicity",
            "--surface",
            "builtin:circular",
            "--res",
            "2,8,32",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(d.path().join("helicity.json"));
    assert!(r["h_l2"].as_f64().unwrap().abs() <= 1e-6);
    assert!(d.path().join("fields.vtk").exists());
}

#[test]
fn twisted_helicity_formulas_agree_and_output_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = helicity(&["helicity", "--res", "4,16,48", "--out", sub], d.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(d.path().join("a/helicity.json")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b/helicity.json")).unwrap());
    let r = json(d.path().join("a/helicity.json"));
    let (hl, hc) = (r["h_l2"].as_f64().unwrap(), r["h_circ"].as_f64().unwrap());
    assert!((hl - hc).abs() <= 0.1 * hl.abs(), "{hl} vs {hc}");
}

#[test]
fn convergence_sweep_orders() {
    let d = tempfile::tempdir().unwrap();
    let out = helicity(
        &[
            "convergence",
            "--surface",
            "builtin:circular",
            "--res",
            "2,8,24",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(d.path().join("convergence.csv")).len(), 1);
    assert!(!String::from_utf8_lossy(&out.stdout).contains("order"));

    let args = [
        "convergence",
        "--surface",
        "builtin:circular",
        "--res",
        "2,8,24",
        "--res",
        "3,12,36",
        "--res",
        "4,16,48",
    ];
    let out = helicity(&args, d.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let order: f64 = stdout
        .lines()
        .find_map(|l| l.split("error: ").nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(order >= 0.9, "{order}");
}

#[test]
fn frozen_polyhedron_sweep_settles() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "convergence",
        "--freeze-polyhedron",
        "--res",
        "2,8,16",
        "--res",
        "4,16,32",
        "--res",
        "6,24,48",
    ];
    assert_eq!(helicity(&args, d.path()).status.code(), Some(0));
    let diffs = column(d.path().join("convergence.csv"), "diff_to_finest");
    assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
}

#[test]
fn gradient_with_finite_difference_check() {
    let d = tempfile::tempdir().unwrap();
    let out = helicity(&["gradient", "--res", "2,8,16", "--fd-check"], d.path());
    assert_eq!(out.status.code(), Some(0));
    let g = json(d.path().join("gradient.json"));
    assert_eq!(g["coefficients"].as_array().unwrap().len(), 8);
    assert!(g["max_fd_mismatch_exact"].as_f64().unwrap() <= 1e-4);
    let vtk = std::fs::read_to_string(d.path().join("density.vtk")).unwrap();
    assert!(vtk.contains("SCALARS density"));
}

#[test]
fn optimize_writes_trace_and_surface() {
    let d = tempfile::tempdir().unwrap();
    let out = helicity(&["optimize", "--res", "2,8,16", "--iters", "3"], d.path());
    assert_eq!(out.status.code(), Some(0));
    let j = column(d.path().join("trace.csv"), "J");
    assert_eq!(j.len(), 4);
    assert!(j.windows(2).all(|w| w[1] <= w[0]));
    let h = column(d.path().join("trace.csv"), "H");
    assert!(h[3] > h[0]);
    let s =
        helicity_core::FourierSurface::from_json_file(d.path().join("final_surface.json")).unwrap();
    assert_eq!(s.n_fp, 3);
}

#[test]
fn oracle_report() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        helicity(&["oracle", "--res", "2,8,16"], d.path())
            .status
            .code(),
        Some(0)
    );
    let r = json(d.path().join("oracle.json"));
    assert!(r["h_oracle"].as_f64().unwrap() > 0.0);
    assert_eq!(r["n_points"].as_u64(), Some(1152));
}
