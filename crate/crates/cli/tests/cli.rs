use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridfem::sparse::CsrMatrix;

fn gridfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfem")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = gridfem(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn model(dir: &Path, name: &str, file: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(file);
    let mut args = vec!["make-model", name, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

fn table(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn missing_mesh_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("o");
    let out = gridfem(&["convergence", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no mesh"));
    assert!(!target.exists(), "failed runs leave no output behind");
}

#[test]
fn unknown_flag_and_bad_value_are_usage_errors() {
    assert_eq!(gridfem(&["info", "x.ply", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "cube", "c.ply", &[]);
    let out = gridfem(&["info", mesh.to_str().unwrap(), "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_mesh_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nf 1 2 3\n").unwrap();
    for path in [dir.path().join("missing.ply"), bad] {
        let out = gridfem(&["info", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn fitting_without_colors_asks_for_a_texture() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "cube", "c.ply", &[]);
    let out = gridfem(&["fit-color", mesh.to_str().unwrap(), "--depth", "2", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--synthetic-texture"));
}

#[test]
fn convergence_emits_a_row_per_min_depth() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "cube-lattice", "lat.ply", &["--n", "2", "--synthetic-texture", "checkerboard3d 2"]);
    let out = dir.path().join("run");
    ok(&["convergence", mesh.to_str().unwrap(), "--depth", "3", "--out", out.to_str().unwrap()]);
    let rows = table(&out.join("convergence.csv"));
    for mode in ["aware", "unaware"] {
        let depths: Vec<&str> = rows.iter().filter(|r| r[0] == mode).map(|r| r[1].as_str()).collect();
        assert_eq!(depths, ["0", "1", "2", "3"], "{mode}");
    }
    assert!(table(&out.join("history.csv")).len() > 6);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let lattice = model(dir.path(), "cube-lattice", "lat.ply", &["--n", "2", "--synthetic-texture", "checkerboard3d 2"]);
    let sphere = model(dir.path(), "icosphere", "s.ply", &["--subdivisions", "2"]);
    let run = |k: usize| {
        let conv = dir.path().join(format!("conv{k}"));
        let flow = dir.path().join(format!("flow{k}"));
        ok(&["convergence", lattice.to_str().unwrap(), "--depth", "3", "--seed", "7", "--out", conv.to_str().unwrap()]);
        ok(&[
            "flow",
            sphere.to_str().unwrap(),
            "--depth",
            "3",
            "--delta",
            "0.5",
            "--total-time",
            "1",
            "--ground-truth",
            "--out",
            flow.to_str().unwrap(),
        ]);
        ["convergence.csv", "history.csv"]
            .iter()
            .map(|f| std::fs::read(conv.join(f)).unwrap())
            .chain([std::fs::read(flow.join("metrics.csv")).unwrap(), std::fs::read(flow.join("frames/step_00002.ply")).unwrap()])
            .collect::<Vec<_>>()
    };
    assert_eq!(run(0), run(1));
}

#[test]
fn different_seeds_change_the_initial_guess() {
    let dir = tempfile::tempdir().unwrap();
    let lattice = model(dir.path(), "cube-lattice", "lat.ply", &["--n", "2", "--synthetic-texture", "checkerboard3d 2"]);
    let run = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        ok(&["convergence", lattice.to_str().unwrap(), "--depth", "3", "--seed", seed, "--out", out.to_str().unwrap()]);
        table(&out.join("convergence.csv"))
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "icosphere", "s.ply", &["--subdivisions", "1"]);
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, format!("mesh={}\ndepth=2\nmode=unaware\n", mesh.display())).unwrap();
    let out = dir.path().join("o");
    ok(&["info", "--config", conf.to_str().unwrap(), "--depth", "3", "--out", out.to_str().unwrap()]);
    let resolved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(resolved.contains("depth=3\n"));
    assert!(resolved.contains("mode=unaware\n"));
    let header = std::fs::read_to_string(out.join("info.csv")).unwrap();
    assert!(header.starts_with(&format!("# version={}\n# command=info\n", gridfem::version())));
    assert!(header.contains("# depth=3\n"));
}

#[test]
fn info_compares_the_spaces() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = model(dir.path(), "icosphere", "s.ply", &["--subdivisions", "3"]);
    let lattice = model(dir.path(), "cube-lattice", "lat.ply", &["--n", "3"]);
    let dims = |mesh: &Path, depth: &str| {
        let out = dir.path().join(mesh.file_stem().unwrap());
        ok(&["info", mesh.to_str().unwrap(), "--depth", depth, "--out", out.to_str().unwrap()]);
        table(&out.join("info.csv"))
    };
    let get = |rows: &[Vec<String>], mode: &str, d: &str| {
        rows.iter().find(|r| r[0] == d && r[1] == mode).expect("row present")[2].parse::<usize>().unwrap()
    };
    let rows = dims(&sphere, "4");
    assert_eq!(get(&rows, "aware", "4"), get(&rows, "unaware", "4"));
    let rows = dims(&lattice, "3");
    assert!(get(&rows, "aware", "1") > get(&rows, "unaware", "1"));
}

#[test]
fn matrices_are_dumped_in_matrix_market_format() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "icosphere", "s.ply", &["--subdivisions", "1"]);
    let out = dir.path().join("o");
    ok(&["spectrum", mesh.to_str().unwrap(), "--depth", "2", "--count", "5", "--dump-matrices", "--out", out.to_str().unwrap()]);
    let l = CsrMatrix::read_matrix_market(&std::fs::read_to_string(out.join("stiffness.mtx")).unwrap()).unwrap();
    let m = CsrMatrix::read_matrix_market(&std::fs::read_to_string(out.join("mass.mtx")).unwrap()).unwrap();
    assert_eq!(l.n_rows(), m.n_rows());
    assert_eq!(table(&out.join("spectrum.csv")).len(), 5);
}

#[test]
fn flow_writes_frames_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = model(dir.path(), "blob", "b.ply", &["--subdivisions", "2"]);
    let out = dir.path().join("o");
    ok(&["flow", mesh.to_str().unwrap(), "--depth", "3", "--delta", "0.25", "--total-time", "1", "--stride", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(table(&out.join("metrics.csv")).len(), 5);
    assert_eq!(table(&out.join("timing.csv")).len(), 4);
    for step in [0, 2, 4] {
        let frame = out.join(format!("frames/step_{step:05}.ply"));
        let m = gridfem::mesh::io::load_mesh(&frame).unwrap();
        assert_eq!(m.vertex_count(), gridfem::models::blob(2).vertex_count());
    }
    assert!(!out.join("frames/step_00001.ply").exists());
    let both = gridfem(&["flow", mesh.to_str().unwrap(), "--delta", "1", "--budget-seconds", "1"]);
    assert_eq!(both.status.code(), Some(2));
}
