use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beam-maxwell"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_only_into_out_dir() {
    let cwd = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = cli(
        &["run", "--case", "plane-wave", "--n", "40", "--t-end", "0.25", "--out-dir", out.path().to_str().unwrap()],
        cwd.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(files(cwd.path()).is_empty());
    let written = files(out.path());
    for name in ["plane_wave_1d_beam_et_final.vtk", "plane_wave_1d_beam_et_report.json"] {
        assert!(written.iter().any(|f| f == name), "{written:?}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("error_l1"));
}

#[test]
fn convergence_prints_slope() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(
        &[
            "convergence",
            "--n",
            "20",
            "--resolutions",
            "20,40,80",
            "--out-dir",
            out.path().to_str().unwrap(),
        ],
        out.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("slope = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((1.8..=2.2).contains(&slope), "{stdout}");
    assert!(out.path().join("convergence_plane_wave_1d_beam_et.csv").exists());
}

#[test]
fn mesh_gen_then_mesh_info() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["mesh-gen", "box", "--out", "box.msh", "--n", "3", "--simplices"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cli(&["mesh-info", "box.msh", "--json"], dir.path());
    assert!(o.status.success());
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["cells"], 27 * 6);
    assert_eq!(info["dim"], 3);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["run", "--bogus"], dir.path()).status.code(), Some(2));
    let o = cli(&["run", "--solver", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
    let o = cli(&["mesh-info", "missing.msh"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
