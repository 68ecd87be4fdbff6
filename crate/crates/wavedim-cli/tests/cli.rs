//! End-to-end checks of the compiled binary: exit codes, artifact
//! determinism, and sweep idempotence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavedim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavedim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_linear_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    let text = format!(
        r#"
scenario = "linear"
output_dir = "{}"

[domain]
kind = "interval"
len = 3.141592653589793

[discretization]
modes = 8
components = 1
dt = 0.02
t_final = 5.0
sample_stride = 5

[sweep]
gammas = [0.2, 0.1]
seeds = [1]
tangent_count = 4
averaging_time = 10.0
burn_in = 2.0
require_convergence = false
"#,
        dir.join("runs").display()
    );
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn missing_config_file_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wavedim(&["spectrum", "--config", "no_such.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn invalid_config_content_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "scenario = \"linear\"\nunknown_key = 3\n").unwrap();
    let out = wavedim(
        &["spectrum", "--config", path.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ineq_campaign_dimension_out_of_range_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wavedim(
        &["ineq-test", "--d", "4", "--n-max", "4", "--seeds", "2"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ineq_campaign_artifacts_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    for dir in [&dir_a, &dir_b] {
        let out = wavedim(
            &[
                "ineq-test",
                "--d",
                "1",
                "--n-max",
                "6",
                "--seeds",
                "24",
                "--grid",
                "256",
                "--out",
                dir.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["ineq_rows.csv", "ineq_summary.json"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn sweep_persists_skips_and_forces() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_linear_config(tmp.path());

    let first = wavedim(&["sweep", "--config", &config], tmp.path());
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let runs = tmp.path().join("runs");
    let hash_dirs: Vec<_> = fs::read_dir(&runs).unwrap().collect();
    assert_eq!(hash_dirs.len(), 1);
    let record_dir = hash_dirs[0].as_ref().unwrap().path();
    let manifest = record_dir.join("manifest.json");
    let bytes_first = fs::read(&manifest).unwrap();

    let second = wavedim(&["sweep", "--config", &config], tmp.path());
    assert_eq!(second.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&second.stdout).contains("nothing to do"));
    assert_eq!(fs::read(&manifest).unwrap(), bytes_first);

    let forced = wavedim(&["sweep", "--config", &config, "--force"], tmp.path());
    assert_eq!(forced.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&forced.stdout).contains("wrote"));
    // The recomputation is deterministic, so even a forced redo
    // reproduces the manifest byte for byte.
    assert_eq!(fs::read(&manifest).unwrap(), bytes_first);
}

#[test]
fn report_renders_stable_summaries_from_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_linear_config(tmp.path());
    let sweep = wavedim(&["sweep", "--config", &config], tmp.path());
    assert_eq!(
        sweep.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );

    let report = wavedim(&["report", "--config", &config], tmp.path());
    assert_eq!(
        report.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&report.stderr)
    );
    let runs = tmp.path().join("runs");
    let record_dir = fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let csv = fs::read_to_string(record_dir.join("summary.csv")).unwrap();
    assert!(csv.starts_with("gamma,mode_count,lower_proxy,ky_dimension,"));
    assert_eq!(csv.lines().count(), 3);
    let first_fits = fs::read(record_dir.join("fits.json")).unwrap();

    let again = wavedim(&["report", "--config", &config], tmp.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read(record_dir.join("fits.json")).unwrap(), first_fits);
}

#[test]
fn spectrum_command_writes_the_eigenvalue_table() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_linear_config(tmp.path());
    let out = wavedim(
        &[
            "spectrum",
            "--config",
            &config,
            "--out",
            tmp.path().join("spec").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("spec").join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda_1 = 1"));
}

#[test]
fn report_before_sweep_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_linear_config(tmp.path());
    let out = wavedim(&["report", "--config", &config], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}
