use std::path::Path;
use std::process::Command;

use mpemba_cli::sha256_hex;
use serde_json::Value;

const TOY: &str = "\
lattice.L = 1
lattice.boundary = open
lattice.num_up = all
dissipation.gamma = 1
";

const SMALL: &str = "\
lattice.L = 4
lattice.boundary = periodic
model.Delta1 = 0.5
initial.hot = 1, 10
time.points = 40
";

fn mpemba(dir: &Path, config: &str, command: &str, extra: &[&str]) -> std::process::Output {
    let path = dir.join("run.conf");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mpemba"))
        .arg(command)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join("out").join(name)).unwrap()
}

#[test]
fn toy_spectrum_is_two_zeros_and_two_half_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpemba(dir.path(), TOY, "spectrum", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(dir.path(), "spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,re,im"));
    let values: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(values.len(), 4);
    let expected = [0.0, 0.0, -0.5, -0.5];
    for ((re, im), want) in values.iter().zip(expected) {
        assert!((re - want).abs() < 1e-12 && im.abs() < 1e-12, "{values:?}");
    }
}

#[test]
fn empty_delta_range_exits_with_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = "lattice.L = 4\nsweep.delta_start = 1.5\nsweep.delta_stop = 0.5\n";
    let out = mpemba(dir.path(), config, "sweep-delta", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").join("manifest.json").exists());
}

#[test]
fn unknown_key_exits_with_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpemba(dir.path(), "lattice.L = 4\nmodel.Delta = 1\n", "spectrum", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_spectral_request_exits_with_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpemba(dir.path(), "lattice.L = 14\n", "spectrum", &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn outputs_are_deterministic_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for command in ["evolve", "classify"] {
            let out = mpemba(dir, SMALL, command, &["--jobs", "1"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    for name in [
        "trajectories.csv",
        "trajectories.json",
        "verdict.json",
        "crossings.csv",
        "config.conf",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn manifest_checksums_match_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{SMALL}output.modes = true\n");
    let out = mpemba(dir.path(), &config, "spectrum", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "spectrum");
    let canonical = read(dir.path(), "config.conf");
    assert_eq!(manifest["config_sha256"], sha256_hex(&canonical));
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for want in [
        "config.conf",
        "spectrum.csv",
        "spectrum.json",
        "right_modes.bin",
        "left_modes.bin",
    ] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    for f in files {
        let bytes = read(dir.path(), f["path"].as_str().unwrap());
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
}

#[test]
fn canonical_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpemba(dir.path(), SMALL, "spectrum", &[]);
    assert!(out.status.success());
    let canonical = String::from_utf8(read(dir.path(), "config.conf")).unwrap();
    let first = read(dir.path(), "spectrum.csv");
    let again = tempfile::tempdir().unwrap();
    let out = mpemba(again.path(), &canonical, "spectrum", &[]);
    assert!(out.status.success());
    assert_eq!(read(again.path(), "spectrum.csv"), first);
}

#[test]
fn overlaps_and_sweeps_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "{SMALL}sweep.L = 4\nsweep.T = 1\nsweep.delta_start = 0.5\nsweep.delta_stop = 1.5\nsweep.delta_step = 0.5\nsweep.refine = false\n"
    );
    for (command, file, header) in [
        ("overlaps", "overlaps.csv", "n,re,im,0+,1,10"),
        ("sweep-delta", "windows.csv", "L,T,lo,hi,width,intervals"),
        (
            "sweep-delta",
            "sweep.csv",
            "L,Delta,J2_over_J1,T,gamma,boundary,crossed,t_cross,verdict,error",
        ),
    ] {
        let out = mpemba(dir.path(), &config, command, &[]);
        assert!(
            out.status.success(),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(read(dir.path(), file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{file}");
    }
    let sweep = String::from_utf8(read(dir.path(), "sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3);
}

#[test]
fn j1j2_sweep_rows_per_ratio_and_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let config = "model = j1j2\nlattice.L = 4\nlattice.boundary = open\nmodel.Delta1 = 1\nmodel.Delta2 = 1\ninitial.hot = 1, 5\nsweep.ratios = 0, 0.2\nsweep.refine = false\ntime.points = 40\n";
    let out = mpemba(dir.path(), config, "sweep-j1j2", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = String::from_utf8(read(dir.path(), "sweep.csv")).unwrap();
    assert!(sweep.lines().count() > 2, "{sweep}");
    let points: Value = serde_json::from_slice(&read(dir.path(), "sweep.json")).unwrap();
    assert_eq!(points.as_array().unwrap().len(), 2);
}

#[test]
fn shipped_recipes_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let text = std::fs::read_to_string(&path).unwrap();
            if let Err(e) = mpemba_core::parse_config(&text) {
                panic!("{}: {e}", path.display());
            }
            count += 1;
        }
    }
    assert!(count >= 10);
}
