use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relkepler::cli::config::RunConfig;
use relkepler::cli::{ErrorOutput, PrecessionRow, SweepSummary};
use relkepler::integrate::RunReport;
use relkepler::reparam::EquivalenceReport;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str], cfg: &str, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relkepler"))
        .args(args)
        .arg("--config")
        .arg(config(cfg))
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_error(out: &Output) -> ErrorOutput {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn simulate_writes_monotone_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], "circular.json", dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "t",
            "s_clock",
            "x",
            "y",
            "vx",
            "vy",
            "r",
            "energy",
            "angular_momentum",
            "gamma",
            "region"
        ]
    );
    let mut last = f64::NEG_INFINITY;
    for row in reader.records() {
        let row = row.unwrap();
        let t: f64 = row[0].parse().unwrap();
        assert!(t > last);
        last = t;
        for i in 1..10 {
            assert!(row[i].parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(&row[10], "OmegaH");
    }
    assert!(dir.path().join("theta_r.dat").exists());
    assert!(dir.path().join("t_energy_drift.dat").exists());
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    run(&["simulate"], "eccentric.json", dir.path());
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: RunReport = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(text, again);
}

#[test]
fn negative_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], "invalid_mass.json", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err.exit_code, 2);
    assert!(err.message.contains("params.m"));
}

#[test]
fn radial_infall_records_domain_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], "infall.json", dir.path());
    assert_eq!(out.status.code(), Some(4));
    let err = stderr_error(&out);
    assert_eq!(err.error, "DomainExit");
    let last = err.last_state.unwrap();
    assert!(last.y[0] > 0.0 && last.y[0] < 1e-3);
    // partial output is still written
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn bridge_forward_and_backward_pass() {
    for direction in ["forward", "backward"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(
            &["bridge", "--direction", direction, "--strict"],
            "eccentric.json",
            dir.path(),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: EquivalenceReport = serde_json::from_slice(&out.stdout).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(serde_json::to_value(report.direction).unwrap(), direction);
        assert!(dir.path().join("bridge_report.json").exists());
    }
}

#[test]
fn sigma_branch_with_omega_state_is_region_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bridge", "--sigma-branch"], "eccentric.json", dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_error(&out).error, "RegionError");
}

#[test]
fn sigma_branch_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bridge", "--sigma-branch"], "sigma.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: EquivalenceReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.target_energy, -1.0);
    assert!(report.energy_gap < 1e-6);
}

#[test]
fn precession_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["precession"], "precession.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<PrecessionRow> = serde_json::from_slice(&out.stdout).unwrap();
    let lc = rows.iter().find(|r| r.family == "levi_civita").unwrap();
    assert!((lc.ratio_to_special_relativity.unwrap() - 6.0).abs() < 0.12);
    let sw = rows.iter().find(|r| r.family == "schwarzschild").unwrap();
    assert!((sw.ratio.unwrap() - 1.0).abs() < 0.01);
    assert!(rows[3].measured.unwrap().abs() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("precession.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn sweep_grid_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = run(&["sweep"], "sweep.json", a.path());
    assert_eq!(out.status.code(), Some(0));
    let summary: SweepSummary = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((summary.runs, summary.succeeded), (9, 9));
    for i in 0..9 {
        assert!(a
            .path()
            .join(format!("run_{i:03}"))
            .join("trajectory.csv")
            .exists());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_relkepler"))
        .args(["sweep", "--config"])
        .arg(config("sweep.json"))
        .arg("--out")
        .arg(b.path())
        .env("RELKEPLER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for i in 0..9 {
        let name = format!("run_{i:03}/trajectory.csv");
        assert_eq!(
            std::fs::read(a.path().join(&name)).unwrap(),
            std::fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn sweep_flags_forbidden_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep"], "sweep_forbidden.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary: SweepSummary = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!summary.records[0].ok);
    assert_eq!(
        summary.records[0].error.as_ref().unwrap().error,
        "RegionError"
    );
    assert!(summary.records[1].ok);
    let strict = run(&["sweep", "--strict"], "sweep_forbidden.json", dir.path());
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let result = RunConfig::load(&path);
        if path.ends_with("invalid_mass.json") {
            assert!(result.is_err());
        } else {
            assert!(result.is_ok(), "{}: {:?}", path.display(), result.err());
        }
    }
}

#[test]
fn unknown_fields_and_versions_are_rejected() {
    let bad = r#"{"schema_version": 2, "model": {"kind": "relativistic_kepler"}}"#;
    assert_eq!(
        RunConfig::from_json(bad)
            .unwrap_err()
            .category()
            .exit_code(),
        2
    );
    let bad = r#"{"schema_version": 1, "model": {"kind": "relativistic_kepler"}, "colour": 1}"#;
    assert!(RunConfig::from_json(bad).is_err());
}
