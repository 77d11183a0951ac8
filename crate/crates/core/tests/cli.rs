use std::fs;
use std::path::{Path, PathBuf};

use sweep_core::cli::{load_scenario, main_with_args, run_in, run_suite_in, CliError, Status};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn copy_bundled(dir: &Path, names: &[&str]) {
    for n in names {
        fs::copy(bundled(n), dir.join(format!("{n}.toml"))).unwrap();
    }
}

const FAST: [&str; 5] = [
    "halfspace_speed",
    "shrinking_ball_length",
    "statedep_limit_cycle",
    "bridge_quadratic",
    "monotone_halfspace",
];

#[test]
fn halfspace_speed_passes() {
    let out = tempfile::tempdir().unwrap();
    let sc = load_scenario(&bundled("halfspace_speed")).unwrap();
    let r = run_in(&sc, out.path()).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.status("speed_bound"), Some(Status::Pass));
    assert!(r.metrics["max_ratio"] <= 1.05);
    let text = fs::read_to_string(out.path().join("halfspace_speed/report.toml")).unwrap();
    let parsed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(parsed["scenario"].as_str(), Some("halfspace_speed"));
    assert!(out.path().join("halfspace_speed/trajectory.csv").exists());
}

#[test]
fn shrinking_ball_length_is_near_closed_form() {
    let out = tempfile::tempdir().unwrap();
    let sc = load_scenario(&bundled("shrinking_ball_length")).unwrap();
    let r = run_in(&sc, out.path()).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!((r.metrics["total_length"] / 0.9 - 1.0).abs() < 0.01);
    let csv = fs::read_to_string(out.path().join("shrinking_ball_length/lengths.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("h,length,gap"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn statedep_limit_cycle_rate() {
    let out = tempfile::tempdir().unwrap();
    let sc = load_scenario(&bundled("statedep_limit_cycle")).unwrap();
    let r = run_in(&sc, out.path()).unwrap();
    assert_eq!(r.status("length_rate"), Some(Status::Pass));
    assert_eq!(r.status("bounded_orbit"), Some(Status::Pass));
    assert!(r.passed());
}

#[test]
fn every_listed_check_appears_once() {
    let out = tempfile::tempdir().unwrap();
    let sc = load_scenario(&bundled("bridge_quadratic")).unwrap();
    let r = run_in(&sc, out.path()).unwrap();
    let mut names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    names.sort();
    assert_eq!(
        names,
        ["inclusion_residual", "length_agreement", "norm_profile", "value_residual"]
    );
}

#[test]
fn module_errors_become_failed_checks() {
    let out = tempfile::tempdir().unwrap();
    let text = r#"
name = "bad_field"
experiment = "monotone"
seed = 1
x0 = [0.0, 0.0]
t_end = 1.0
h = 0.1

[family]
kind = "halfspace"
normal = [-1.0, 0.0]
offset = [0.0, -1.0]

[field]
components = [
    { dim = 2, terms = [{ coeff = 1.0, exponents = [0, 1] }] },
    { dim = 2, terms = [{ coeff = 1.0, exponents = [1, 0] }] },
]
"#;
    let sc = sweep_core::cli::Scenario::parse(text, "inline").unwrap();
    let r = run_in(&sc, out.path()).unwrap();
    assert_eq!(r.status("run"), Some(Status::Fail));
    assert!(!r.passed());
    assert!(out.path().join("bad_field/report.toml").exists());
}

#[test]
fn suite_outputs_do_not_depend_on_parallelism() {
    let src = tempfile::tempdir().unwrap();
    copy_bundled(src.path(), &FAST);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_suite_in(src.path(), 1, a.path()).unwrap();
    let rb = run_suite_in(src.path(), 3, b.path()).unwrap();
    assert!(ra.passed && rb.passed);
    assert_eq!(ra.entries.len(), FAST.len());
    for n in FAST {
        for entry in fs::read_dir(a.path().join(n)).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|x| x == "csv") {
                let other = b.path().join(n).join(p.file_name().unwrap());
                assert_eq!(fs::read(&p).unwrap(), fs::read(other).unwrap(), "{}", p.display());
            }
        }
    }
    assert!(a.path().join("suite_summary.toml").exists());
}

#[test]
fn bundled_suite_passes() {
    let out = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let r = run_suite_in(&dir, 2, out.path()).unwrap();
    assert_eq!(r.entries.len(), 7);
    for e in &r.entries {
        assert!(e.passed, "{e:?}");
    }
}

#[test]
fn empty_directory_is_an_empty_pass() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = run_suite_in(src.path(), 2, out.path()).unwrap();
    assert!(r.passed);
    assert!(r.entries.is_empty());
}

#[test]
fn duplicate_names_are_rejected() {
    let src = tempfile::tempdir().unwrap();
    copy_bundled(src.path(), &["halfspace_speed"]);
    fs::copy(bundled("halfspace_speed"), src.path().join("copy.toml")).unwrap();
    let out = tempfile::tempdir().unwrap();
    match run_suite_in(src.path(), 1, out.path()) {
        Err(CliError::DuplicateName { name, .. }) => assert_eq!(name, "halfspace_speed"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn one_broken_file_does_not_stop_the_suite() {
    let src = tempfile::tempdir().unwrap();
    copy_bundled(src.path(), &["monotone_halfspace"]);
    fs::write(src.path().join("broken.toml"), "name = \"x\"\nexperiment = 3\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = run_suite_in(src.path(), 1, out.path()).unwrap();
    assert!(!r.passed);
    let ok: Vec<bool> = r.entries.iter().map(|e| e.passed).collect();
    assert_eq!(ok, [false, true]);
}

// Exit codes go through the process-wide output root, so they share one test.
#[test]
fn exit_codes() {
    let out = tempfile::tempdir().unwrap();
    std::env::set_var(sweep_core::cli::OUTPUT_ROOT_ENV, out.path());
    let src = tempfile::tempdir().unwrap();
    let s = |p: &Path| p.display().to_string();

    assert_eq!(main_with_args(["sweep", "run", &s(&bundled("monotone_halfspace"))]), 0);
    assert!(out.path().join("monotone_halfspace/report.toml").exists());

    let failing = fs::read_to_string(bundled("monotone_halfspace"))
        .unwrap()
        .replace("expected_speed = 0.5", "expected_speed = 0.7");
    let failing_path = src.path().join("failing.toml");
    fs::write(&failing_path, failing).unwrap();
    assert_eq!(main_with_args(["sweep", "run", &s(&failing_path)]), 1);

    let broken = src.path().join("broken.toml");
    fs::write(&broken, "name = \"b\"\nexperiment = \"sweep\"\nseed = 1\nbogus = 2\n").unwrap();
    assert_eq!(main_with_args(["sweep", "run", &s(&broken)]), 2);
    assert_eq!(main_with_args(["sweep", "run", &s(&src.path().join("missing.toml"))]), 2);
    assert_eq!(main_with_args(["sweep", "frobnicate"]), 2);
    // no polynomial f, so the bridge override fails validation
    assert_eq!(main_with_args(["sweep", "bridge", &s(&bundled("halfspace_speed"))]), 2);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(main_with_args(["sweep", "suite", &s(empty.path()), "--jobs", "2"]), 0);
}
