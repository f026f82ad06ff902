use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/truck_drivers")
}

/// Copies the fixture set into a fresh directory so tests can edit it.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
        }
    }
    dir
}

fn pathways(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathways"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn full_run_writes_reports() {
    let ws = workspace();
    let out = pathways(&["run", "--config", "config.toml", "--out", "result"], ws.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = ws.path().join("result");
    for name in ["report.md", "report.json", "pathways.csv", "manifest.json", "timings.json"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let csv = fs::read_to_string(dir.join("pathways.csv")).unwrap();
    let bus = csv.lines().find(|l| l.contains(",7312,")).unwrap();
    assert!(bus.starts_with("high,"), "{bus}");
    assert!(!dir.join("FAILED").exists());
}

#[test]
fn format_flag_limits_reports() {
    let ws = workspace();
    let out = pathways(
        &["run", "--config", "config.toml", "--out", "md_only", "--format", "md"],
        ws.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = ws.path().join("md_only");
    assert!(dir.join("report.md").exists());
    assert!(!dir.join("report.json").exists());
    assert!(!dir.join("pathways.csv").exists());
}

#[test]
fn threshold_override_shrinks_shortlist() {
    let ws = workspace();
    let out = pathways(&["similarity", "--config", "config.toml", "--threshold", "75"], ws.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let shortlist = fs::read_to_string(ws.path().join("out/shortlist.csv")).unwrap();
    // crane 78, delivery 76 and three occupations at 75
    assert_eq!(shortlist.lines().count(), 1 + 5);
}

#[test]
fn config_errors_exit_2() {
    let ws = workspace();
    let out = pathways(&["run", "--config", "config.toml", "--threshold", "120"], ws.path());
    assert_eq!(out.status.code(), Some(2));

    let text = fs::read_to_string(ws.path().join("config.toml")).unwrap();
    fs::write(
        ws.path().join("bad.toml"),
        text.replace("similarity_threshold = 70", "similarity_threshold = -5\nfavourite_colour = \"red\""),
    )
    .unwrap();
    let out = pathways(&["run", "--config", "bad.toml"], ws.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("similarity_threshold") && err.contains("favourite_colour"), "{err}");

    let out = pathways(&["run", "--config", "nowhere.toml"], ws.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_transitions_fails_regression_stage() {
    let ws = workspace();
    fs::remove_file(ws.path().join("transitions.csv")).unwrap();
    let out = pathways(&["run", "--config", "config.toml"], ws.path());
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("regression") && err.contains("transitions.csv"), "{err}");
    let marker = fs::read_to_string(ws.path().join("out/FAILED")).unwrap();
    assert!(marker.contains("stage: regression"), "{marker}");
    // earlier stages still produced their outputs
    assert!(ws.path().join("out/predictors.csv").exists());
}

#[test]
fn stage_without_prerequisites_is_a_data_error() {
    let ws = workspace();
    let out = pathways(&["rank", "--config", "config.toml"], ws.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("stage first"), "{}", stderr(&out));
}

#[test]
fn simulate_is_seeded() {
    let ws = workspace();
    let run = |dir: &str, seed: &str| {
        let out = pathways(
            &["simulate", "--occupations", "12", "--years", "3", "--seed", seed, "--out", dir],
            ws.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read_to_string(ws.path().join(dir).join("simulated_panel.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a.lines().count(), 1 + 36);
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}
