use std::path::Path;
use std::process::Command;

fn glcarleman(out: &Path, args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_glcarleman")).arg("--out").arg(out).args(args).output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    (o.status.code().unwrap(), text)
}

fn run_dirs(out: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn check_weights_passes_and_writes_hashed_run_dir() {
    let out = tempfile::tempdir().unwrap();
    let (code, text) = glcarleman(out.path(), &["check-weights", "--grid", "32"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("check-weights PASS"));
    let dirs = run_dirs(out.path());
    assert_eq!(dirs.len(), 1);
    assert_eq!(dirs[0].len(), 16);
    assert!(dirs[0].chars().all(|c| c.is_ascii_hexdigit()));
    let run = out.path().join(&dirs[0]);
    assert!(run.join("summary.json").is_file());
    assert!(run.join("envelope.csv").is_file());

    // Same config, same directory; a different seed gets a new one.
    glcarleman(out.path(), &["check-weights", "--grid", "32"]);
    assert_eq!(run_dirs(out.path()).len(), 1);
    glcarleman(out.path(), &["check-weights", "--grid", "32", "--seed", "9"]);
    assert_eq!(run_dirs(out.path()).len(), 2);
}

#[test]
fn corrupted_identity_fails_with_exit_one() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("c.json");
    std::fs::write(&cfg, r#"{"identity": {"random_fields": 1, "lambdas": [4.0], "mus": [2.0], "coeff_pairs": [[0.3, 0.4]]}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let (ok, text) = glcarleman(out.path(), &["--config", cfg, "verify-identity"]);
    assert_eq!(ok, 0, "{text}");
    let (bad, text) = glcarleman(out.path(), &["--config", cfg, "verify-identity", "--corrupt-term", "b"]);
    assert_eq!(bad, 1, "{text}");
    assert!(text.contains("FAIL"));
    let (unknown, text) = glcarleman(out.path(), &["--config", cfg, "verify-identity", "--corrupt-term", "nonsense"]);
    assert_eq!(unknown, 2, "{text}");
}

#[test]
fn configuration_errors_exit_two() {
    let out = tempfile::tempdir().unwrap();
    let bad_field = out.path().join("bad_field.json");
    std::fs::write(&bad_field, r#"{"solve": {"modez": 3}}"#).unwrap();
    let (code, text) = glcarleman(out.path(), &["--config", bad_field.to_str().unwrap(), "solve"]);
    assert_eq!(code, 2);
    assert!(text.contains("solve"), "{text}");

    let inadmissible = out.path().join("inadmissible.json");
    std::fs::write(&inadmissible, r#"{"b": 0.95, "c": 0.95}"#).unwrap();
    let (code, _) = glcarleman(out.path(), &["--config", inadmissible.to_str().unwrap(), "check-weights"]);
    assert_eq!(code, 2);

    let (code, _) = glcarleman(out.path(), &["check-weights", "--lambda", "0.5"]);
    assert_eq!(code, 2);
    let (code, _) = glcarleman(out.path(), &["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 2);
    assert!(run_dirs(out.path()).iter().all(|d| d.ends_with(".json")));
}

#[test]
fn solve_writes_trajectory_and_energy_log() {
    let out = tempfile::tempdir().unwrap();
    let (code, text) = glcarleman(out.path(), &["solve", "--grid", "32"]);
    assert_eq!(code, 0, "{text}");
    let dirs = run_dirs(out.path());
    let run = out.path().join(&dirs[0]);
    for f in ["trajectory.bin", "energy.csv", "summary.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
}
