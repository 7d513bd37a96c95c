use std::path::Path;
use std::process::{Command, Output};

fn amplify(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amplify"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUN_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_preset(dir: &Path, id: &str) -> String {
    let o = amplify(&["preset", id, "--out", "s.json"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    "s.json".to_string()
}

#[test]
fn preset_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "fig2-knife");
    let o = amplify(&["analyze", &s], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("\"classification\": \"KnifeEdge\""), "{out}");
    assert!(out.contains("\"spectral_radius\": 1"), "{out}");
}

#[test]
fn unknown_preset_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&amplify(&["preset", "fig7"], dir.path())), 1);
    assert_eq!(code(&amplify(&["simulate"], dir.path())), 1);
    assert_eq!(code(&amplify(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&amplify(&["analyze", "missing.json"], dir.path())), 1);
    assert_eq!(code(&amplify(&["--help"], dir.path())), 0);
}

#[test]
fn invalid_scenario_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"name":"x","dimensions":{"persons":1,"inequities":2},"delta":1.2,
            "terms":[{"kind":"spillover","target":1,"source":1,"b":0.3}]}"#,
    )
    .unwrap();
    let o = amplify(&["analyze", "bad.json"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("field \"delta\": must lie in open interval (0,1)"), "{err}");
}

#[test]
fn simulate_writes_the_norm_series() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "spillover-demo");
    let o = amplify(&["simulate", &s, "--paths", "100", "--out", "series.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,estimate,ci_half_width,mode"));
    assert_eq!(lines.next(), Some("0,0.5,0,mean-level"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn run_seed_overrides_the_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "synergy-demo");
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_amplify"));
        c.args(["simulate", &s, "--paths", "50", "--format", "json"]).current_dir(dir.path());
        match seed {
            Some(v) => c.env("RUN_SEED", v),
            None => c.env_remove("RUN_SEED"),
        };
        c.output().unwrap()
    };
    let plain = run(None);
    let seeded = run(Some("77"));
    let again = run(Some("77"));
    assert_eq!(code(&seeded), 0);
    assert_ne!(plain.stdout, seeded.stdout);
    assert_eq!(seeded.stdout, again.stdout);
    assert_eq!(code(&run(Some("-3"))), 1);
}

#[test]
fn portrait_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "fig1-weak");
    let o = amplify(&["portrait", &s, "--grid", "3", "--duration", "5"], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("traj_id,t,y1,y2\n0,0,-1,-1\n"), "{out}");
    let ids: std::collections::BTreeSet<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 9);
}

#[test]
fn portrait_needs_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.json"), r#"{"name":"x","dimensions":{"persons":1,"inequities":3},"delta":0.5}"#).unwrap();
    assert_eq!(code(&amplify(&["portrait", "s.json"], dir.path())), 2);
}

#[test]
fn thresholds_report_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "fig1-strong");
    let o = amplify(&["thresholds", &s], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("\"free_parameter\": \"d1\""), "{out}");
    assert!(out.contains("\"critical_value\": 0.177777777778"), "{out}");
}

#[test]
fn intervene_reports_both_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_preset(dir.path(), "fig2-unstable");
    std::fs::write(dir.path().join("iv.json"), r#"{"kind":"disrupt","parameter":"terms[0].c","value":0.1}"#).unwrap();
    let o = amplify(&["intervene", &s, "--intervention", "iv.json", "--out", "r.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert!(r.contains("\"classification_before\": \"Unstable\""));
    assert!(r.contains("\"classification_after\": \"Stable\""));

    std::fs::write(dir.path().join("bad.json"), r#"{"kind":"disrupt","parameter":"terms[4].c","value":0.1}"#).unwrap();
    assert_eq!(code(&amplify(&["intervene", &s, "--intervention", "bad.json"], dir.path())), 2);
}

#[test]
fn verify_writes_evidence_and_flags_regime_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = amplify(&["verify", "--prop", "P2", "--paths", "200", "--evidence-dir", "ev"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("PASS P2"));
    let ev = std::fs::read_to_string(dir.path().join("ev/P2.json")).unwrap();
    assert!(ev.contains("\"passed\": true"));

    let o = amplify(&["verify", "--prop", "P6", "--set", "d1=0.1", "--paths", "200"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sqrt(d1*d2) > 1 - delta"));
    assert_eq!(code(&amplify(&["verify", "--prop", "P12"], dir.path())), 1);
}

#[test]
fn verify_failure_exits_three() {
    // Two antithetic pairs cannot pin the synergy margin down on [1, 50].
    let dir = tempfile::tempdir().unwrap();
    let o = amplify(&["verify", "--prop", "P3", "--paths", "4", "--seed", "1", "--evidence-dir", "ev"], dir.path());
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FAIL P3"));
    assert!(dir.path().join("ev/P3.json").exists());
    assert_eq!(code(&amplify(&["verify", "--prop", "P3", "--paths", "3"], dir.path())), 2);
}
