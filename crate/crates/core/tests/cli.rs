//! End-to-end runs of the `rescap` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rescap::cli::RunManifest;
use rescap::learner::{CapacityModel, ClassificationReport, SampleSet};
use rescap::line_model::LineConfig;

fn rescap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rescap"))
        .args(args)
        .current_dir(dir)
        .env_remove("RESCAP_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    for name in ["analytic2", "desk6"] {
        let out = rescap(&p, &["line", "generate", "--preset", name, "--out", &format!("{name}.json")]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    fs::write(
        p.join("truth.json"),
        r#"{"machines":[{"theta":0.05,"beta":0.04},{"theta":0.1,"beta":0.03}]}"#,
    )
    .unwrap();
    (dir, p)
}

#[test]
fn presets_are_written_as_valid_lines() {
    let (_d, p) = setup();
    let a2 = LineConfig::from_json(&fs::read_to_string(p.join("analytic2.json")).unwrap()).unwrap();
    let d6 = LineConfig::from_json(&fs::read_to_string(p.join("desk6.json")).unwrap()).unwrap();
    assert_eq!((a2.stages.len(), a2.dim()), (1, 2));
    assert_eq!((d6.stages.len(), d6.dim()), (3, 6));
    let m = RunManifest::read(&p.join("desk6.json.manifest.json")).unwrap();
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].sha256, rescap::cli::sha256_file(&p.join("desk6.json")).unwrap());
}

#[test]
fn custom_line_is_validated() {
    let (_d, p) = setup();
    let out = rescap(&p, &["line", "generate", "--from", "desk6.json", "--out", "copy.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(p.join("copy.json")).unwrap(), fs::read(p.join("desk6.json")).unwrap());
    fs::write(p.join("bad.json"), "{\"stages\": [").unwrap();
    let out = rescap(&p, &["line", "generate", "--from", "bad.json", "--out", "x.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
    assert!(!p.join("x.json.manifest.json").exists());
}

#[test]
fn oracle_query_exit_code_mirrors_the_label() {
    let (_d, p) = setup();
    // analytic2 is feasible exactly when d1 + d2 <= 0.8.
    let out = rescap(&p, &["oracle", "query", "--line", "analytic2.json", "--d", "0.3,0.4", "--out", "q.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("feasible"));
    let out = rescap(&p, &["oracle", "query", "--line", "analytic2.json", "--d", "0.5,0.4", "--out", "q2.json"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("infeasible"));
    assert!(fs::read_to_string(p.join("q2.json")).unwrap().contains("\"infeasible\""));
    let out = rescap(&p, &["oracle", "query", "--line", "analytic2.json", "--d", "0.5"]);
    assert_eq!(code(&out), 2);
    let out = rescap(&p, &["oracle", "query", "--line", "nope.json", "--d", "0.5,0.1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn learn_eval_and_volume() {
    let (_d, p) = setup();
    let out = rescap(
        &p,
        &[
            "capacity", "learn", "--method", "baseline", "--budget", "41", "--seed", "1", "--line",
            "desk6.json", "--out", "base.json", "--samples", "base.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = CapacityModel::from_json(&fs::read_to_string(p.join("base.json")).unwrap()).unwrap();
    assert!(matches!(model, CapacityModel::Baseline(_)));
    let samples = SampleSet::read_csv(fs::File::open(p.join("base.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), 41);

    let out = rescap(
        &p,
        &[
            "capacity", "eval", "--model", "base.json", "--line", "desk6.json", "--test-size", "400",
            "--balanced", "--report", "report.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(p.join("report.json")).unwrap();
    for key in ["\"infeasible\"", "\"feasible\"", "\"accuracy\"", "\"macro avg\"", "\"weighted avg\"", "\"f1-score\"", "\"support\""] {
        assert!(text.contains(key), "missing {key}");
    }
    let report: ClassificationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.infeasible.support + report.feasible.support, 400);
    assert_eq!(report.infeasible.support, 200);

    // A model trained on another line is rejected.
    let out = rescap(&p, &["capacity", "eval", "--model", "base.json", "--line", "analytic2.json", "--report", "r2.json"]);
    assert_eq!(code(&out), 4);

    let out = rescap(&p, &["capacity", "volume", "--line", "analytic2.json", "--samples", "10000", "--out", "vol.json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("vol.json")).unwrap()).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!((mean - 0.32).abs() <= 0.02, "{mean}");
    assert_eq!(v["source"], "oracle");
}

#[test]
fn budget_errors_have_their_own_exit_code() {
    let (_d, p) = setup();
    let out = rescap(&p, &["capacity", "learn", "--method", "active", "--budget", "2", "--line", "analytic2.json", "--out", "m.json"]);
    assert_eq!(code(&out), 5);
    assert!(!p.join("m.json").exists());
}

#[test]
fn phm_simulate_writes_the_rul_table() {
    let (_d, p) = setup();
    let out = rescap(&p, &["phm", "simulate", "--line", "analytic2.json", "--truth", "truth.json", "--seed", "3", "--out", "rul.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(p.join("rul.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("now,mean,ml,q05,q95,ground_truth,survival_mass"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][0], "5");
    assert_eq!(rows[8][0], "45");
    for r in &rows {
        assert_eq!(r.len(), 7);
        let q05: f64 = r[3].parse().unwrap();
        let ml: f64 = r[2].parse().unwrap();
        let q95: f64 = r[4].parse().unwrap();
        assert!(q05 <= ml && ml <= q95);
    }

    let out = rescap(
        &p,
        &["phm", "simulate", "--line", "analytic2.json", "--truth", "truth.json", "--refit-start", "1", "--out", "r2.csv"],
    );
    assert_eq!(code(&out), 6);
    fs::write(p.join("truth3.json"), r#"{"machines":[{"theta":0.05,"beta":0.04}]}"#).unwrap();
    let out = rescap(&p, &["phm", "simulate", "--line", "analytic2.json", "--truth", "truth3.json", "--out", "r3.csv"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn sweep_single_budget() {
    let (_d, p) = setup();
    let out = rescap(
        &p,
        &["sweep", "--line", "analytic2.json", "--budgets", "2", "--methods", "baseline", "--seeds", "0,1", "--out", "s.csv"],
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(p.join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "budget,method,seed,accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,baseline,0,"));
}

#[test]
fn replay_detects_changes() {
    let (_d, p) = setup();
    let out = rescap(&p, &["capacity", "volume", "--line", "analytic2.json", "--samples", "2000", "--out", "v.json"]);
    assert_eq!(code(&out), 0);
    let out = rescap(&p, &["--threads", "3", "replay", "v.json.manifest.json"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    // Tamper with the recorded output hash.
    let mpath = p.join("v.json.manifest.json");
    let mut m = RunManifest::read(&mpath).unwrap();
    m.outputs[0].sha256 = "0".repeat(64);
    m.write(&mpath).unwrap();
    assert_eq!(code(&rescap(&p, &["replay", "v.json.manifest.json"])), 8);

    // Changed inputs are refused.
    let out = rescap(&p, &["capacity", "volume", "--line", "analytic2.json", "--samples", "2000", "--out", "v.json"]);
    assert_eq!(code(&out), 0);
    let mut line = fs::read_to_string(p.join("analytic2.json")).unwrap();
    line.push('\n');
    fs::write(p.join("analytic2.json"), line).unwrap();
    assert_eq!(code(&rescap(&p, &["replay", "v.json.manifest.json"])), 8);
}

#[test]
fn help_lists_exit_codes_and_usage_errors_exit_2() {
    let (_d, p) = setup();
    let out = rescap(&p, &["--help"]);
    assert_eq!(code(&out), 0);
    let help = stdout(&out);
    assert!(help.contains("Exit codes") && help.contains("RESCAP_THREADS"));
    for k in 0..=8 {
        assert!(help.contains(&format!("\n  {k}  ")), "exit code {k} undocumented");
    }
    assert_eq!(code(&rescap(&p, &["capacity", "learn"])), 2);
    assert_eq!(code(&rescap(&p, &["--threads", "0", "line", "generate", "--preset", "desk6", "--out", "x.json"])), 2);
}
