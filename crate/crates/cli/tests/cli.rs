use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const SCENARIO: &str = "duration = 40\nseed = 3\nlanes = 3\nrandom_vehicles = 6\nlane_change_fraction = 0.5\n";

fn aigem(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aigem")).args(args).current_dir(cwd).output().expect("spawn aigem")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = aigem(args, cwd);
    assert!(
        out.status.success(),
        "aigem {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = aigem(args, cwd);
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn synth_dir(dir: &Path) {
    std::fs::write(dir.join("scenario.txt"), SCENARIO).unwrap();
    ok(&["synth", "--scenario", "scenario.txt", "--out", "data", "--stride", "10"], dir);
}

const TINY: [&str; 8] = ["--epochs", "2", "--hidden", "16", "--mlp-hidden", "16,8", "--horizon", "5"];

#[test]
fn synth_train_eval_plot_end_to_end() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_dir(dir);
    for f in ["windows.json", "split.json", "scaler.json", "config.toml"] {
        assert!(dir.join("data").join(f).is_file(), "{f}");
    }
    let mut args = vec!["train", "--data", "data", "--out", "run"];
    args.extend(TINY);
    ok(&args, dir);
    ok(&["eval", "--data", "data", "--out", "eval", "--model", "run/model.json"], dir);
    ok(&["predict", "--data", "data", "--model", "run/model.json", "--out", "pred.json"], dir);
    ok(&["plot", "--input", "run", "eval", "--out", "fig"], dir);
    assert!(dir.join("fig/curves.svg").is_file());
    assert!(dir.join("fig/report.svg").is_file());

    let report: serde_json::Value = serde_json::from_slice(&read(dir.join("eval/report.json"))).unwrap();
    assert_eq!(report["predictor"], "model");
    assert_eq!(report["horizon"], 5);
    let pred: serde_json::Value = serde_json::from_slice(&read(dir.join("pred.json"))).unwrap();
    assert!(pred["actors"].as_array().is_some_and(|a| a.iter().all(|x| x["positions"].as_array().unwrap().len() == 5)));
    assert!(started.elapsed() < Duration::from_secs(300));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_dir(dir);
    let mut args = vec!["train", "--data", "data", "--out", "a"];
    args.extend(TINY);
    ok(&args, dir);
    ok(&["train", "--data", "data", "--out", "b", "--config", "a/config.toml"], dir);
    assert_eq!(read(dir.join("a/curves.csv")), read(dir.join("b/curves.csv")));
    assert_eq!(read(dir.join("a/model.json")), read(dir.join("b/model.json")));
    assert_eq!(read(dir.join("a/config.toml")), read(dir.join("b/config.toml")));

    std::fs::write(dir.join("scenario.txt"), SCENARIO).unwrap();
    ok(&["synth", "--scenario", "scenario.txt", "--out", "data2", "--stride", "10"], dir);
    for f in ["windows.json", "split.json", "scaler.json"] {
        assert_eq!(read(dir.join("data").join(f)), read(dir.join("data2").join(f)), "{f}");
    }
}

#[test]
fn perfect_oracle_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_dir(dir);
    ok(&["eval", "--data", "data", "--out", "truth", "--predictor", "truth", "--horizon", "25"], dir);
    let r: serde_json::Value = serde_json::from_slice(&read(dir.join("truth/report.json"))).unwrap();
    assert_eq!(r["ade"], 0.0);
    assert_eq!(r["fde"], 0.0);
    assert!(r["rmse_per_second"].as_array().unwrap().iter().all(|v| v == 0.0));
    assert_eq!(r["rmse_per_second"].as_array().unwrap().len(), 5);
}

/// NGSIM-style rows in feet at 10 Hz: four vehicles, one weaving.
fn ngsim_csv() -> String {
    let mut s = String::from("Vehicle_ID,Frame_ID,Total_Frames,Global_Time,Local_X,Local_Y,v_Vel,Lane_ID\n");
    for id in 1..=4u32 {
        let speed = 40.0 + 5.0 * id as f64;
        for f in 1..=300u32 {
            let t = f as f64 * 0.1;
            let x = 12.0 * id as f64 + if id == 2 { 6.0 * (t / 3.0).sin() } else { 0.0 };
            let y = 30.0 * id as f64 + speed * t;
            writeln!(s, "{id},{f},300,{},{x:.4},{y:.4},{speed},{id}", 1_000_000 + f * 100).unwrap();
        }
    }
    s
}

#[test]
fn ingest_splits_deterministically_and_reports_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("rec.csv"), ngsim_csv()).unwrap();
    let out = ok(&["ingest", "--input", "rec.csv", "--out", "d1", "--stride", "5"], dir);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = summary["windows"].as_u64().unwrap() as f64;
    assert!(n >= 10.0);
    assert_eq!(summary["train"].as_u64().unwrap() as f64, (0.7 * n).round());
    assert_eq!(summary["val"].as_u64().unwrap() as f64, (0.1 * n).round());
    ok(&["ingest", "--input", "rec.csv", "--out", "d2", "--stride", "5"], dir);
    assert_eq!(read(dir.join("d1/split.json")), read(dir.join("d2/split.json")));

    let cache: serde_json::Value = serde_json::from_slice(&read(dir.join("d1/windows.json"))).unwrap();
    assert!((cache["dt"].as_f64().unwrap() - 0.2).abs() < 1e-12);

    let mut bad = ngsim_csv();
    // header is line 1, so the appended row is line 1202
    bad.push_str("5,1,300,0,abc,1.0,30,1\n");
    std::fs::write(dir.join("bad.csv"), bad).unwrap();
    let (c, err) = code(&["ingest", "--input", "bad.csv", "--out", "d3"], dir);
    assert_eq!(c, 2, "{err}");
    assert!(err.contains("row 1202"), "{err}");
}

#[test]
fn exit_codes_and_overwrite_protection() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_dir(dir);

    // rerunning into the same directory needs --force
    let (c, err) = code(&["synth", "--scenario", "scenario.txt", "--out", "data"], dir);
    assert_eq!(c, 1);
    assert!(err.contains("--force"), "{err}");
    ok(&["synth", "--scenario", "scenario.txt", "--out", "data", "--stride", "10", "--force"], dir);

    std::fs::write(dir.join("typo.toml"), "[train]\nepoch = 3\n").unwrap();
    assert_eq!(code(&["train", "--data", "data", "--out", "r", "--config", "typo.toml"], dir).0, 1);
    assert_eq!(code(&["train", "--data", "data", "--out", "r", "--horizon", "7"], dir).0, 1);
    assert_eq!(code(&["train", "--bogus"], dir).0, 1);
    assert_eq!(code(&["--help"], dir).0, 0);

    let (c, err) = code(&["train", "--data", "missing", "--out", "r"], dir);
    assert_eq!(c, 2);
    assert!(err.contains("missing/windows.json"), "{err}");

    std::fs::write(dir.join("zero.txt"), "duration = 0\n").unwrap();
    assert_eq!(code(&["synth", "--scenario", "zero.txt", "--out", "z"], dir).0, 1);

    let mut args = vec!["train", "--data", "data", "--out", "div", "--learning-rate", "1e300"];
    args.extend(TINY);
    assert_eq!(code(&args, dir).0, 3);
}

#[test]
fn ablation_tables_plot_identically_from_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_dir(dir);
    let mut args = vec!["ablate", "--data", "data", "--out", "abl", "--epochs", "1"];
    args.extend(&TINY[2..]);
    ok(&args, dir);
    for f in ["ablation_d_min.csv", "ablation_d_min.json", "ablation_concat.csv", "ablation_concat.json"] {
        assert!(dir.join("abl").join(f).is_file(), "{f}");
    }
    ok(&["plot", "--input", "abl", "--out", "f1"], dir);
    ok(&["plot", "--input", "abl/ablation_d_min.csv", "abl/ablation_concat.csv", "--out", "f2"], dir);
    for f in ["ablation_d_min.svg", "ablation_concat.svg"] {
        assert_eq!(read(dir.join("f1").join(f)), read(dir.join("f2").join(f)), "{f}");
    }
    assert_eq!(std::fs::read_dir(dir.join("f1")).unwrap().count(), 2);
}
