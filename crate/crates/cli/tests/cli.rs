use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bgdeep_cli::report::{pool_trials_csv, RunReport};
use bgdeep_core::pred_ega::{GlycemicRange, Verdict, DEFAULT_ZONES_JSON};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bgdeep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgdeep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, profile: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("{profile}-{seed}.csv"));
    let o = bgdeep(&[
        "synth",
        "--out",
        s(&out),
        "--patients",
        "12",
        "--points",
        "120",
        "--profile",
        profile,
        "--seed",
        seed,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_report(dir: &Path) -> RunReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn synth_is_deterministic_and_accepts_a_directory() {
    let tmp = TempDir::new().unwrap();
    let a = synth(tmp.path(), "noisy", "5");
    let b = tmp.path().join("again");
    fs::create_dir(&b).unwrap();
    let o = bgdeep(&[
        "synth",
        "--out",
        s(&b),
        "--patients",
        "12",
        "--points",
        "120",
        "--profile",
        "noisy",
        "--seed",
        "5",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(a).unwrap(), fs::read(b.join("synth.csv")).unwrap());
}

#[test]
fn synth_rejects_bad_profile() {
    let tmp = TempDir::new().unwrap();
    let o = bgdeep(&[
        "synth",
        "--out",
        s(&tmp.path().join("x.csv")),
        "--profile",
        "loud",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_trial_noiseless_run() {
    let tmp = TempDir::new().unwrap();
    // 25 x 160 fixture; measured eu Accurate 95.47% at seed 0.
    let data = tmp.path().join("fixture.csv");
    let o = bgdeep(&[
        "synth",
        "--out",
        s(&data),
        "--profile",
        "noiseless",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let out = tmp.path().join("run");
    let o = bgdeep(&["run", "--data", s(&data), "--out", s(&out), "--trials", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    assert_eq!(report.command, "run");
    assert_eq!(report.seeds, vec![0]);
    assert_eq!(report.zones.source, "default");
    let deep = &report.methods[0];
    assert!(
        deep.pooled.eu.percent.accurate >= 95.0,
        "{:?}",
        deep.pooled.eu
    );
    assert!(out.join("trials.csv").exists());
    assert!(!out.join("compare.csv").exists());
}

#[test]
fn percentages_and_csv_reproduce_the_report() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "2");
    let out = tmp.path().join("cmp");
    let o = bgdeep(&[
        "compare",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--trials",
        "3",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    assert_eq!(report.seeds, vec![4, 5, 6]);
    let pooled = pool_trials_csv(&fs::read_to_string(out.join("trials.csv")).unwrap()).unwrap();
    for m in &report.methods {
        let from_csv = &pooled[m.method.as_str()];
        for range in GlycemicRange::ALL {
            let summary = match range {
                GlycemicRange::Hypo => &m.pooled.hypo,
                GlycemicRange::Eu => &m.pooled.eu,
                GlycemicRange::Hyper => &m.pooled.hyper,
            };
            let c = from_csv.range(range);
            assert_eq!(*c, summary.counts);
            assert!((c.percent(Verdict::Accurate) - summary.percent.accurate).abs() <= 1e-9);
            assert!((c.percent(Verdict::Benign) - summary.percent.benign).abs() <= 1e-9);
            assert!((c.percent(Verdict::Error) - summary.percent.error).abs() <= 1e-9);
        }
        for t in &m.trials {
            assert_eq!(t.train_ids.len(), 4);
        }
    }
}

#[test]
fn compare_table_shape_and_repeatability() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "3");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = bgdeep(&[
            "compare",
            "--data",
            s(&data),
            "--out",
            s(&out),
            "--trials",
            "2",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read_to_string(out.join("compare.csv")).unwrap(),
            o.stdout,
        )
    };
    let (table, stdout) = run("a");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("deep,"));
    assert!(lines[2].starts_with("tikhonov,"));
    for row in &lines[1..] {
        let cells: Vec<f64> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 9);
        for triple in cells.chunks(3) {
            let sum: f64 = triple.iter().sum();
            assert!(sum == 0.0 || (sum - 100.0).abs() <= 0.015, "{row}");
        }
    }
    let text = String::from_utf8(stdout.clone()).unwrap();
    assert!(text.contains("hypoglycemia") && text.contains("tikhonov"));
    assert_eq!(run("b"), (table, stdout));
}

#[test]
fn missing_data_file_is_a_runtime_error_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere.csv");
    let out = tmp.path().join("out");
    let o = bgdeep(&["run", "--data", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.csv"));
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "4");
    let out = tmp.path().join("out");
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "d = 1\n").unwrap();
    let o = bgdeep(&[
        "run",
        "--config",
        s(&bad),
        "--data",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let unknown = tmp.path().join("unknown.json");
    fs::write(&unknown, r#"{"horizon": 3}"#).unwrap();
    let o = bgdeep(&[
        "run",
        "--config",
        s(&unknown),
        "--data",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bgdeep(&[
        "run",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--train-percent",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn toml_config_is_echoed_and_flags_override_it() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "5");
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, "seed = 9\ntrials = 5\n\n[krr]\nsigma = 80.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = bgdeep(&[
        "run",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--trials",
        "1",
        "--smooth",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    assert_eq!(report.seeds, vec![9]);
    assert_eq!(report.config.krr.sigma, 80.0);
    assert!(report.config.smoothing.enabled);
}

#[test]
fn custom_zones_are_hashed_in_the_report() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "6");
    let zones = tmp.path().join("custom.json");
    fs::write(&zones, DEFAULT_ZONES_JSON).unwrap();
    let out = tmp.path().join("out");
    let o = bgdeep(&[
        "run",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--trials",
        "1",
        "--zones",
        s(&zones),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    assert_eq!(report.zones.source, "custom.json");
    assert_eq!(
        report.zones.sha256,
        hex::encode(Sha256::digest(DEFAULT_ZONES_JSON.as_bytes()))
    );

    let broken = tmp.path().join("broken.json");
    fs::write(&broken, "{}").unwrap();
    let o = bgdeep(&[
        "run",
        "--data",
        s(&data),
        "--out",
        s(&tmp.path().join("o2")),
        "--zones",
        s(&broken),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "7");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = bgdeep(&["run", "--data", s(&data), "--out", s(&out), "--trials", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(&blocker).unwrap(), "x");
}

#[test]
fn partial_outputs_are_removed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fresh");
    let err = bgdeep_cli::write_outputs(
        &out,
        &[("a.txt", "one".into()), ("missing/b.txt", "two".into())],
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!out.exists());

    let existing = tmp.path().join("kept");
    fs::create_dir(&existing).unwrap();
    fs::write(existing.join("old.txt"), "old").unwrap();
    assert!(bgdeep_cli::write_outputs(
        &existing,
        &[("a.txt", "one".into()), ("missing/b.txt", "two".into())],
    )
    .is_err());
    assert!(!existing.join("a.txt").exists());
    assert!(existing.join("old.txt").exists());
}

#[test]
fn dump_predictions_writes_every_window() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "noisy", "8");
    let out = tmp.path().join("out");
    let o = bgdeep(&[
        "run",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--trials",
        "2",
        "--dump-predictions",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    let rows = fs::read_to_string(out.join("predictions.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 2 * report.data.windows);
}
