use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_backflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run_config(channel: &str, state: &str, epochs: usize) -> String {
    format!(
        r#"{{
  "channel": {{"kind": {channel}}},
  "grid": {{"t_end": 2.0, "n_steps": 120}},
  "initial_state": "{state}",
  "train": {{"epochs": {epochs}, "seed": 3}}
}}"#
    )
}

const AD_MARKOV: &str = r#"{"model": "amplitude_damping", "b": 5.0, "lambda": 1.0}"#;
const RTN_NON_MARKOV: &str = r#"{"model": "rtn_dephasing", "v": 1.0, "kappa": 0.14285714285714285}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_reports_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ad.json", &run_config(AD_MARKOV, "excited_excited", 2));
    let out_dir = dir.path().join("ad");
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("regime=markovian"));
    let meta = fs::read_to_string(out_dir.join("trajectory.meta.json")).unwrap();
    assert!(meta.contains(r#""regime": "markovian""#));
    assert!(fs::read_to_string(out_dir.join("trajectory.csv")).unwrap().starts_with("t,z_s,z_a\n"));

    let cfg = write(dir.path(), "rtn.json", &run_config(RTN_NON_MARKOV, "plus_excited", 2));
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("rtn"))]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("regime=non-markovian"));

    let cfg = write(dir.path(), "free.json", &run_config(r#"{"model": "noise_free"}"#, "excited_ground", 2));
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("free"))]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("clamp_events=0"));
}

#[test]
fn invalid_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = run_config(AD_MARKOV, "excited_excited", 2);
    text.insert_str(1, r#""surprise": true,"#);
    let cfg = write(dir.path(), "unknown.json", &text);
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg)])), 2);

    let cfg = write(
        dir.path(),
        "neg.json",
        &run_config(r#"{"model": "amplitude_damping", "b": -1.0, "lambda": 1.0}"#, "excited_excited", 2),
    );
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg)])), 2);

    let cfg = write(dir.path(), "epochs.json", &run_config(AD_MARKOV, "excited_excited", 0));
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg)])), 2);

    let cfg = write(dir.path(), "ok.json", &run_config(AD_MARKOV, "excited_excited", 1));
    let out = run(&["simulate", "--config", s(&cfg), "--epsilon", "0", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn signed_rates_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"channel": {{"kind": {RTN_NON_MARKOV}, "rate_mode": "signed"}},
  "grid": {{"t_end": 5.0, "n_steps": 500}}, "initial_state": "plus_excited"}}"#
    );
    let cfg = write(dir.path(), "signed.json", &text);
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_inputs_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    assert_eq!(code(&run(&["dataset", "--out", d])), 4);
    assert_eq!(code(&run(&["train", "--out", d])), 4);
    assert_eq!(code(&run(&["predict", "--out", d])), 4);
    assert_eq!(code(&run(&["score", "--out", d])), 4);
    assert_eq!(code(&run(&["simulate", "--config", s(&dir.path().join("none.json"))])), 4);
}

#[test]
fn malformed_files_exit_five() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "dataset.csv", "x1,x2,y,t_index,split\n0.1,oops,0.3,2,train\n");
    assert_eq!(code(&run(&["train", "--out", s(dir.path())])), 5);
    let input = write(dir.path(), "short.csv", "y_pred\n0.5\n");
    assert_eq!(code(&run(&["score", "--input", s(&input)])), 5);
}

#[test]
fn predict_on_empty_test_split_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &run_config(AD_MARKOV, "excited_excited", 2));
    let d = dir.path().join("run");
    for stage in ["simulate", "dataset", "train"] {
        assert_eq!(code(&run(&[stage, "--config", s(&cfg), "--out", s(&d)])), 0, "{stage}");
    }
    let text = fs::read_to_string(d.join("dataset.csv")).unwrap();
    let train_only: Vec<&str> = text.lines().take_while(|l| !l.ends_with(",test")).collect();
    fs::write(d.join("dataset.csv"), train_only.join("\n") + "\n").unwrap();
    let out = run(&["predict", "--out", s(&d)]);
    assert_eq!(code(&out), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("test split"));
}

#[test]
fn score_worked_sequence_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["score", "--input", s(&fixture("worked_sequence.csv")), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains(r#""n_rev": 4"#), "{text}");
    assert!(text.contains(r#""n_eval": 6"#));
    assert_eq!(fs::read_to_string(dir.path().join("segments.csv")).unwrap(), "t1,t2\n1,2\n4,5\n");
    let strict = run(&["score", "--input", s(&fixture("worked_sequence.csv")), "--epsilon", "0.025"]);
    assert!(stdout(&strict).contains(r#""n_rev": 0"#));
}

#[test]
fn train_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &run_config(RTN_NON_MARKOV, "plus_excited", 15));
    let d = dir.path().join("run");
    for stage in ["simulate", "dataset"] {
        assert_eq!(code(&run(&[stage, "--config", s(&cfg), "--out", s(&d)])), 0);
    }
    assert_eq!(code(&run(&["train", "--config", s(&cfg), "--out", s(&d)])), 0);
    let first = fs::read(d.join("params.json")).unwrap();
    assert_eq!(code(&run(&["train", "--config", s(&cfg), "--out", s(&d)])), 0);
    assert_eq!(first, fs::read(d.join("params.json")).unwrap());
    assert_eq!(code(&run(&["train", "--config", s(&cfg), "--out", s(&d), "--seed", "99"])), 0);
    assert_ne!(first, fs::read(d.join("params.json")).unwrap());
}

fn pair_config(rtn_epsilon: f64) -> String {
    let run = |channel: &str, state: &str, eps: f64| {
        format!(
            r#"{{"channel": {{"kind": {channel}}}, "grid": {{"t_end": 4.0, "n_steps": 204}},
  "initial_state": "{state}", "epsilon": {eps}, "train": {{"epochs": 25, "seed": 1}}}}"#
        )
    };
    format!(
        r#"{{"ad": {}, "rtn": {}}}"#,
        run(r#"{"model": "amplitude_damping", "b": 0.05, "lambda": 10.0}"#, "excited_excited", 0.015),
        run(RTN_NON_MARKOV, "plus_excited", rtn_epsilon)
    )
}

#[test]
fn run_all_mismatch_exits_six() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pair.json", &pair_config(0.02));
    assert_eq!(code(&run(&["run-all", "--config", s(&cfg), "--out", s(dir.path())])), 6);
}

#[test]
fn run_all_equals_chained_stages_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let pair = write(dir.path(), "pair.json", &pair_config(0.015));
    let all = dir.path().join("all");
    let out = run(&["run-all", "--config", s(&pair), "--out", s(&all), "--plots"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(all.join("comparison.json").exists());
    assert!(all.join("ad/prediction.svg").exists() && all.join("rtn/prediction.svg").exists());

    let again = dir.path().join("again");
    assert_eq!(code(&run(&["run-all", "--config", s(&pair), "--out", s(&again), "--plots"])), 0);
    assert_eq!(
        fs::read(all.join("comparison.json")).unwrap(),
        fs::read(again.join("comparison.json")).unwrap()
    );

    // Chain the stage commands by hand on the rtn half of the pair.
    let text = fs::read_to_string(&pair).unwrap();
    let rtn_cfg = &text[text.find(r#""rtn": "#).unwrap() + 7..text.len() - 1];
    let cfg = write(dir.path(), "rtn.json", rtn_cfg);
    let manual = dir.path().join("manual");
    for stage in ["simulate", "dataset", "train", "predict", "score"] {
        let out = run(&[stage, "--config", s(&cfg), "--out", s(&manual)]);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in [
        "trajectory.csv",
        "dataset.csv",
        "params.json",
        "loss.csv",
        "predictions.csv",
        "report.json",
        "segments.csv",
    ] {
        assert_eq!(fs::read(all.join("rtn").join(f)).unwrap(), fs::read(manual.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_all_needs_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["run-all", "--out", s(dir.path())])), 2);
}
