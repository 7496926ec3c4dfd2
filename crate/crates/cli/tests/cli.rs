use std::path::Path;
use std::process::{Command, Output};

fn seqrel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrel"))
        .current_dir(dir)
        .env_remove("SEQREL_OUTPUT_ROOT")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "--epochs", "2", "--hidden-dim", "8", "--heads", "2", "--blocks", "1", "--max-len", "10",
    "--eval-negatives", "20", "--batch-size", "16",
];

fn synthetic(dir: &Path) {
    let o = seqrel(dir, &["synthetic", "--output", "syn.data", "--users", "40", "--items", "60"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn train_report_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synthetic(dir);
    let mut args = vec![
        "train", "--dataset", "syn.data", "--relevance", "power", "--train-positives", "3",
        "--negatives", "2", "--eval-positives", "1,3", "--output", "out",
    ];
    args.extend_from_slice(SMALL);
    let o = seqrel(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.contains("run_id=syn-power-tp3-s42") && out.contains("protocol=mfi k_eval=3"));
    let run = dir.join("out/runs/syn-power-tp3-s42");
    for f in ["config.txt", "epochs.csv", "summary.json", "model.ckpt"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let config = std::fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("negatives = 2"));

    let o = seqrel(dir, &["report", "--dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("| power"));
    assert!(dir.join("out/curves.csv").is_file());

    let o = seqrel(dir, &["evaluate", "--run-dir", "out/runs/syn-power-tp3-s42"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["protocol"], "traditional");
    assert_eq!(lines[1]["k_eval"], 3);
}

#[test]
fn config_file_env_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synthetic(dir);
    std::fs::write(
        dir.join("run.cfg"),
        "dataset = syn.data\nepochs = 5\nhidden-dim = 8\nmax-len = 10\neval-negatives = 20\noutput = from-file\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_seqrel"))
        .current_dir(dir)
        .env("SEQREL_OUTPUT_ROOT", "from-env")
        .args(["train", "--config", "run.cfg", "--epochs", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("epochs_run=1"));
    assert!(dir.join("from-env/runs/syn-baseline-tp1-s42/summary.json").is_file());
    assert!(!dir.join("from-file").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_seqrel"))
        .current_dir(dir)
        .env("SEQREL_OUTPUT_ROOT", "from-env")
        .args(["train", "--config", "run.cfg", "--epochs", "1", "--output", "from-flag"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("from-flag/runs").is_dir());
}

#[test]
fn ingest_writes_cache_usable_for_training() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synthetic(dir);
    let o = seqrel(dir, &["ingest", "--input", "syn.data", "--output", "syn.sqds"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("users=40 "));
    let bytes = std::fs::read(dir.join("syn.sqds")).unwrap();
    assert_eq!(&bytes[..4], b"SQDS");
    let mut args = vec!["train", "--dataset", "syn.sqds", "--format", "cache", "--output", "o"];
    args.extend_from_slice(SMALL);
    let o = seqrel(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn failures_are_one_line_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cases: &[(&[&str], &str, i32)] = &[
        (&["train", "--dataset", "missing.data"], "kind=io", 1),
        (&["train", "--relevance", "cubic", "--dataset", "x"], "kind=usage", 2),
        (&["train"], "kind=invalid_config", 1),
        (&["train", "--dataset", "x", "--eval-positives", "0"], "kind=invalid_config", 1),
        (&["report", "--dir", "."], "kind=invalid_argument", 1),
        (&["frobnicate"], "kind=usage", 2),
    ];
    for (args, kind, code) in cases {
        let o = seqrel(dir, args);
        let err = stderr(&o);
        assert_eq!(o.status.code(), Some(*code), "{args:?}: {err}");
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: ") && err.contains(kind), "{args:?}: {err}");
    }
}
