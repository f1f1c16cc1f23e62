use std::path::Path;
use std::process::{Command, Output};

const BLOBS: &str = "synth:blobs:per_class=40";

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbcoreset"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn select_args<'a>(out_dir: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "select",
        "--format",
        BLOBS,
        "--k",
        "8",
        "--outer-iters",
        "30",
        "--outer-lr",
        "0.1",
        "--control-variate",
        "--out",
        out_dir,
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn project_prints_the_projection() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("z.txt"), "1.5\n0.2\n-0.3\n").unwrap();
    let out = run(&["project", "--input", "z.txt", "--k", "2", "--out", "res"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1.0\n0.2\n0.0\n");
    assert_eq!(std::fs::read_to_string(dir.path().join("res/probabilities.txt")).unwrap(), "1.0\n0.2\n0.0\n");
}

#[test]
fn select_then_eval_reuses_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&select_args("run", &["--trace", "run/trace.jsonl"]), dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.jsonl", "coreset.txt", "probabilities.txt", "model.bin", "trace.jsonl"] {
        assert!(dir.path().join("run").join(f).exists(), "{f} missing");
    }
    let coreset = std::fs::read_to_string(dir.path().join("run/coreset.txt")).unwrap();
    assert_eq!(coreset.lines().count(), 8);
    let trace = std::fs::read_to_string(dir.path().join("run/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 30);

    let metrics = std::fs::read_to_string(dir.path().join("run/metrics.jsonl")).unwrap();
    let selection: serde_json::Value = metrics
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["method"] == "selection")
        .unwrap();

    let out = run(&["eval", "--format", BLOBS, "--model", "run/model.bin"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let eval: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval["accuracy"], selection["accuracy"]);
}

#[test]
fn reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        let out = run(&select_args(d, &["--noise", "symmetric:0.2", "--validation-size", "20", "--baselines", "uniform,kcenter"]), dir.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["metrics.jsonl", "coreset.txt", "probabilities.txt", "model.bin"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.ini"),
        "# shared\n[common]\nformat = synth:blobs:per_class=40\n[select]\nk = 3\nouter-iters = 10\nouter-lr = 0.1\n",
    )
    .unwrap();
    let from_file = run(&["select", "--config", "run.ini", "--out", "f"], dir.path());
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    let n = std::fs::read_to_string(dir.path().join("f/coreset.txt")).unwrap().lines().count();
    assert_eq!(n, 3);

    let overridden = run(&["select", "--config", "run.ini", "--k", "6", "--out", "g"], dir.path());
    assert_eq!(code(&overridden), 0);
    let n = std::fs::read_to_string(dir.path().join("g/coreset.txt")).unwrap().lines().count();
    assert_eq!(n, 6);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&run(&["--help"], p)), 0);
    assert_eq!(code(&run(&["select", "--no-such-flag"], p)), 1);
    assert_eq!(code(&run(&["select", "--format", "parquet"], p)), 1);
    assert_eq!(code(&run(&["select", "--format", BLOBS, "--k", "0"], p)), 1);
    assert_eq!(code(&run(&["select", "--format", "csv", "--data", "missing.csv"], p)), 2);

    std::fs::write(p.join("bad.csv"), "label,f0,f1\n0,1.0,2.0\n1,3.0\n").unwrap();
    assert_eq!(code(&run(&["select", "--format", "csv", "--data", "bad.csv"], p)), 2);

    std::fs::write(p.join("z.txt"), "0.5\nabc\n").unwrap();
    assert_eq!(code(&run(&["project", "--input", "z.txt", "--k", "1"], p)), 2);
}

#[test]
fn csv_input_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("label,f0,f1\n");
    for i in 0..60 {
        let (label, x) = if i % 2 == 0 { (3, -2.0) } else { (7, 2.0) };
        csv.push_str(&format!("{label},{},{}\n", x + 0.01 * i as f64, 0.5));
    }
    std::fs::write(dir.path().join("train.csv"), csv).unwrap();
    let out = run(
        &["select", "--format", "csv", "--data", "train.csv", "--k", "4", "--outer-iters", "10", "--outer-lr", "0.1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"method\":\"selection\""));
}

#[test]
fn experiment_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cases: [&[&str]; 4] = [
        &["baseline", "--format", BLOBS, "--k", "8", "--method", "herding"],
        &["cl", "--format", "synth:blobs:classes=4,dim=4,per_class=30", "--tasks", "2", "--memory", "10", "--outer-iters", "5"],
        &["stream", "--format", BLOBS, "--memory", "10", "--stream-batch", "20", "--outer-iters", "5"],
        &["features", "--format", "synth:featbed:n=300,informative=3,noise=5", "--k", "3", "--outer-iters", "10", "--learner", "ridge"],
    ];
    for args in cases {
        let out = run(args, p);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty());
    }
    assert_eq!(code(&run(&["stream", "--format", BLOBS, "--stream-batch", "0"], p)), 1);
    assert_eq!(code(&run(&["features", "--format", BLOBS, "--k", "5"], p)), 1);
}
