use std::path::Path;
use std::process::{Command, Output};

fn greenselect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenselect")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bench_run_csv_and_model_eval() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().to_str().unwrap();
    let out = greenselect(&[
        "bench", "run", "--repeats", "1", "--clock", "step", "--format", "csv", "--export-models", export,
        "--carbon-intensity", "400",
    ]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], greenselect::report::CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("(C) Cascading,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gCO2e"));

    let file = |name: &str| Path::new(export).join(name).to_str().unwrap().to_string();
    let eval = stdout(&greenselect(&[
        "model", "eval", "--model", &file("router.json"), "--tree", &file("tree.json"), "--net", &file("net.json"),
    ]));
    let routing_row: Vec<&str> = lines[4].split(',').collect();
    assert!(eval.contains(&format!("fraction_of_g {}", routing_row[1])), "{eval} vs {}", lines[4]);
}

#[test]
fn tree_train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.json");
    let path = path.to_str().unwrap();
    stdout(&greenselect(&["model", "train", "--kind", "tree", "--out", path]));
    let text = stdout(&greenselect(&["model", "eval", "--model", path]));
    let acc: f64 = text.trim().strip_prefix("accuracy ").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn bad_inputs_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = greenselect(&["model", "eval", "--model", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = greenselect(&["bench", "run", "--epsilon", "2"]);
    assert!(!out.status.success());
}
