use std::path::Path;
use std::process::{Command, Output};

fn unigrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unigrad")).args(args).output().unwrap()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn run_writes_one_csv_per_seed_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = unigrad(&["run", "--algo", "correct-pp", "--env", "linear", "--T", "500", "--seeds", "1..5", "--out", out, "--no-timing"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in 1..=5 {
        let (header, rows) = table(&dir.path().join(format!("run_correct-pp_linear_{seed}.csv")));
        assert_eq!(header.join(","), "round,regret,loss,vbar,queries");
        assert_eq!(rows.last().unwrap()[0], "500");
        assert_eq!(rows.last().unwrap()[4], "500");
    }
    let (header, rows) = table(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 5);
    let q = column(&header, "total_queries");
    let w = column(&header, "wall_ms");
    assert!(rows.iter().all(|r| r[q] == "500" && r[w] == "0"));
    let sidecars = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("config_")).count();
    assert!(sidecars >= 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("algo = bregman\nenv = sc-quadratic\nT = 300\nseeds = 1..2\nout = {}\n", dir.path().display())).unwrap();
    let o = unigrad(&["run", "--config", cfg.to_str().unwrap(), "--T", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = table(&dir.path().join("run_bregman_sc-quadratic_2.csv"));
    assert_eq!(rows.last().unwrap()[0], "200");
}

#[test]
fn bad_names_and_missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--algo", "nope", "--env", "linear", "--out", out],
        vec!["run", "--algo", "bregman", "--env", "nowhere", "--out", out],
        vec!["run", "--algo", "bregman", "--env", "dataset", "--out", out],
        vec!["run", "--algo", "bregman", "--env", "dataset", "--dataset", "/definitely/not/here.svm", "--out", out],
        vec!["compare", "/definitely/not/summary.csv", "--out", out],
    ] {
        assert_eq!(unigrad(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn dataset_environment_reads_libsvm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.svm");
    std::fs::write(&data, "+1 1:0.5 2:-0.25\n-1 1:-0.75 3:0.1\n+1 2:1.0\n-1 1:0.2 2:0.2 3:-0.4\n").unwrap();
    let out = dir.path().to_str().unwrap();
    let o = unigrad(&["run", "--algo", "bregman-pp", "--env", "dataset", "--dataset", data.to_str().unwrap(), "--T", "40", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = table(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn compare_aggregates_and_identical_inputs_differ_by_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(unigrad(&["run", "--algo", "bregman", "--env", "logistic", "--T", "300", "--seeds", "1..4", "--out", out]).status.success());
    let summary = dir.path().join("summary.csv");
    let copy = dir.path().join("copy.csv");
    std::fs::copy(&summary, &copy).unwrap();
    let cmp = dir.path().join("cmp");
    let o = unigrad(&["compare", summary.to_str().unwrap(), copy.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (sh, srows) = table(&summary);
    let regrets: Vec<f64> = srows.iter().map(|r| r[column(&sh, "final_regret")].parse().unwrap()).collect();
    let mean = regrets.iter().sum::<f64>() / 4.0;
    let std = (regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0).sqrt();

    let (ch, crows) = table(&cmp.join("compare.csv"));
    assert_eq!(crows.len(), 2);
    for r in &crows {
        assert_eq!(r[column(&ch, "seeds")], "4");
        let m: f64 = r[column(&ch, "mean_final_regret")].parse().unwrap();
        let s: f64 = r[column(&ch, "std_final_regret")].parse().unwrap();
        assert!((m - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((s - std).abs() <= 1e-9 * std.max(1.0));
        assert_eq!(r[column(&ch, "diff_vs_first")].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn game_rows_report_both_players() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = unigrad(&["run", "--algo", "game-correct-pp", "--env", "game-bilinear", "--T", "400", "--seeds", "1..2", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = table(&dir.path().join("summary.csv"));
    for r in &rows {
        let x: f64 = r[column(&h, "regret_x")].parse().unwrap();
        let y: f64 = r[column(&h, "regret_y")].parse().unwrap();
        let sum: f64 = r[column(&h, "final_regret")].parse().unwrap();
        assert!((x + y - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        assert_eq!(r[column(&h, "total_queries")], "800");
    }
    assert_eq!(unigrad(&["run", "--algo", "bregman", "--env", "game-bilinear", "--out", out]).status.code(), Some(2));
}
