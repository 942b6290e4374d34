//! The `lightgcn` binary: subcommands, output files and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lightgcn::synthetic::{community_dataset, CommunityConfig};
use lightgcn::Format;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lightgcn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let cfg = CommunityConfig { num_users: 60, num_items: 80, num_interactions: 900, ..Default::default() };
    community_dataset(&cfg, 0.2).unwrap().save_dir(&data, Format::AdjacencyList).unwrap();
    data
}

fn value_after<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(key)).expect("key present").trim()
}

#[test]
fn stats_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.txt");
    fs::write(&file, "0 0 1\n1 1\n").unwrap();
    let o = run(&["stats", "--dataset", file.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("users=2") && text.contains("items=2") && text.contains("interactions=3"));
    assert!(text.contains("density=0.75000"));
    assert!(dir.path().join("stats.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--no-such-flag", "1"]).status.code(), Some(1));
    let missing = dir.path().join("missing.txt");
    assert_eq!(run(&["stats", "--dataset", missing.to_str().unwrap()]).status.code(), Some(2));
    let data = dataset(dir.path());
    let out = dir.path().join("runs");
    let base = ["train", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(run(&[&base[..], &["--lr", "-1"]].concat()).status.code(), Some(1));
    assert_eq!(run(&[&base[..], &["--epochs", "many"]].concat()).status.code(), Some(1));
    assert_eq!(run(&[&base[..], &["--scheme", "bogus"]].concat()).status.code(), Some(1));
}

#[test]
fn train_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("runs");
    let o = run(&[
        "train", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--epochs", "6", "--dim", "8", "--layers", "2", "--scheme", "l1-r", "--lr", "0.01",
        "--lambda", "0.0001", "--batch-size", "128", "--seed", "3", "--cutoff", "5,10", "--bins", "4",
        "--diffusion-alpha", "0.2", "--diffusion-steps", "5", "--eval-every", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = PathBuf::from(value_after(&stdout(&o), "run_dir="));
    for f in ["history.csv", "report.json", "report.csv", "checkpoint.txt", "run.json", "spec.txt"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    assert!(!run_dir.join("INCOMPLETE").exists());

    let history = fs::read_to_string(run_dir.join("history.csv")).unwrap();
    let header = history.lines().next().unwrap();
    assert!(header.starts_with("epoch,loss"));
    assert!(header.contains("appnp_recall@5") && header.contains("lgcn_ndcg@10"));
    assert_eq!(history.lines().count(), 7);

    let report = fs::read_to_string(run_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    // two models x two cutoffs
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().any(|r| r.starts_with("APPNP,5,")) && rows.iter().any(|r| r.starts_with("LightGCN,10,")));
    let header = report.lines().next().unwrap();
    assert!(header.contains("bin3_ndcg") && !header.contains("bin4_"));

    let reports: Vec<lightgcn::MetricsReport> =
        serde_json::from_str(&fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert!(reports.iter().all(|r| r.fairness.as_ref().is_some_and(|f| f.bins.len() == 4)));
}

#[test]
fn sweep_then_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("runs");
    let config = dir.path().join("sweep.conf");
    fs::write(
        &config,
        format!("# small sweep\ndataset = {}\nepochs = 4\ndim = 8\neval_every = 2\n", data.display()),
    )
    .unwrap();
    let o = run(&[
        "sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--layers", "1,2", "--scheme", "lightgcn,l1-l,l", "--jobs", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = PathBuf::from(value_after(&stdout(&o), "table="));
    let csv = fs::read_to_string(&table).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);

    let runs: Vec<PathBuf> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("run.json").exists())
        .collect();
    assert_eq!(runs.len(), 6);
    let plots = dir.path().join("plots");
    let mut args = vec!["plotdata", "--kind", "curves", "--out", plots.to_str().unwrap()];
    args.extend(runs.iter().map(|p| p.to_str().unwrap()));
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curves = fs::read_to_string(plots.join("curves.csv")).unwrap();
    let series: std::collections::BTreeSet<&str> =
        curves.lines().skip(1).map(|l| l.rsplitn(3, ',').nth(2).unwrap()).collect();
    assert_eq!(series.len(), 6);
    // epochs 2 and 4 for each run
    assert_eq!(curves.lines().count(), 1 + 12);

    args[2] = "fairness-bars";
    assert!(run(&args).status.success());
    let bars = fs::read_to_string(plots.join("fairness-bars.csv")).unwrap();
    assert_eq!(bars.lines().count(), 1 + 6 * 4);

    let missing = run(&["plotdata", "--kind", "curves", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn alpha_search_picks_from_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("runs");
    let o = run(&[
        "alpha-search", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--epochs", "3", "--dim", "8", "--diffusion-alpha", "0.1,0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let best: f64 = value_after(&stdout(&o), "best_alpha=").parse().unwrap();
    assert!(best == 0.1 || best == 0.5);
    assert_eq!(fs::read_to_string(out.join("alpha_search.csv")).unwrap().lines().count(), 3);
}
