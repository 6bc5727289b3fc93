use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_catalog.csv")
}

fn fuzzyburst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzyburst"))
        .args(args)
        .env_remove("FUZZYBURST_OUTDIR")
        .output()
        .unwrap()
}

fn run_fixture(outdir: &Path, extra: &[&str]) -> Output {
    let input = fixture();
    let mut args = vec!["run", "--input", input.to_str().unwrap(), "--outdir", outdir.to_str().unwrap()];
    args.extend_from_slice(extra);
    fuzzyburst(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn key(text: &str, name: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name}=")))
        .unwrap_or_else(|| panic!("no {name}= line"))
        .to_string()
}

#[test]
fn run_writes_full_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture(dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let expected = [
        "run_config.txt",
        "exclusions.txt",
        "memberships_k3.csv",
        "memberships_k5.csv",
        "hard_labels_k3.csv",
        "hard_labels_k5.csv",
        "summary_k3.csv",
        "summary_k5.csv",
        "membership_report_k3.csv",
        "membership_report_k5.csv",
        "indices_k3.txt",
        "indices_k5.txt",
        "crosstab_3x5.csv",
        "pca_scores.csv",
        "pca_variance.csv",
        "fig1.tsv",
        "fig2.tsv",
        "fig3.tsv",
        "fig4.tsv",
        "fig5.tsv",
        "fig6.tsv",
    ];
    for name in expected {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    // no staging directory left behind
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), expected.len());

    let exclusions = fs::read_to_string(dir.path().join("exclusions.txt")).unwrap();
    assert_eq!(exclusions.lines().count(), 4);
    assert!(stdout(&out).contains("retained=160 excluded=4"));
}

#[test]
fn missing_input_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = fuzzyburst(&["run", "--input", "/no/such/catalog.csv", "--outdir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/catalog.csv"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = fuzzyburst(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fuzzyburst(&["config", "--init", "kmeans"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_prints_defaults() {
    let out = fuzzyburst(&["config"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("fuzzyburst "));
    assert_eq!(key(&text, "r"), "1.3");
    assert_eq!(key(&text, "k"), "3,5");
    assert_eq!(key(&text, "seed"), "20200101");
}

#[test]
fn overrides_are_echoed() {
    let out = fuzzyburst(&["config", "--seed", "42", "--r", "1.5", "--k", "2,4", "--init", "deterministic-stripes"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(key(&text, "seed"), "42");
    assert_eq!(key(&text, "r"), "1.5");
    assert_eq!(key(&text, "k"), "2,4");
    assert_eq!(key(&text, "init"), "deterministic-stripes");

    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture(dir.path(), &["--seed", "42"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let saved = fs::read_to_string(dir.path().join("run_config.txt")).unwrap();
    assert_eq!(key(&saved, "seed"), "42");
}

#[test]
fn outdir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture();
    let out = Command::new(env!("CARGO_BIN_EXE_fuzzyburst"))
        .args(["run", "--input", input.to_str().unwrap(), "--k", "3"])
        .env("FUZZYBURST_OUTDIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("memberships_k3.csv").is_file());
}

#[test]
fn failed_run_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("out");
    // K must be below the number of retained bursts
    let out = run_fixture(&outdir, &["--k", "3,500"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("k=500"));
    let leftovers = fs::read_dir(&outdir).map(|d| d.count()).unwrap_or(0);
    assert_eq!(leftovers, 0);

    let out = run_fixture(&outdir, &["--r", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn membership_ranking_is_non_increasing_per_cluster() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_fixture(dir.path(), &[]).status.success());
    let text = fs::read_to_string(dir.path().join("fig5.tsv")).unwrap();
    let mut prev: Option<(u32, f64)> = None;
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split('\t').collect();
        let cluster: u32 = cells[0].parse().unwrap();
        let m: f64 = cells[2].parse().unwrap();
        if let Some((c, p)) = prev {
            if c == cluster {
                assert!(m <= p, "cluster {cluster}: {m} after {p}");
            }
        }
        prev = Some((cluster, m));
    }
}

#[test]
fn crosstab_rows_sum_to_five_cluster_sizes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_fixture(dir.path(), &[]).status.success());
    let indices = fs::read_to_string(dir.path().join("indices_k5.txt")).unwrap();
    let sizes: Vec<u64> = key(&indices, "cluster_sizes")
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    let tab = fs::read_to_string(dir.path().join("crosstab_3x5.csv")).unwrap();
    let rows: Vec<Vec<&str>> = tab.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for (row, size) in rows.iter().zip(&sizes) {
        let counts: u64 = row[1..4].iter().map(|c| c.parse::<u64>().unwrap()).sum();
        assert_eq!(counts, *size);
        assert_eq!(row[4].parse::<u64>().unwrap(), *size);
        let pct: f64 = row[5..8].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((pct - 100.0).abs() < 0.01);
    }
}

#[test]
fn convert_joins_tables() {
    let dir = tempfile::tempdir().unwrap();
    let duration = dir.path().join("duration.txt");
    let flux = dir.path().join("flux.txt");
    fs::write(&duration, "105 0.320 0.05 -0.1 1.150 0.09 -0.2\n").unwrap();
    fs::write(
        &flux,
        "105 1.1e-8 1e-9 2.2e-8 1e-9 6.0e-8 2e-9 1.5e-8 3e-9 3.1 0.1 0.1 2.5 0.1 0.1 1.9 0.1 0.1\n",
    )
    .unwrap();
    let output = dir.path().join("catalog.csv");
    let out = fuzzyburst(&[
        "convert",
        "--duration",
        duration.to_str().unwrap(),
        "--flux",
        flux.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&output).unwrap();
    assert!(text.starts_with("trigger_id,t50,t90,f1,f2,f3,f4,p64,p256,p1024\n"));
    assert!(text.lines().nth(1).unwrap().starts_with("105,"));
}
