use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semoverlap_cli::IndexBundle;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semoverlap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ingest(dir: &TempDir, input: &Path, extra: &[&str]) -> PathBuf {
    let bundle = dir.path().join("bundle.json");
    let mut args = vec!["ingest", input.to_str().unwrap(), bundle.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    bundle
}

fn cities_bundle(dir: &TempDir) -> PathBuf {
    let table = fixture("cities_sim.tsv");
    ingest(
        dir,
        &fixture("cities.txt"),
        &["--sim", "table", "--table", table.to_str().unwrap()],
    )
}

fn ranked(out: &str) -> Vec<(usize, u32, f64)> {
    out.lines()
        .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn ingest_counts_distinct_tokens() {
    let dir = TempDir::new().unwrap();
    // apple, banana, 42, cherry, date, 7
    let b = ingest(&dir, &fixture("three_lines.txt"), &[]);
    let bundle = IndexBundle::load(&b).unwrap();
    assert_eq!(bundle.tokens.len(), 6);
    assert_eq!(bundle.sets.len(), 3);
    assert_eq!(bundle.sets[0].len(), 3);

    let b = ingest(&dir, &fixture("three_lines.txt"), &["--drop-numeric"]);
    let bundle = IndexBundle::load(&b).unwrap();
    assert_eq!(bundle.tokens, vec!["apple", "banana", "cherry", "date"]);
}

#[test]
fn blank_lines_warn_and_succeed() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("b.json");
    let o = run(&[
        "ingest",
        fixture("with_blank.txt").to_str().unwrap(),
        bundle.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains("line 2: empty set skipped"),
        "{}",
        stderr(&o)
    );
    assert!(stdout(&o).contains("2 sets"));
}

#[test]
fn second_city_set_ranks_first() {
    let dir = TempDir::new().unwrap();
    let b = cities_bundle(&dir);
    let q = fixture("cities_query.txt");
    let args = [
        "query",
        b.to_str().unwrap(),
        q.to_str().unwrap(),
        "--k",
        "2",
        "--alpha",
        "0.7",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "1\t1\t4.530000000");
    let r = ranked(&out);
    assert_eq!(r[1].1, 0);
    assert!((r[1].2 - 4.09).abs() < 1e-9);

    let mut base = args.to_vec();
    base.push("--baseline");
    let o = run(&base);
    assert_eq!(stdout(&o), out);
}

#[test]
fn inline_query_equal_to_a_set() {
    let dir = TempDir::new().unwrap();
    let b = ingest(&dir, &fixture("three_lines.txt"), &[]);
    let o = run(&["query", b.to_str().unwrap(), "cherry\tbanana", "--k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1\t1\t2.000000000\n");
}

#[test]
fn too_few_results_is_a_warning() {
    let dir = TempDir::new().unwrap();
    let b = ingest(&dir, &fixture("three_lines.txt"), &[]);
    let o = run(&["query", b.to_str().unwrap(), "cherry", "--k", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(ranked(&stdout(&o)).len(), 1);
    assert!(stderr(&o).contains("only 1 sets overlap"), "{}", stderr(&o));
}

#[test]
fn stats_and_partitions_are_printed() {
    let dir = TempDir::new().unwrap();
    let b = cities_bundle(&dir);
    let q = fixture("cities_query.txt");
    let o = run(&[
        "query",
        b.to_str().unwrap(),
        q.to_str().unwrap(),
        "--k",
        "1",
        "--alpha",
        "0.7",
        "--partitions",
        "2",
        "--stats",
        "--per-partition",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let stats = out
        .lines()
        .find_map(|l| l.strip_prefix("stats\t"))
        .expect("stats line");
    let v: serde_json::Value = serde_json::from_str(stats).unwrap();
    assert_eq!(v["exact"], true);
    assert_eq!(v["query_cardinality"], 6);
    let parts: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("partition\t"))
        .collect();
    assert!(!parts.is_empty());
    assert!(parts.iter().any(|l| l.ends_with("\t1\t4.530000000")));
}

#[test]
fn bundle_round_trip_keeps_results() {
    let dir = TempDir::new().unwrap();
    let b = cities_bundle(&dir);
    let loaded = IndexBundle::load(&b).unwrap();
    let again = dir.path().join("again.json");
    loaded.save(&again).unwrap();
    assert_eq!(IndexBundle::load(&again).unwrap(), loaded);
    let rebuilt = semoverlap::InvertedIndex::build(&loaded.collection().unwrap());
    assert_eq!(loaded.index().unwrap(), rebuilt);

    let q = fixture("cities_query.txt");
    let a = run(&[
        "query",
        b.to_str().unwrap(),
        q.to_str().unwrap(),
        "--alpha",
        "0.7",
    ]);
    let c = run(&[
        "query",
        again.to_str().unwrap(),
        q.to_str().unwrap(),
        "--alpha",
        "0.7",
    ]);
    assert_eq!(stdout(&a), stdout(&c));
}

#[test]
fn version_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let b = cities_bundle(&dir);
    let text = std::fs::read_to_string(&b).unwrap();
    std::fs::write(
        &b,
        text.replace("\"format_version\":1", "\"format_version\":99"),
    )
    .unwrap();
    let o = run(&["query", b.to_str().unwrap(), "LA"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("format version 99"), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let b = cities_bundle(&dir);
    let b = b.to_str().unwrap();
    assert_eq!(run(&["query", b, "LA", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        run(&["query", b, "LA", "--sim", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["query", b, "LA", "--k", "0"]).status.code(), Some(1));
    assert_eq!(
        run(&["query", b, "LA", "--alpha", "1.5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["query", "/nonexistent/bundle.json", "LA"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(
        run(&["query", bad.to_str().unwrap(), "LA"]).status.code(),
        Some(2)
    );
}

fn synthetic(dir: &TempDir) -> (PathBuf, PathBuf) {
    let out = dir.path().join("synth");
    let o = run(&[
        "generate",
        out.to_str().unwrap(),
        "--sets",
        "200",
        "--queries",
        "6",
        "--seed",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let emb = out.join("embeddings.txt");
    let bundle = ingest(
        dir,
        &out.join("sets.txt"),
        &["--sim", "cosine", "--embeddings", emb.to_str().unwrap()],
    );
    (bundle, out.join("queries.txt"))
}

#[test]
fn fixed_seed_runs_are_identical() {
    let dir = TempDir::new().unwrap();
    let (b, queries) = synthetic(&dir);
    let first = std::fs::read_to_string(&queries).unwrap();
    let q = first.lines().next().unwrap();
    let args = [
        "query",
        b.to_str().unwrap(),
        q,
        "--seed",
        "7",
        "--workers",
        "1",
        "--partitions",
        "1",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(!stdout(&a).is_empty());
    assert_eq!(stdout(&a), stdout(&run(&args)));
}

#[test]
fn bench_report_accounts_for_every_candidate() {
    let dir = TempDir::new().unwrap();
    let (b, queries) = synthetic(&dir);
    let csv = dir.path().join("report.csv");
    let o = run(&[
        "bench",
        b.to_str().unwrap(),
        queries.to_str().unwrap(),
        "--baseline",
        "--k",
        "5",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][0], "mean");
    for r in &rows[..6] {
        let n = |name: &str| r[col(name)].parse::<f64>().unwrap();
        assert!(
            n("em_calls") + n("em_early_terminated") + n("no_em")
                <= n("candidates") - n("iub_pruned")
        );
        assert!(n("em_calls") <= n("baseline_em_calls"));
        assert!(n("top1_score") > 0.0);
    }
}

#[test]
fn bench_single_query_to_stdout() {
    let dir = TempDir::new().unwrap();
    let b = ingest(&dir, &fixture("three_lines.txt"), &[]);
    let q = dir.path().join("q.txt");
    std::fs::write(&q, "apple\n").unwrap();
    let o = run(&[
        "bench",
        b.to_str().unwrap(),
        q.to_str().unwrap(),
        "--k",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("query,query_cardinality,candidates"));
    assert!(lines[1].starts_with("1,1,"));
    assert!(lines[1].ends_with(",1.000000000"));
    assert!(lines[2].starts_with("mean,"));
}
