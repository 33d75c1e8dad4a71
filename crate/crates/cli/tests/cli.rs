use std::path::Path;
use std::process::{Command, Output};

fn sheafctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheafctx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_corpus(dir: &Path, name: &str, file: &str) -> String {
    let path = dir.join(file);
    let o = sheafctx(&["corpus", name, "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    path.to_str().unwrap().to_owned()
}

#[test]
fn cf_of_pr_box_and_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let pr = write_corpus(dir.path(), "pr_box(0)", "pr0.json");
    let o = sheafctx(&["cf", &pr]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("CF = 1/1"));
    let o = sheafctx(&["cf", "corpus:uniform(2,2,2)"]);
    assert!(stdout(&o).contains("CF = 0/1"));
}

#[test]
fn cf_of_noisy_pr_box() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noisy.json");
    // 3/4 PR box + 1/4 uniform: 7/16 on allowed pairs, 1/16 elsewhere
    let allowed = |c: usize, s: usize| (s >> 1) ^ (s & 1) == (c >> 1) & (c & 1);
    let tables: Vec<Vec<&str>> = (0..4)
        .map(|c| {
            (0..4)
                .map(|s| if allowed(c, s) { "7/16" } else { "1/16" })
                .collect()
        })
        .collect();
    let json = serde_json::json!({
        "scenario": {"parties": 2, "settings": 2, "outcomes": 2},
        "tables": tables,
    });
    std::fs::write(&path, json.to_string()).unwrap();
    let o = sheafctx(&["cf", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("CF = 1/2"));
}

#[test]
fn marginals_of_pr_box_are_one_half() {
    let o = sheafctx(&["marginals", "corpus:pr_box(0)", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.ends_with(": 1/2 1/2")));
}

#[test]
fn parity_scan_422() {
    let o = sheafctx(&["parity-scan", "4", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("unsatisfiable=65504"));
}

#[test]
fn parity_scan_too_large_is_a_resource_error() {
    assert_eq!(sheafctx(&["parity-scan", "5", "2"]).status.code(), Some(5));
}

#[test]
fn parse_and_precondition_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(
        sheafctx(&["cf", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(sheafctx(&["cf", "missing.json"]).status.code(), Some(2));

    // Alice's marginal depends on Bob's setting
    let signaling = dir.path().join("signaling.json");
    let json = serde_json::json!({
        "scenario": {"parties": 2, "settings": 2, "outcomes": 2},
        "tables": [["1", "0", "0", "0"], ["0", "0", "1", "0"], ["1/4", "1/4", "1/4", "1/4"], ["1/4", "1/4", "1/4", "1/4"]],
    });
    std::fs::write(&signaling, json.to_string()).unwrap();
    let path = signaling.to_str().unwrap();
    assert_eq!(sheafctx(&["cf", path]).status.code(), Some(3));
    let o = sheafctx(&["nosignaling", path]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("signaling"));
    assert!(sheafctx(&["nosignaling", "corpus:ghz_322"])
        .status
        .success());
}

#[test]
fn reconstruct_and_classify_tables() {
    let dir = tempfile::tempdir().unwrap();
    let family = dir.path().join("tables.json");
    let o = sheafctx(&["reconstruct-tables", "--family", family.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        include_str!("../../core/data/nonamcc_family.csv")
    );
    let again = sheafctx(&["reconstruct-tables"]);
    assert_eq!(stdout(&again), stdout(&o));

    let f = family.to_str().unwrap();
    let amcc = sheafctx(&["classify", f, "--q", "1/8"]);
    assert_eq!(stdout(&amcc).lines().next(), Some("AMCC"));
    let non = sheafctx(&["classify", f, "--q", "3/16"]);
    assert_eq!(stdout(&non).lines().next(), Some("non-AMCC"));
    assert!(stdout(&non).contains("CF = 1/1"));
    assert_eq!(sheafctx(&["classify", f]).status.code(), Some(2));
}

#[test]
fn uncorrected_plan_fails_verification() {
    let o = sheafctx(&["reconstruct-tables", "--as-listed", "--json"]);
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["dimension"], 0);
}

#[test]
fn emitted_parity_model_round_trips_through_solve_support() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("amcc.json");
    let o = sheafctx(&[
        "emit-parity-model",
        "4",
        "2",
        "1c00",
        "-o",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsatisfiable"));
    let c = sheafctx(&["classify", model.to_str().unwrap()]);
    assert_eq!(stdout(&c).lines().next(), Some("AMCC"));

    // support of the symmetric model: rigid
    let tables: Vec<Vec<u8>> = (0..16usize)
        .map(|c| {
            let odd = (10..13).contains(&c);
            (0..16u32)
                .map(|s| ((s.count_ones() % 2 == 1) == odd) as u8)
                .collect()
        })
        .collect();
    let support = dir.path().join("support.json");
    let json = serde_json::json!({"scenario": {"parties": 4, "settings": 2, "outcomes": 2}, "tables": tables});
    std::fs::write(&support, json.to_string()).unwrap();
    let csv = dir.path().join("family.csv");
    let o = sheafctx(&[
        "solve-support",
        support.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let family: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(family["dimension"], 0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("\"(0,0,0,0)\",1/8,0,0,1/8"));
}

#[test]
fn search_plans_is_reproducible_across_thread_counts() {
    let args = [
        "search-plans",
        "--seed",
        "5",
        "--trials",
        "100",
        "--counts",
        "4,4,4,4,4,4,4,4,4,4,4,4,4,4,4,4",
    ];
    let one = sheafctx(&[&["--threads", "1"], &args[..]].concat());
    let many = sheafctx(&[&["--threads", "4"], &args[..]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    let hits: serde_json::Value = serde_json::from_slice(&one.stdout).unwrap();
    for hit in hits.as_array().unwrap() {
        assert_eq!(hit["strongly_contextual"], true);
    }
    assert_eq!(
        sheafctx(&["search-plans", "--counts", "9,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_paper_passes() {
    let o = sheafctx(&["verify-paper", "--json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["overall"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 9);
}

#[test]
fn corpus_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_corpus(dir.path(), "ghz_322", "a.json");
    let o = sheafctx(&["classify", &first, "--json"]);
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["class"], "AMCC");
    assert_eq!(c["cf"], "1/1");
}
