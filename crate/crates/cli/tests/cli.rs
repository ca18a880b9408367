use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use bidguard::assign::solve_assignment;
use bidguard::conference::load_conference;
use bidguard::features::load_features;
use bidguard::scoring::{cap_positive_bids, predict_scores, ScoreModel};

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn bidguard(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bidguard"));
    cmd.arg("--config").arg(demo_config()).args(args);
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bidguard(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bidguard(args).status.code().expect("exit code")
}

/// Corpus, conference, features and a clean model, built once.
struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }

    fn data<'a>(&'a self, extra: &[&'a str]) -> Vec<String> {
        let mut v = vec!["--conference".into(), self.path("conf"), "--features".into(), self.path("feat")];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }
}

fn workspace() -> &'static Workspace {
    static WS: OnceLock<Workspace> = OnceLock::new();
    WS.get_or_init(|| {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ok(&["gen-corpus", "--out", &ws.path("corpus.jsonl")]);
        ok(&["gen-conference", "--corpus", &ws.path("corpus.jsonl"), "--out", &ws.path("conf")]);
        ok(&["featurize", "--conference", &ws.path("conf"), "--out", &ws.path("feat")]);
        let mut train = vec!["train".to_string()];
        train.extend(ws.data(&["--out"]));
        train.push(ws.path("model/model.bin"));
        ok(&train.iter().map(String::as_str).collect::<Vec<_>>());
        ws
    })
}

fn run_with(ws: &Workspace, command: &str, extra: &[&str]) -> Output {
    let mut args = vec![command.to_string()];
    args.extend(ws.data(extra));
    bidguard(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn header(path: &str) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn staged_commands_write_their_artifacts() {
    let ws = workspace();
    assert!(Path::new(&ws.path("conf/manifest.json")).exists());
    assert_eq!(header(&ws.path("conf/clusters.csv")), "cluster_id,paper_id");
    assert_eq!(header(&ws.path("model/scores.csv")), "reviewer_index,paper_index,score");

    let plan = ws.path("plan.json");
    let out = run_with(
        ws,
        "attack",
        &["--model", &ws.path("model/model.bin"), "--kind", "whitebox", "--target", "3,7", "--ma", "3", "--out", &plan],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let gain = stdout.lines().find_map(|l| l.strip_prefix("predicted_gain ")).unwrap();
    assert_eq!(gain.split('.').nth(1).map(str::len), Some(6));
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(parsed["party"].as_array().unwrap().len(), 3);
    assert_eq!(parsed["party"][0]["reviewer"], 3);

    let poisoned = ws.path("poisoned/model.bin");
    assert!(run_with(ws, "train", &["--plan", &plan, "--out", &poisoned]).status.success());
    let verdicts = ws.path("verdicts.csv");
    let out = run_with(ws, "defend", &["--plan", &plan, "--model", &poisoned, "--md", "3", "--out", &verdicts]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&verdicts), "reviewer_index,paper_index,score,robust_score,removed,party");

    let assignment = ws.path("assignment.csv");
    ok(&["assign", "--scores", &ws.path("poisoned/scores.csv"), "--candidates", &verdicts, "--out", &assignment]);
    let text = std::fs::read_to_string(&assignment).unwrap();
    let mut per_paper = std::collections::BTreeMap::<usize, usize>::new();
    for line in text.lines().skip(1) {
        let paper: usize = line.split(',').next().unwrap().parse().unwrap();
        *per_paper.entry(paper).or_default() += 1;
    }
    // Every paper lists exactly R rows, deficits included.
    assert!(per_paper.values().all(|&c| c == 3));
}

#[test]
fn assignment_from_scores_file_matches_library() {
    let ws = workspace();
    let out = ws.path("plain.csv");
    let stdout = ok(&["assign", "--scores", &ws.path("model/scores.csv"), "--r", "2", "--p", "4", "--out", &out]);

    let conf = load_conference(Path::new(&ws.path("conf"))).unwrap();
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    let (x, _) = load_features(Path::new(&ws.path("feat")), m * n).unwrap();
    let model = ScoreModel::load(Path::new(&ws.path("model/model.bin"))).unwrap();
    let scores = predict_scores(&model, &x, m, n).unwrap();
    let expected = solve_assignment(&scores, None, 2, 4).unwrap();

    let mut pairs: Vec<(usize, usize)> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| {
            let (p, r) = l.split_once(',').unwrap();
            let r: i64 = r.parse().unwrap();
            (r >= 0).then(|| (r as usize, p.parse().unwrap()))
        })
        .collect();
    pairs.sort_by_key(|&(r, p)| (p, r));
    assert_eq!(pairs, expected.pairs);
    assert!(stdout.contains(&format!("total_score {:.6}", expected.total_score)));
}

#[test]
fn training_uses_the_capped_bids() {
    let ws = workspace();
    let conf = load_conference(Path::new(&ws.path("conf"))).unwrap();
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    let (x, _) = load_features(Path::new(&ws.path("feat")), m * n).unwrap();
    // demo.json: seed 3, u_cap 6, lambda 1
    let y = cap_positive_bids(conf.bids(), 6, 3).unwrap().labels();
    let direct = bidguard::scoring::train_ridge(&x, &y, 1.0).unwrap();
    let saved = ScoreModel::load(Path::new(&ws.path("model/model.bin"))).unwrap();
    assert_eq!(direct.weights(), saved.weights());
}

#[test]
fn exit_codes() {
    let ws = workspace();
    let model = ws.path("model/model.bin");
    let sink = ws.path("unused.json");
    let status = |extra: &[&str]| run_with(ws, "attack", extra).status.code().unwrap();
    // Malformed or out-of-range targets are parameter errors.
    assert_eq!(status(&["--model", &model, "--kind", "whitebox", "--target", "3;7", "--out", &sink]), 2);
    assert_eq!(status(&["--model", &model, "--kind", "whitebox", "--target", "999,0", "--out", &sink]), 2);
    assert_eq!(status(&["--kind", "whitebox", "--target", "1,1", "--out", &sink]), 2);
    assert_eq!(status(&["--kind", "simple", "--target", "1,1", "--ma", "2", "--out", &sink]), 2);
    // A model trained under another seed does not fit these labels.
    let other_seed = run_with(ws, "defend", &["--model", &model, "--md", "2", "--out", &sink, "--seed", "4"]);
    assert_eq!(other_seed.status.code(), Some(2));
    let k_too_big = run_with(ws, "defend", &["--model", &model, "--md", "2", "--k", "1000", "--out", &sink]);
    assert_eq!(k_too_big.status.code(), Some(2));
    // Missing inputs are not parameter errors.
    assert_eq!(code(&["featurize", "--conference", "/nonexistent/conf", "--out", &sink]), 1);
    assert_eq!(code(&["report", "--dir", "/nonexistent/reports"]), 1);
    assert_eq!(code(&["no-such-command"]), 2);
}

#[test]
fn simple_attack_bids_only_on_the_target() {
    let ws = workspace();
    let plan = ws.path("simple.json");
    assert!(run_with(ws, "attack", &["--kind", "simple", "--target", "2,5", "--out", &plan]).status.success());
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    let bids: Vec<u64> = parsed["party"][0]["bids"].as_array().unwrap().iter().map(|b| b.as_u64().unwrap()).collect();
    assert_eq!(bids.iter().filter(|&&b| b > 0).count(), 1);
    assert_eq!(bids[5], 3);
    assert!(parsed["predicted_gain"].is_null());
}

#[test]
fn evaluate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    let reports = reports.to_str().unwrap();
    ok(&["evaluate", "--out", reports, "--threads", "2"]);
    let summary = ok(&["report", "--dir", reports]);
    assert_eq!(summary, bidguard::pipeline::emit_report(Path::new(reports)).unwrap());
    assert!(summary.lines().any(|l| l.starts_with("quality md=0")));
}

#[test]
fn generation_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    ok(&["gen-conference", "--out", &p("a"), "--seed", "11"]);
    ok(&["gen-conference", "--out", &p("b"), "--seed", "11"]);
    ok(&["gen-conference", "--out", &p("c"), "--seed", "12"]);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("manifest.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}
