use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn durpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_durpipe")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = durpipe(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn fixture_dir() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let docs = dir.path().join("docs.jsonl");
    let lines = [
        r#"{"id":"a","text":"He was away for 23 years. She is 23 years old and spent 2 days here. The talk took 1 hour."}"#,
        r#"{"id":"b","text":"Nothing happened. It lasted for more than 10 years. We waited for 5 minutes!"}"#,
        r#"{"id":"c","text":"They spent 3 weeks abroad. Over 2 decades the town grew."}"#,
    ];
    fs::write(&docs, lines.join("\n") + "\n").unwrap();
    (dir, docs)
}

const TUNED: &str = "seed = 5\n[train]\nlearning_rate = 0.01\nepochs = 3\n";

#[test]
fn extract_fixture_corpus() {
    let (dir, docs) = fixture_dir();
    let out = dir.path().join("all");
    ok(&["extract", p(&docs), "--out", p(&out)]);
    let ids: Vec<String> =
        jsonl(&out.join("instances.jsonl")).iter().map(|v| v["source_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["a#0", "a#2", "b#2", "c#0", "c#1"]);
    let stats: Value = serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["instances"], 5);
    assert_eq!(stats["filtered"], 2);
    assert!(out.join("config.toml").exists());

    let for_only = dir.path().join("for");
    ok(&["extract", p(&docs), "--patterns", "for-only", "--out", p(&for_only)]);
    let ids: Vec<String> =
        jsonl(&for_only.join("instances.jsonl")).iter().map(|v| v["source_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["a#0", "b#2"]);
    assert!(fs::read_to_string(for_only.join("config.toml")).unwrap().contains("patterns = \"for-only\""));
}

#[test]
fn plain_text_lines_are_documents() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    fs::write(input.join("x.txt"), "The talk took 1 hour.\n\nWe waited for 5 minutes.\n").unwrap();
    let out = dir.path().join("out");
    ok(&["extract", p(&input), "--out", p(&out)]);
    let ids: Vec<Value> = jsonl(&out.join("instances.jsonl")).iter().map(|v| v["source_id"].clone()).collect();
    assert_eq!(ids, ["x.txt:1#0", "x.txt:3#0"]);
}

#[test]
fn empty_input_dir_warns_and_succeeds() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty");
    fs::create_dir(&input).unwrap();
    let out = dir.path().join("out");
    let res = durpipe(&["extract", p(&input), "--out", p(&out)]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("no input files"));
    assert_eq!(fs::read_to_string(out.join("instances.jsonl")).unwrap(), "");
}

#[test]
fn exit_codes_separate_config_io_and_data_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");

    let missing = durpipe(&["extract", p(&dir.path().join("nope.txt")), "--out", p(&out)]);
    assert_eq!(missing.status.code(), Some(3));

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[train]\nepoch = 3\n").unwrap();
    let res = durpipe(&["--config", p(&bad_cfg), "synth", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));

    let res = durpipe(&["synth", "--inventory", "9", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));

    let no_units = dir.path().join("no_units.toml");
    fs::write(&no_units, "[synth]\nunits = []\n").unwrap();
    let res = durpipe(&["--config", p(&no_units), "synth", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("at least one unit"));

    let garbage = dir.path().join("garbage.jsonl");
    fs::write(&garbage, "{not json}\n").unwrap();
    let res = durpipe(&["train", p(&garbage), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn fine_protocol_rejects_coarse_only_golds() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("coarse.tsv");
    fs::write(
        &data,
        "sentence\tevent_start\tevent_end\tmin_quantity\tmin_unit\tmax_quantity\tmax_unit\tcoarse\n\
         He slept well.\t3\t8\t\t\t\t\t<day\n\
         They built a bridge.\t5\t10\t\t\t\t\t>day\n",
    )
    .unwrap();
    let base = dir.path().join("base");
    let stdout = ok(&["baseline", p(&data), "--protocol", "coarse", "--out", p(&base)]);
    assert!(stdout.contains("acc 50.00"), "{stdout}");

    let res = durpipe(&["baseline", p(&data), "--protocol", "fine", "--out", p(&base)]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("fine protocol needs duration bounds"));
}

#[test]
fn synth_is_reproducible_and_extractable() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--seed", "17", "--out", p(&a)]);
    ok(&["synth", "--seed", "17", "--out", p(&b)]);
    for f in ["corpus.txt", "heldout.tsv", "finetune.tsv", "mctaco.jsonl", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(a.join("corpus.txt")).unwrap().lines().count(), 2000);

    let ex = dir.path().join("ex");
    ok(&["extract", p(&a.join("corpus.txt")), "--out", p(&ex)]);
    let n = jsonl(&ex.join("instances.jsonl")).len();
    assert!(n as f64 >= 0.99 * 2000.0, "{n}");

    let c = dir.path().join("c");
    ok(&["synth", "--seed", "18", "--out", p(&c)]);
    assert_ne!(fs::read(a.join("corpus.txt")).unwrap(), fs::read(c.join("corpus.txt")).unwrap());
}

#[test]
fn echoed_config_reproduces_a_run() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, TUNED).unwrap();
    let synth = dir.path().join("synth");
    ok(&["--config", p(&cfg), "synth", "--out", p(&synth)]);
    let ex = dir.path().join("ex");
    ok(&["--config", p(&cfg), "extract", p(&synth.join("corpus.txt")), "--out", p(&ex)]);
    let first = dir.path().join("first");
    ok(&["--config", p(&cfg), "train", p(&ex.join("instances.jsonl")), "--head", "range", "--out", p(&first)]);

    // The echoed file carries --head, so no flags are needed the second time.
    let second = dir.path().join("second");
    ok(&["--config", p(&first.join("config.toml")), "train", p(&ex.join("instances.jsonl")), "--out", p(&second)]);
    for f in ["checkpoint.bin", "loss.tsv", "config.toml"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pretrain_finetune_and_evaluate() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, TUNED).unwrap();
    let c = p(&cfg);
    let synth = dir.path().join("synth");
    ok(&["--config", c, "synth", "--out", p(&synth)]);
    let ex = dir.path().join("ex");
    ok(&["--config", c, "extract", p(&synth.join("corpus.txt")), "--out", p(&ex)]);
    let pre = dir.path().join("pre");
    ok(&["--config", c, "train", p(&ex.join("instances.jsonl")), "--out", p(&pre)]);

    let fine = dir.path().join("fine");
    let ckpt = pre.join("checkpoint.bin");
    ok(&[
        "--config",
        c,
        "train",
        p(&synth.join("finetune.tsv")),
        "--data-format",
        "timebank",
        "--init",
        p(&ckpt),
        "--out",
        p(&fine),
    ]);
    assert!(fs::read_to_string(fine.join("config.toml")).unwrap().contains(&format!("init = {:?}", p(&ckpt))));

    let heldout = synth.join("heldout.tsv");
    let heldout = p(&heldout);
    let report_dir = dir.path().join("eval");
    let stdout = ok(&["--config", c, "eval", p(&fine.join("checkpoint.bin")), heldout, "--out", p(&report_dir)]);
    assert!(stdout.starts_with("fine: acc"), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["items"].as_array().unwrap().len(), 400);
    assert!(report["accuracy"].as_f64().unwrap() >= 0.9);
    let items = fs::read_to_string(report_dir.join("items.tsv")).unwrap();
    assert!(items.lines().nth(1).unwrap().split('\t').nth(1).unwrap().len() > 1, "event word key present");

    let qa = dir.path().join("qa");
    let stdout = ok(&[
        "--config",
        c,
        "eval",
        p(&ckpt),
        p(&synth.join("mctaco.jsonl")),
        "--protocol",
        "mctaco",
        "--range",
        "inf",
        "--out",
        p(&qa),
    ]);
    // an unbounded range accepts every answer: recall 1, EM 0 (each question has wrong answers)
    assert!(stdout.contains("EM 0.00"), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(qa.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["counts"]["correct"]["fn"], 0);

    let fine_qa = dir.path().join("fine_qa");
    ok(&[
        "--config",
        c,
        "train",
        p(&synth.join("mctaco.jsonl")),
        "--data-format",
        "mctaco",
        "--init",
        p(&ckpt),
        "--out",
        p(&fine_qa),
    ]);

    let seven = dir.path().join("seven");
    let res = durpipe(&[
        "--config",
        c,
        "--inventory",
        "7",
        "train",
        p(&synth.join("finetune.tsv")),
        "--data-format",
        "timebank",
        "--init",
        p(&ckpt),
        "--out",
        p(&seven),
    ]);
    assert_eq!(res.status.code(), Some(2));
}
