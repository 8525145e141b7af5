use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use phrasegame_cli::commands::{run, Cli};

fn cli(args: &[&str]) -> anyhow::Result<()> {
    run(Cli::try_parse_from(std::iter::once("phrasegame").chain(args.iter().copied()))?)
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    let cfg = serde_json::json!({
        "generation": {
            "splits": [
                {"name": "train", "pairs": 30},
                {"name": "val", "pairs": 5},
                {"name": "test", "pairs": 10}
            ],
            "categories": 2,
            "per_category": 3,
            "category_variation": 0.1
        }
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_gen_twice_gives_identical_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let config = config.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        cli(&["synth-gen", "--config", config, "--seed", "7", "--image-size", "64", "--out", out.to_str().unwrap()]).unwrap();
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.keys().any(|k| k.extension().is_some_and(|e| e == "png")));
    assert!(ta.len() > 3);
    assert_eq!(ta, tb);

    let c = tmp.path().join("c");
    cli(&["synth-gen", "--config", config, "--seed", "8", "--image-size", "64", "--out", c.to_str().unwrap()]).unwrap();
    assert_ne!(tree(&c), ta);
}

#[test]
fn oracle_on_ground_truth_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let data = tmp.path().join("data");
    let eval = tmp.path().join("eval");
    cli(&["synth-gen", "--config", config.to_str().unwrap(), "--image-size", "0", "--out", data.to_str().unwrap()]).unwrap();
    cli(&["eval-rg", "--dataset", data.to_str().unwrap(), "--oracle", "--out", eval.to_str().unwrap()]).unwrap();
    let report = fs::read_to_string(eval.join("report.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let row = rows.iter().find(|r| r["listener"] == "oracle").expect("oracle row");
    assert_eq!(row["accuracy"], 1.0);
    assert_eq!(row["total"], 100);
    assert!(eval.join("config.json").exists());
}

#[test]
fn errors_exit_through_result() {
    assert!(cli(&["no-such-command"]).is_err());
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    // neither a listener nor the oracle
    assert!(cli(&["eval-rg", "--dataset", "missing", "--out", out.to_str().unwrap()]).is_err());
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"profile": "enormous"}"#).unwrap();
    assert!(cli(&["synth-gen", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]).is_err());
}
