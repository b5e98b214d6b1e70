//! The installed binary's exit codes and outputs.

use std::path::Path;
use std::process::{Command, Output};

fn aela(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aela")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TINY_CHAIN: &str = "env = chain\ntotal_steps = 200\neval_interval = 100\neval_episodes = 2\nseeds = 1,2\n\
[trainer]\nbatch_size = 2\nlearn_start = 2\nhidden = 4\nmixing_embed = 2\nhypernet_hidden = 4\n";

#[test]
fn usage_errors_exit_one() {
    let o = aela(&["train", "--nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(aela(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "env = chain\n[trainer]\nbatch_size = 0\n");
    assert_eq!(aela(&["train", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "typo.cfg", "env = chain\n[aela]\nwindw = 3\n");
    assert_eq!(aela(&["train", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn train_runs_every_configured_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY_CHAIN);
    let out = dir.path().join("out");
    let o = aela(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--aela", "off"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("seed_1/metrics.csv").exists() && out.join("seed_2/metrics.csv").exists());
}

#[test]
fn numeric_divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_CHAIN.replace("[trainer]", "[chain]\nr_goal = 1e308\np_goal = 1\n[trainer]");
    let cfg = write(dir.path(), "huge.cfg", &text);
    let out = dir.path().join("out");
    let o = aela(&["train", "--config", &cfg, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("diverged"));
    // The partial log is still written.
    assert!(out.join("seed_1/metrics.csv").exists());
}

#[test]
fn theory_suite_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = aela(&["theory", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let csv = std::fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    assert!(csv.starts_with("name,computed,bound,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn sweep_writes_one_directory_per_cell_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.cfg",
        "env = mpp\ntotal_steps = 100\neval_interval = 50\neval_episodes = 1\nseeds = 1,2,3,4,5\n\
[mpp]\ne_max = 20\n[trainer]\nbatch_size = 2\nlearn_start = 2\nhidden = 4\nmixing_embed = 2\nhypernet_hidden = 4\n",
    );
    let out = dir.path().join("sweep");
    let o = aela(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--penalty", "-2", "--aela", "on"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut runs = 0;
    for cell in std::fs::read_dir(&out).unwrap() {
        let cell = cell.unwrap().path();
        if cell.is_dir() {
            runs += std::fs::read_dir(&cell).unwrap().filter(|e| e.as_ref().unwrap().path().join("metrics.csv").exists()).count();
        }
    }
    assert_eq!(runs, 10);
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("run,step,test_return_median,success_rate_median,e_l_median\n"));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["mpp.cfg", "chain.cfg"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let cfg = aela::harness::parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap();
    }
}
