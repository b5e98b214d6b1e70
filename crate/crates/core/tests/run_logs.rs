//! Histogram bookkeeping of training runs on chains whose episode lengths are
//! known in advance, so every bin can be recounted by hand.

use aela::envs::{ChainEnvConfig, EnvConfig};
use aela::harness::{parse_csv, run_training, write_run, ExperimentConfig, RunLog, WindowSetting};

fn chain_run(p_dead: f64, p_goal: f64, aela_on: bool, window: WindowSetting) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        env: EnvConfig::Chain(ChainEnvConfig::constant(12, p_dead, p_goal, 1.0)),
        total_steps: 480,
        eval_interval: 120,
        eval_episodes: 2,
        ..ExperimentConfig::default()
    };
    cfg.trainer.batch_size = 2;
    cfg.trainer.learn_start = 2;
    cfg.trainer.hidden = 4;
    cfg.trainer.mixing_embed = 2;
    cfg.trainer.hypernet_hidden = 4;
    cfg.aela.enabled = aela_on;
    cfg.aela.window = window;
    cfg
}

fn summed(log: &RunLog, f: impl Fn(&aela::harness::MetricRow) -> &Vec<u64>) -> Vec<u64> {
    let mut acc = vec![0; log.rows[0].samples_per_step.len()];
    for r in &log.rows {
        for (a, v) in acc.iter_mut().zip(f(r)) {
            *a += v;
        }
    }
    acc
}

#[test]
fn immortal_chain_fills_every_step_of_every_episode() {
    // Nothing ends an episode early, so each of the 480 / 12 episodes runs to
    // the horizon and contributes one sample per step.
    let log = run_training(&chain_run(0.0, 0.0, false, WindowSetting::Auto), 2).unwrap();
    assert_eq!(log.episodes, 40);
    assert_eq!(summed(&log, |r| &r.samples_per_step), vec![40; 12]);
    let mut ends = vec![0; 12];
    ends[11] = 40;
    assert_eq!(summed(&log, |r| &r.end_step_hist), ends);
}

#[test]
fn certain_goal_ends_every_episode_at_step_one() {
    let log = run_training(&chain_run(0.0, 1.0, true, WindowSetting::Fixed(2)), 5).unwrap();
    assert_eq!(log.episodes, 480);
    let mut expect = vec![0; 12];
    expect[0] = 480;
    assert_eq!(summed(&log, |r| &r.samples_per_step), expect);
    assert_eq!(summed(&log, |r| &r.end_step_hist), expect);
    // Each interval holds exactly 120 one-step episodes.
    assert!(log.rows[1..].iter().all(|r| r.end_step_hist[0] == 120));
}

#[test]
fn frozen_limit_truncates_at_initial_length() {
    // A quarter of 12 is 3, and a window that never fires keeps it there.
    let log = run_training(&chain_run(0.0, 0.0, true, WindowSetting::Never), 9).unwrap();
    assert_eq!(log.episodes, 160);
    let mut samples = vec![0; 12];
    samples[..3].copy_from_slice(&[160, 160, 160]);
    assert_eq!(summed(&log, |r| &r.samples_per_step), samples);
    assert!(log.rows.iter().all(|r| r.e_l == 3));
}

#[test]
fn written_metrics_parse_back_to_the_log_rows() {
    let log = run_training(&chain_run(0.1, 0.1, true, WindowSetting::Fixed(3)), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&log, dir.path(), 12).unwrap();
    let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(parse_csv(&text).unwrap(), log.rows);
    // Same seed, same bytes.
    let again = run_training(&chain_run(0.1, 0.1, true, WindowSetting::Fixed(3)), 4).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    write_run(&again, dir2.path(), 12).unwrap();
    for f in ["metrics.csv", "plot.svg", "run.txt", "config.cfg"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(dir2.path().join(f)).unwrap(), "{f}");
    }
}
