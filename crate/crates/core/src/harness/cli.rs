//! Command-line front end.

use super::{
    controller_checks, gradient_checks, monotonicity_check, parse_config, run_sweep, run_training, window_pacing_check, write_run, ExperimentConfig,
    HarnessError, SweepCell, WindowSetting,
};
use crate::learners::{LearnerError, MixerKind};
use crate::theory::{run_suite, suite_csv, Check, SuiteConfig};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Vdn,
    Qmix,
}

impl From<Algo> for MixerKind {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Vdn => MixerKind::Vdn,
            Algo::Qmix => MixerKind::Qmix,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AelaMode {
    On,
    Off,
    /// Enabled, with the window derived from the step budget.
    Auto,
}

#[derive(Parser, Debug)]
#[command(name = "aela", about = "Adaptive episode-length training for VDN/QMIX", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train over the configured seeds and write one directory per seed.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        #[arg(long, value_enum)]
        aela: Option<AelaMode>,
    },
    /// Run the closed-form validation suite.
    Theory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the checks to DIR/theory.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid over penalty, algorithm and controller on/off.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to one algorithm (default: both).
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        /// Restrict to one controller mode (default: on and off).
        #[arg(long, value_enum)]
        aela: Option<AelaMode>,
        /// Penalty values (default: -2 and -4).
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        penalty: Vec<f64>,
    },
    /// Gradient and invariant checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Learner(LearnerError::Diverged(_)) => EXIT_DIVERGED,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>, algo: Option<Algo>, aela: Option<AelaMode>) {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(a) = algo {
        cfg.trainer.mixer = a.into();
    }
    match aela {
        Some(AelaMode::On) => cfg.aela.enabled = true,
        Some(AelaMode::Off) => cfg.aela.enabled = false,
        Some(AelaMode::Auto) => {
            cfg.aela.enabled = true;
            cfg.aela.window = WindowSetting::Auto;
        }
        None => {}
    }
}

fn report(out: &mut dyn Write, checks: &[Check]) -> bool {
    for c in checks {
        let _ = writeln!(out, "{} {} computed={} bound={}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.computed, c.bound);
    }
    checks.iter().all(|c| c.pass)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Train { config, seed, out: dir, algo, aela } => {
            let mut cfg = load_config(config.as_deref())?;
            apply_overrides(&mut cfg, seed, dir, algo, aela);
            cfg.validate()?;
            let mut code = EXIT_OK;
            for &s in &cfg.seeds {
                let log = run_training(&cfg, s)?;
                let dir = cfg.out_dir.join(format!("seed_{s}"));
                write_run(&log, &dir, cfg.env.e_max())?;
                let last = log.rows.last();
                let _ = writeln!(
                    out,
                    "seed {s}: {} rows, final median test return {}, e_l {} -> {}",
                    log.rows.len(),
                    last.map_or(f64::NAN, |r| r.test_return_median),
                    log.rows.first().map_or(0, |r| r.e_l),
                    last.map_or(0, |r| r.e_l),
                );
                if let Some(d) = &log.diverged {
                    let _ = writeln!(out, "seed {s}: diverged: {d}");
                    code = EXIT_DIVERGED;
                }
            }
            Ok(code)
        }
        Command::Theory { seed, out: dir } => {
            let checks = run_suite(&SuiteConfig { seed, ..SuiteConfig::default() });
            let ok = report(out, &checks);
            if let Some(d) = dir {
                std::fs::create_dir_all(&d).map_err(|e| HarnessError::Io(format!("{}: {e}", d.display())))?;
                let p = d.join("theory.csv");
                std::fs::write(&p, suite_csv(&checks)).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            }
            Ok(if ok { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Sweep {
            config,
            seed,
            out: dir,
            algo,
            aela,
            penalty,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            apply_overrides(&mut cfg, seed, dir, None, aela.filter(|m| *m == AelaMode::Auto));
            let penalties = if penalty.is_empty() { vec![-2.0, -4.0] } else { penalty };
            let algos: Vec<MixerKind> = algo.map_or(vec![MixerKind::Vdn, MixerKind::Qmix], |a| vec![a.into()]);
            let modes = match aela {
                None => vec![true, false],
                Some(AelaMode::Off) => vec![false],
                Some(_) => vec![true],
            };
            let mut cells = Vec::new();
            for &p in &penalties {
                for &a in &algos {
                    for &m in &modes {
                        cells.push(SweepCell { penalty: p, algo: a, aela: m });
                    }
                }
            }
            let (rows, diverged) = run_sweep(&cfg, &cells, &cfg.out_dir)?;
            let _ = writeln!(out, "{} cells x {} seeds, {} aggregate rows in {}", cells.len(), cfg.seeds.len(), rows.len(), cfg.out_dir.display());
            Ok(if diverged { EXIT_DIVERGED } else { EXIT_OK })
        }
        Command::Check { seed, instances } => {
            let mut checks = gradient_checks(seed, instances);
            checks.push(monotonicity_check(seed, 1000));
            checks.extend(controller_checks());
            checks.extend(window_pacing_check(200_000, 100, 25).1);
            Ok(if report(out, &checks) { EXIT_OK } else { EXIT_VALIDATION })
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match run(parsed, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = cli(std::iter::once("aela").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn unknown_flag_prints_usage() {
        let (code, _, err) = call(&["train", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["train", "--aela", "sometimes"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("theory"));
    }

    #[test]
    fn bad_config_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cfg");
        std::fs::write(&p, "total_steps = 0\n").unwrap();
        let (code, _, err) = call(&["train", "--config", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("total_steps"));
        assert_eq!(call(&["train", "--config", "/no/such/file.cfg"]).0, EXIT_VALIDATION);
    }

    #[test]
    fn train_writes_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("chain.cfg");
        std::fs::write(
            &cfg,
            "env = chain\ntotal_steps = 300\neval_interval = 100\neval_episodes = 2\n[trainer]\nbatch_size = 2\nlearn_start = 2\nhidden = 4\nmixing_embed = 2\nhypernet_hidden = 4\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let (code, stdout, err) = call(&["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap(), "--algo", "vdn", "--aela", "auto"]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(stdout.contains("seed 1"));
        for f in ["metrics.csv", "plot.svg", "run.txt", "config.cfg"] {
            assert!(out.join("seed_1").join(f).exists(), "{f}");
        }
        let rows = super::super::parse_csv(&std::fs::read_to_string(out.join("seed_1/metrics.csv")).unwrap()).unwrap();
        assert_eq!(rows.len(), 4);
        let cfg_back = parse_config(&std::fs::read_to_string(out.join("seed_1/config.cfg")).unwrap()).unwrap();
        assert_eq!(cfg_back.trainer.mixer, MixerKind::Vdn);
    }

    #[test]
    fn sweep_rejects_chain_env() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("chain.cfg");
        std::fs::write(&cfg, "env = chain\n").unwrap();
        let (code, _, _) = call(&["sweep", "--config", cfg.to_str().unwrap(), "--penalty", "-2"]);
        assert_eq!(code, EXIT_VALIDATION);
    }
}
