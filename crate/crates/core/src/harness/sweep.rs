//! Grids of runs with cross-seed median aggregation.

use super::{emit_csv, emit_plot, median, run_training, ExperimentConfig, HarnessError, RunLog};
use crate::envs::EnvConfig;
use crate::learners::MixerKind;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub penalty: f64,
    pub algo: MixerKind,
    pub aela: bool,
}

impl SweepCell {
    pub fn label(&self) -> String {
        format!("p{}_{}_{}", self.penalty, self.algo.name(), if self.aela { "aela" } else { "fixed" })
    }

    pub fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = base.clone();
        match &mut cfg.env {
            EnvConfig::Mpp(m) => m.penalty = self.penalty,
            EnvConfig::Chain(_) => return Err(HarnessError::Config("penalty sweeps need env = mpp".into())),
        }
        cfg.trainer.mixer = self.algo;
        cfg.aela.enabled = self.aela;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Median over seeds at each evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub label: String,
    pub step: u64,
    pub test_return_median: f64,
    pub success_rate_median: f64,
    pub e_l_median: f64,
}

/// Cross-seed medians, over the evaluation points every log shares.
pub fn median_curve(label: &str, logs: &[RunLog]) -> Vec<AggregateRow> {
    let n = logs.iter().map(|l| l.rows.len()).min().unwrap_or(0);
    (0..n)
        .map(|k| {
            let pick = |f: &dyn Fn(&super::MetricRow) -> f64| median(&logs.iter().map(|l| f(&l.rows[k])).collect::<Vec<_>>());
            AggregateRow {
                label: label.to_string(),
                step: logs[0].rows[k].step,
                test_return_median: pick(&|r| r.test_return_median),
                success_rate_median: pick(&|r| r.success_rate),
                e_l_median: pick(&|r| r.e_l as f64),
            }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from("run,step,test_return_median,success_rate_median,e_l_median\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.label, r.step, r.test_return_median, r.success_rate_median, r.e_l_median);
    }
    s
}

fn io(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Write `metrics.csv`, `plot.svg`, `run.txt` and `config.cfg` into `dir`.
pub fn write_run(log: &RunLog, dir: &Path, e_max: usize) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    emit_csv(&log.rows, &dir.join("metrics.csv"))?;
    emit_plot(&log.rows, e_max, &dir.join("plot.svg"))?;
    let run = dir.join("run.txt");
    std::fs::write(&run, log.summary()).map_err(|e| io(&run, e))?;
    let cfg = dir.join("config.cfg");
    std::fs::write(&cfg, &log.config).map_err(|e| io(&cfg, e))
}

/// Train every cell for every seed of `base`, writing one directory per run
/// and `aggregate.csv` at the top. Returns the aggregate rows and whether
/// any run diverged.
pub fn run_sweep(base: &ExperimentConfig, cells: &[SweepCell], out: &Path) -> Result<(Vec<AggregateRow>, bool), HarnessError> {
    let mut all = Vec::new();
    let mut diverged = false;
    for cell in cells {
        let cfg = cell.apply(base)?;
        let mut logs = Vec::new();
        for &seed in &cfg.seeds {
            let log = run_training(&cfg, seed)?;
            diverged |= log.diverged.is_some();
            write_run(&log, &out.join(cell.label()).join(format!("seed_{seed}")), cfg.env.e_max())?;
            logs.push(log);
        }
        all.extend(median_curve(&cell.label(), &logs));
    }
    let path = out.join("aggregate.csv");
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    std::fs::write(&path, aggregate_csv(&all)).map_err(|e| io(&path, e))?;
    Ok((all, diverged))
}
