//! Experiment configuration in a flat `key = value` text format.
//!
//! Keys may be written fully dotted (`trainer.batch_size = 8`) or grouped
//! under a `[trainer]` header. `#` starts a comment. Lists are
//! comma-separated.

use super::HarnessError;
use crate::aela::{initial_length, recommend_window, WindowSize};
use crate::envs::{ChainEnvConfig, EnvConfig, MppConfig};
use crate::learners::{MixerKind, TrainerConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

/// How the trend-fit window is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowSetting {
    Fixed(usize),
    /// Derived from the step budget (80% of `total_steps`).
    Auto,
    Never,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AelaSettings {
    pub enabled: bool,
    pub tau: f64,
    pub initial_fraction: f64,
    pub window: WindowSetting,
}

impl Default for AelaSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            tau: 1.0,
            initial_fraction: 0.25,
            window: WindowSetting::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub aela: AelaSettings,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::Mpp(MppConfig::default()),
            trainer: TrainerConfig {
                epsilon: crate::learners::EpsilonSchedule {
                    anneal_steps: 50_000,
                    ..Default::default()
                },
                ..TrainerConfig::default()
            },
            aela: AelaSettings::default(),
            total_steps: 200_000,
            eval_interval: 10_000,
            eval_episodes: 32,
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.total_steps == 0 {
            return bad("total_steps must be > 0");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be > 0");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be > 0");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        self.env.build()?;
        self.trainer.validate()?;
        if !(self.aela.tau > 0.0) {
            return bad("aela.tau must be > 0");
        }
        if let WindowSetting::Fixed(w) = self.aela.window {
            if w < 2 {
                return bad("aela.window must be >= 2");
            }
        }
        initial_length(self.env.e_max(), self.aela.initial_fraction)?;
        Ok(())
    }

    /// Starting episode-length limit. A disabled controller starts (and
    /// stays) at `e_max`.
    pub fn initial_limit(&self) -> Result<usize, HarnessError> {
        let e_max = self.env.e_max();
        if !self.aela.enabled {
            return Ok(e_max);
        }
        Ok(initial_length(e_max, self.aela.initial_fraction)?)
    }

    /// Concrete window for a run starting at `e_l0`. `auto` cannot grow a
    /// limit that already sits at `e_max`, so it resolves to `Never` there.
    pub fn resolved_window(&self, e_l0: usize) -> Result<WindowSize, HarnessError> {
        let e_max = self.env.e_max();
        Ok(match self.aela.window {
            WindowSetting::Fixed(w) => WindowSize::Fixed(w),
            WindowSetting::Never => WindowSize::Never,
            WindowSetting::Auto if e_l0 >= e_max => WindowSize::Never,
            WindowSetting::Auto => WindowSize::Fixed(recommend_window(0.8 * self.total_steps as f64, e_max, e_l0)?.max(2)),
        })
    }

    pub fn algo(&self) -> MixerKind {
        self.trainer.mixer
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Split the text into `dotted.key -> value`, rejecting duplicates.
fn key_values(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim();
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(out)
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| HarnessError::Config(format!("bad value '{v}' for {key}"))),
        }
    }

    fn set<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), HarnessError> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| HarnessError::Config(format!("bad list entry '{s}' for {key}"))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.0.keys().any(|k| k.starts_with(prefix))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!("bad boolean '{v}' for {key}"))),
    }
}

pub fn parse_window(v: &str) -> Result<WindowSetting, HarnessError> {
    match v {
        "auto" => Ok(WindowSetting::Auto),
        "never" => Ok(WindowSetting::Never),
        n => n.parse().map(WindowSetting::Fixed).map_err(|_| HarnessError::Config(format!("bad window '{n}'"))),
    }
}

/// Expand a list that may be given as a single value for every step.
fn per_step(values: Vec<f64>, horizon: usize, key: &str) -> Result<Vec<f64>, HarnessError> {
    match values.len() {
        1 => Ok(vec![values[0]; horizon]),
        n if n == horizon => Ok(values),
        n => Err(HarnessError::Config(format!("{key} has {n} entries, expected 1 or {horizon}"))),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut k = Keys(key_values(text)?);
    let mut cfg = ExperimentConfig::default();

    let env_name: String = k.take("env")?.unwrap_or_else(|| "mpp".into());
    cfg.env = match env_name.as_str() {
        "mpp" => {
            if k.has_prefix("chain.") {
                return Err(HarnessError::Config("chain.* keys given for env = mpp".into()));
            }
            let mut m = MppConfig::default();
            k.set("mpp.grid_size", &mut m.grid_size)?;
            k.set("mpp.n_predators", &mut m.n_predators)?;
            k.set("mpp.n_prey", &mut m.n_prey)?;
            k.set("mpp.penalty", &mut m.penalty)?;
            k.set("mpp.obs_radius", &mut m.obs_radius)?;
            k.set("mpp.capture_reward", &mut m.capture_reward)?;
            k.set("mpp.e_max", &mut m.e_max)?;
            k.set("mpp.gamma", &mut m.gamma)?;
            EnvConfig::Mpp(m)
        }
        "chain" => {
            if k.has_prefix("mpp.") {
                return Err(HarnessError::Config("mpp.* keys given for env = chain".into()));
            }
            let mut c = ChainEnvConfig::default();
            k.set("chain.horizon", &mut c.horizon)?;
            k.set("chain.n_agents", &mut c.n_agents)?;
            k.set("chain.n_actions", &mut c.n_actions)?;
            k.set("chain.p_goal", &mut c.p_goal)?;
            k.set("chain.r_goal", &mut c.r_goal)?;
            k.set("chain.gamma", &mut c.gamma)?;
            let p_dead = k.list("chain.p_dead")?.unwrap_or_else(|| vec![c.p_dead[0]]);
            c.p_dead = per_step(p_dead, c.horizon, "chain.p_dead")?;
            let rewards = k.list("chain.step_rewards")?.unwrap_or_else(|| vec![0.0]);
            c.step_rewards = per_step(rewards, c.horizon, "chain.step_rewards")?;
            EnvConfig::Chain(c)
        }
        other => return Err(HarnessError::Config(format!("unknown env '{other}'"))),
    };

    if let Some(a) = k.take::<String>("algo")? {
        cfg.trainer.mixer = MixerKind::parse(&a).ok_or_else(|| HarnessError::Config(format!("unknown algo '{a}'")))?;
    }
    k.set("total_steps", &mut cfg.total_steps)?;
    k.set("eval_interval", &mut cfg.eval_interval)?;
    k.set("eval_episodes", &mut cfg.eval_episodes)?;
    if let Some(s) = k.list("seeds")? {
        cfg.seeds = s;
    }
    if let Some(o) = k.take::<String>("out_dir")? {
        cfg.out_dir = PathBuf::from(o);
    }

    if let Some(v) = k.take::<String>("aela.enabled")? {
        cfg.aela.enabled = parse_bool("aela.enabled", &v)?;
    }
    k.set("aela.tau", &mut cfg.aela.tau)?;
    k.set("aela.initial_fraction", &mut cfg.aela.initial_fraction)?;
    if let Some(v) = k.take::<String>("aela.window")? {
        cfg.aela.window = parse_window(&v)?;
    }

    let t = &mut cfg.trainer;
    k.set("trainer.batch_size", &mut t.batch_size)?;
    k.set("trainer.learn_start", &mut t.learn_start)?;
    k.set("trainer.target_update_interval", &mut t.target_update_interval)?;
    k.set("trainer.epsilon_start", &mut t.epsilon.start)?;
    k.set("trainer.epsilon_finish", &mut t.epsilon.finish)?;
    k.set("trainer.epsilon_anneal_steps", &mut t.epsilon.anneal_steps)?;
    k.set("trainer.buffer_capacity", &mut t.buffer_capacity)?;
    k.set("trainer.hidden", &mut t.hidden)?;
    k.set("trainer.mixing_embed", &mut t.mixing_embed)?;
    k.set("trainer.hypernet_hidden", &mut t.hypernet_hidden)?;
    k.set("trainer.lr", &mut t.optimizer.lr)?;
    k.set("trainer.rms_alpha", &mut t.optimizer.alpha)?;
    k.set("trainer.rms_eps", &mut t.optimizer.eps)?;
    k.set("trainer.grad_clip", &mut t.grad_clip)?;

    if let Some(key) = k.0.keys().next() {
        return Err(HarnessError::Config(format!("unknown key '{key}'")));
    }
    cfg.trainer.gamma = match &cfg.env {
        EnvConfig::Mpp(m) => m.gamma,
        EnvConfig::Chain(c) => c.gamma,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Render a config in the same format [`parse_config`] reads.
pub fn config_text(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "env = {}", cfg.env.name());
    let _ = writeln!(w, "algo = {}", cfg.trainer.mixer.name());
    let _ = writeln!(w, "total_steps = {}", cfg.total_steps);
    let _ = writeln!(w, "eval_interval = {}", cfg.eval_interval);
    let _ = writeln!(w, "eval_episodes = {}", cfg.eval_episodes);
    let _ = writeln!(w, "seeds = {}", join(&cfg.seeds));
    let _ = writeln!(w, "out_dir = {}", cfg.out_dir.display());
    match &cfg.env {
        EnvConfig::Mpp(m) => {
            let _ = writeln!(w, "\n[mpp]");
            let _ = writeln!(w, "grid_size = {}", m.grid_size);
            let _ = writeln!(w, "n_predators = {}", m.n_predators);
            let _ = writeln!(w, "n_prey = {}", m.n_prey);
            let _ = writeln!(w, "penalty = {}", m.penalty);
            let _ = writeln!(w, "obs_radius = {}", m.obs_radius);
            let _ = writeln!(w, "capture_reward = {}", m.capture_reward);
            let _ = writeln!(w, "e_max = {}", m.e_max);
            let _ = writeln!(w, "gamma = {}", m.gamma);
        }
        EnvConfig::Chain(c) => {
            let _ = writeln!(w, "\n[chain]");
            let _ = writeln!(w, "horizon = {}", c.horizon);
            let _ = writeln!(w, "n_agents = {}", c.n_agents);
            let _ = writeln!(w, "n_actions = {}", c.n_actions);
            let _ = writeln!(w, "p_dead = {}", join(&c.p_dead));
            let _ = writeln!(w, "p_goal = {}", c.p_goal);
            let _ = writeln!(w, "r_goal = {}", c.r_goal);
            let _ = writeln!(w, "step_rewards = {}", join(&c.step_rewards));
            let _ = writeln!(w, "gamma = {}", c.gamma);
        }
    }
    let a = &cfg.aela;
    let _ = writeln!(w, "\n[aela]");
    let _ = writeln!(w, "enabled = {}", a.enabled);
    let _ = writeln!(w, "tau = {}", a.tau);
    let _ = writeln!(w, "initial_fraction = {}", a.initial_fraction);
    let window = match a.window {
        WindowSetting::Fixed(n) => n.to_string(),
        WindowSetting::Auto => "auto".into(),
        WindowSetting::Never => "never".into(),
    };
    let _ = writeln!(w, "window = {window}");
    let t = &cfg.trainer;
    let _ = writeln!(w, "\n[trainer]");
    let _ = writeln!(w, "batch_size = {}", t.batch_size);
    let _ = writeln!(w, "learn_start = {}", t.learn_start);
    let _ = writeln!(w, "target_update_interval = {}", t.target_update_interval);
    let _ = writeln!(w, "epsilon_start = {}", t.epsilon.start);
    let _ = writeln!(w, "epsilon_finish = {}", t.epsilon.finish);
    let _ = writeln!(w, "epsilon_anneal_steps = {}", t.epsilon.anneal_steps);
    let _ = writeln!(w, "buffer_capacity = {}", t.buffer_capacity);
    let _ = writeln!(w, "hidden = {}", t.hidden);
    let _ = writeln!(w, "mixing_embed = {}", t.mixing_embed);
    let _ = writeln!(w, "hypernet_hidden = {}", t.hypernet_hidden);
    let _ = writeln!(w, "lr = {}", t.optimizer.lr);
    let _ = writeln!(w, "rms_alpha = {}", t.optimizer.alpha);
    let _ = writeln!(w, "rms_eps = {}", t.optimizer.eps);
    let _ = writeln!(w, "grad_clip = {}", t.grad_clip);
    s
}
