//! The outer training loop and greedy evaluation.

use super::{ExperimentConfig, HarnessError, MetricRow, RunLog};
use crate::aela::{batch_total_entropy, Controller, LengthSchedule, WindowSize};
use crate::envs::MultiAgentEnv;
use crate::learners::{Episode, Learner, LearnerError, PaddedBatch, ReplayBuffer};
use crate::rng::{stream_rng, sub_stream_rng, Stream};
use rand::Rng;

/// Greedy evaluation statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub median_return: f64,
    pub success_rate: f64,
    /// Interaction step at which each episode ended.
    pub end_steps: Vec<usize>,
    pub returns: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn legal_masks(env: &dyn MultiAgentEnv) -> Result<Vec<Vec<bool>>, HarnessError> {
    (0..env.spec().n_agents).map(|i| env.legal_actions(i).map_err(HarnessError::from)).collect()
}

/// Run `n_episodes` greedy episodes to natural termination or `e_max`,
/// whichever comes first. Never touches training state.
pub fn evaluate(learner: &Learner, env: &mut dyn MultiAgentEnv, n_episodes: usize, seed: u64) -> Result<EvalStats, HarnessError> {
    let mut rng = stream_rng(seed, Stream::Eval);
    let e_max = env.spec().e_max;
    let mut returns = Vec::with_capacity(n_episodes);
    let mut end_steps = Vec::with_capacity(n_episodes);
    let mut successes = 0usize;
    for _ in 0..n_episodes {
        let mut ob = env.reset(rng.gen());
        let mut actor = learner.start_episode();
        let mut total = 0.0;
        let mut l = 0;
        while l < e_max {
            let legal = legal_masks(env)?;
            let actions = learner.act(&mut actor, &ob.obs, &legal, 0.0, &mut rng)?;
            let res = env.step(&actions)?;
            total += res.reward;
            l += 1;
            ob.obs = res.next_obs;
            if res.terminal {
                break;
            }
        }
        if env.is_success() {
            successes += 1;
        }
        returns.push(total);
        end_steps.push(l);
    }
    Ok(EvalStats {
        median_return: median(&returns),
        success_rate: successes as f64 / n_episodes.max(1) as f64,
        end_steps,
        returns,
    })
}

/// Interval accumulators between two evaluation rows.
struct Interval {
    end_hist: Vec<u64>,
    samples: Vec<u64>,
    returns_sum: f64,
    episodes: u64,
}

impl Interval {
    fn new(e_max: usize) -> Self {
        Self {
            end_hist: vec![0; e_max],
            samples: vec![0; e_max],
            returns_sum: 0.0,
            episodes: 0,
        }
    }
}

struct Loop<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    learner: Learner,
    eval_env: Box<dyn MultiAgentEnv + Send>,
    controller: Controller,
    rows: Vec<MetricRow>,
    interval: Interval,
    last_h: f64,
    evals: u64,
}

impl Loop<'_> {
    fn record_eval(&mut self, step: u64) -> Result<(), HarnessError> {
        let eval_seed = sub_stream_rng(self.seed, Stream::Eval, self.evals).gen();
        self.evals += 1;
        let stats = evaluate(&self.learner, self.eval_env.as_mut(), self.cfg.eval_episodes, eval_seed)?;
        let e_max = self.cfg.env.e_max();
        let iv = std::mem::replace(&mut self.interval, Interval::new(e_max));
        self.rows.push(MetricRow {
            step,
            e_l: self.controller.limit(),
            h_total: self.last_h,
            alpha: self.controller.last_fit().map_or(f64::NAN, |f| f.alpha),
            train_return: if iv.episodes > 0 { iv.returns_sum / iv.episodes as f64 } else { f64::NAN },
            test_return_median: stats.median_return,
            success_rate: stats.success_rate,
            end_step_hist: iv.end_hist,
            samples_per_step: iv.samples,
        });
        Ok(())
    }
}

/// Train one seed. Divergence stops the run and is reported in the log,
/// which then holds every row recorded so far.
pub fn run_training(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog, HarnessError> {
    cfg.validate()?;
    let mut env = cfg.env.build()?;
    let spec = env.spec().clone();
    let e_max = spec.e_max;

    let mut trainer = cfg.trainer.clone();
    trainer.gamma = spec.gamma;
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut explore_rng = stream_rng(seed, Stream::Explore);
    let mut sample_rng = stream_rng(seed, Stream::Sample);

    let e_l0 = cfg.initial_limit()?;
    let window = cfg.resolved_window(e_l0)?;
    let controller = Controller::new(LengthSchedule::new(e_l0, e_max)?, window, cfg.aela.tau)?;
    let mut buffer = ReplayBuffer::new(trainer.buffer_capacity, e_max);
    let batch_size = trainer.batch_size;
    let learn_start = trainer.learn_start;
    let sync_interval = trainer.target_update_interval;
    let epsilon = trainer.epsilon;

    let mut lp = Loop {
        cfg,
        seed,
        learner: Learner::new(&spec, trainer, &mut init_rng)?,
        eval_env: cfg.env.build()?,
        controller,
        rows: Vec::new(),
        interval: Interval::new(e_max),
        last_h: f64::NAN,
        evals: 0,
    };

    let (mut t, mut t_p, mut episodes) = (0u64, 0u64, 0u64);
    let mut diverged = None;
    let mut eval_due = false;
    lp.record_eval(0)?;

    'outer: while t < cfg.total_steps {
        let limit = lp.controller.limit();
        let mut ob = env.reset(env_rng.gen());
        let mut ep = Episode::new(ob.clone(), legal_masks(env.as_ref())?);
        let mut actor = lp.learner.start_episode();
        let mut total = 0.0;
        while ep.len() < limit && t < cfg.total_steps {
            let legal = ep.legal.last().expect("non-empty").clone();
            let actions = lp.learner.act(&mut actor, &ob.obs, &legal, epsilon.at(t), &mut explore_rng)?;
            let res = env.step(&actions)?;
            total += res.reward;
            ob.obs = res.next_obs.clone();
            ob.state = res.next_state.clone();
            let next_legal = legal_masks(env.as_ref())?;
            ep.push(actions, res.reward, res.terminal, ob.clone(), next_legal);
            lp.interval.samples[ep.len() - 1] += 1;
            t += 1;
            let ends = res.terminal || ep.len() >= limit || t >= cfg.total_steps;
            eval_due = t % cfg.eval_interval == 0;
            // An evaluation on an episode's last step waits for its bookkeeping
            // so the row counts that episode; the weights are the same either way.
            if eval_due && !ends {
                lp.record_eval(t)?;
                eval_due = false;
            }
            if res.terminal {
                break;
            }
        }
        episodes += 1;
        lp.interval.end_hist[ep.len() - 1] += 1;
        lp.interval.returns_sum += total;
        lp.interval.episodes += 1;
        if eval_due {
            lp.record_eval(t)?;
            eval_due = false;
        }
        buffer.store(ep)?;

        if buffer.len() > learn_start.max(batch_size - 1) {
            let batch = buffer.sample_batch(batch_size, &mut sample_rng)?;
            let n_agents = spec.n_agents;
            let pb = PaddedBatch::new(&batch, n_agents, spec.n_actions, None)?;
            let report = match lp.learner.td_update(&pb) {
                Ok(r) => r,
                Err(LearnerError::Diverged(msg)) => {
                    diverged = Some(msg);
                    break 'outer;
                }
                Err(e) => return Err(e.into()),
            };
            let h = batch_total_entropy(&report.q_values, &report.filled, lp.controller.tau)?;
            lp.last_h = h;
            lp.controller.observe(h);
            if t - t_p > sync_interval {
                lp.learner.sync_targets();
                t_p = t;
            }
        }
    }
    if diverged.is_none() && lp.rows.last().is_none_or(|r| r.step != t) {
        lp.record_eval(t)?;
    }

    let rng_states = [("env", &env_rng), ("explore", &explore_rng), ("sample", &sample_rng), ("init", &init_rng)]
        .into_iter()
        .map(|(n, r)| (n.to_string(), r.get_word_pos()))
        .collect();
    Ok(RunLog {
        config: super::config_text(cfg),
        seed,
        rng_states,
        checksum: lp.learner.checksum(),
        episodes,
        updates: lp.learner.updates(),
        window: match window {
            WindowSize::Fixed(w) => Some(w),
            WindowSize::Never => None,
        },
        rows: lp.rows,
        diverged,
    })
}
