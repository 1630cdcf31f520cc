//! Rollout collection and the PPO update loop.

use crate::agent::{save_checkpoint, Agent, CheckpointError};
use crate::curiosity::{CuriosityGrad, CuriositySample, CuriositySums};
use crate::gae::{compute_gae, normalize_advantages, GaeError};
use crate::hyper::{HyperError, Hyperparams};
use crate::policy::{accumulate_ppo, LossSums, LossWeights, PolicyGrad, PpoSample};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Samples per gradient work unit. Chunk sums are combined in index order,
/// so results do not depend on the thread count.
pub const GRAD_CHUNK: usize = 64;
const POLICY_STREAM: u64 = 6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at step {step}: policy {policy}, value {value}")]
    NonFiniteLoss { step: u64, policy: f64, value: f64 },
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Gae(#[from] GaeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("environment observation has {found} entries, agent expects {expected}")]
    Shape { found: usize, expected: usize },
}

pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// An episodic task with continuous actions in [-1, 1].
pub trait Environment {
    fn observation_len(&self) -> usize;
    fn action_len(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> EnvStep;
}

/// Seed handed to the environment for episode `k`.
pub fn episode_seed(base: u64, k: u64) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(k)
}

/// One row of the training log, averaged since the previous row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: u64,
    pub episodes: u64,
    /// Mean return of episodes finished in the window; NaN if none finished.
    pub cumulative_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub value_estimate: f64,
    pub curiosity_reward: f64,
    pub entropy: f64,
    pub learning_rate: f64,
}

#[derive(Default)]
struct Window {
    returns: Vec<f64>,
    loss: LossSums,
    updates: usize,
    policy: f64,
    value: f64,
    values: f64,
    intrinsic: f64,
    steps: usize,
}

struct Buffer<T> {
    raw: Vec<Vec<f64>>,
    obs: Vec<Vec<T>>,
    next_obs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    action: Vec<Vec<T>>,
    log_prob: Vec<T>,
    value: Vec<f64>,
    reward: Vec<f64>,
    done: Vec<bool>,
    /// Value of the following state where a segment is cut short.
    cut: Vec<Option<f64>>,
}

impl<T> Buffer<T> {
    fn new() -> Self {
        Self {
            raw: Vec::new(),
            obs: Vec::new(),
            next_obs: Vec::new(),
            pre: Vec::new(),
            action: Vec::new(),
            log_prob: Vec::new(),
            value: Vec::new(),
            reward: Vec::new(),
            done: Vec::new(),
            cut: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.reward.len()
    }

    fn clear(&mut self) {
        *self = Self::new();
    }
}

pub struct Trainer<T: Scalar, E: Environment> {
    pub hp: Hyperparams,
    pub agent: Agent<T>,
    pub env: E,
    pub log: Vec<SummaryRow>,
    /// Extrinsic return of every finished episode, in order.
    pub episode_returns: Vec<f64>,
    pub checkpoint_dir: Option<PathBuf>,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_return: f64,
    since_cut: usize,
    buf: Buffer<T>,
    win: Window,
}

impl<T: Scalar, E: Environment> Trainer<T, E> {
    pub fn new(hp: Hyperparams, env: E) -> Result<Self, TrainError> {
        hp.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(hp.seed);
        let agent = Agent::new(env.observation_len(), env.action_len(), &hp, &mut init);
        Self::from_agent(hp, agent, env)
    }

    /// Continues from a saved agent; a fresh episode starts immediately.
    pub fn from_agent(hp: Hyperparams, agent: Agent<T>, mut env: E) -> Result<Self, TrainError> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        rng.set_stream(POLICY_STREAM);
        rng.set_word_pos(agent.rng_position);
        let obs = env.reset(episode_seed(hp.seed, agent.episodes));
        if obs.len() != agent.obs_len() {
            return Err(TrainError::Shape { found: obs.len(), expected: agent.obs_len() });
        }
        Ok(Self {
            hp,
            agent,
            env,
            log: Vec::new(),
            episode_returns: Vec::new(),
            checkpoint_dir: None,
            rng,
            obs,
            episode_return: 0.0,
            since_cut: 0,
            buf: Buffer::new(),
            win: Window::default(),
        })
    }

    pub fn step(&self) -> u64 {
        self.agent.step
    }

    /// Runs until `hp.max_steps` environment steps have been taken.
    pub fn train(&mut self) -> Result<(), TrainError> {
        self.train_until(self.hp.max_steps)
    }

    /// Runs until `step` (capped at `hp.max_steps`); schedules still span
    /// the full `hp.max_steps`.
    pub fn train_until(&mut self, step: u64) -> Result<(), TrainError> {
        while self.agent.step < step.min(self.hp.max_steps) {
            self.collect_one()?;
            if self.buf.len() >= self.hp.buffer_size {
                self.update()?;
            }
            let s = self.agent.step;
            if self.hp.summary_freq > 0 && s % self.hp.summary_freq == 0 {
                self.summarize();
            }
            if self.hp.checkpoint_interval > 0 && s % self.hp.checkpoint_interval == 0 {
                self.save_numbered()?;
            }
        }
        Ok(())
    }

    /// Writes the agent, optimizer state and hyperparameters.
    pub fn save(&mut self, path: &std::path::Path) -> Result<(), TrainError> {
        self.agent.rng_position = self.rng.get_word_pos();
        save_checkpoint(path, &self.agent, &self.hp)?;
        Ok(())
    }

    fn save_numbered(&mut self) -> Result<(), TrainError> {
        if let Some(dir) = self.checkpoint_dir.clone() {
            std::fs::create_dir_all(&dir).map_err(|source| CheckpointError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            self.save(&dir.join(format!("checkpoint-{}.json", self.agent.step)))?;
        }
        Ok(())
    }

    fn collect_one(&mut self) -> Result<(), TrainError> {
        let input = self.agent.prepare(&self.obs);
        let sample = self.agent.net.act(&input, &mut self.rng, false);
        let value = self.agent.net.value(&input).as_f64();
        let action: Vec<f64> = sample.action.iter().map(|a| a.as_f64()).collect();
        let out = self.env.step(&action);
        if out.observation.len() != self.agent.obs_len() {
            return Err(TrainError::Shape { found: out.observation.len(), expected: self.agent.obs_len() });
        }
        self.agent.step += 1;
        self.since_cut += 1;
        self.episode_return += out.reward;
        self.win.values += value;
        self.win.steps += 1;

        let next = self.agent.prepare(&out.observation);
        let full = self.buf.len() + 1 >= self.hp.buffer_size;
        let cut = if !out.done && (self.since_cut >= self.hp.time_horizon || full) {
            Some(self.agent.net.value(&next).as_f64())
        } else {
            None
        };
        let b = &mut self.buf;
        b.raw.push(std::mem::take(&mut self.obs));
        b.obs.push(input);
        b.next_obs.push(next);
        b.pre.push(sample.pre_squash);
        b.action.push(sample.action);
        b.log_prob.push(sample.log_prob);
        b.value.push(value);
        b.reward.push(out.reward);
        b.done.push(out.done);
        b.cut.push(cut);
        if cut.is_some() {
            self.since_cut = 0;
        }

        if out.done {
            self.episode_returns.push(self.episode_return);
            self.win.returns.push(self.episode_return);
            self.episode_return = 0.0;
            self.since_cut = 0;
            self.agent.episodes += 1;
            self.obs = self.env.reset(episode_seed(self.hp.seed, self.agent.episodes));
        } else {
            self.obs = out.observation;
        }
        Ok(())
    }

    fn advantages(&mut self, intrinsic: &[f64]) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
        let b = &self.buf;
        let n = b.len();
        let k = self.hp.extrinsic_strength;
        let total: Vec<f64> = b.reward.iter().zip(intrinsic).map(|(r, i)| k * r + i).collect();
        let (mut adv, mut ret) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut start = 0;
        for t in 0..n {
            if b.done[t] || b.cut[t].is_some() || t + 1 == n {
                let mut values = b.value[start..=t].to_vec();
                // a trailing step with no cut can only be terminal; 0 keeps it harmless
                values.push(b.cut[t].unwrap_or(0.0));
                let (a, r) = compute_gae(&total[start..=t], &values, &b.done[start..=t], self.hp.gamma, self.hp.lambda)?;
                adv.extend(a);
                ret.extend(r);
                start = t + 1;
            }
        }
        Ok((adv, ret))
    }

    fn update(&mut self) -> Result<(), TrainError> {
        let step = self.agent.step;
        let intrinsic: Vec<f64> = match &self.agent.curiosity {
            Some(c) => (0..self.buf.len())
                .map(|t| c.intrinsic_reward(&self.buf.obs[t], &self.buf.action[t], &self.buf.next_obs[t]))
                .collect(),
            None => vec![0.0; self.buf.len()],
        };
        self.win.intrinsic += intrinsic.iter().sum::<f64>();
        let (mut adv, ret) = self.advantages(&intrinsic)?;
        normalize_advantages(&mut adv);
        let adv: Vec<T> = adv.into_iter().map(T::c).collect();
        let ret: Vec<T> = ret.into_iter().map(T::c).collect();

        let w = LossWeights {
            epsilon: self.hp.epsilon_at(step),
            beta: self.hp.beta_at(step),
            value_coef: self.hp.value_coef,
        };
        let lr = self.hp.learning_rate_at(step);
        let mut order: Vec<usize> = (0..self.buf.len()).collect();
        for _ in 0..self.hp.num_epoch {
            order.shuffle(&mut self.rng);
            for batch in order.chunks(self.hp.batch_size) {
                let samples: Vec<PpoSample<'_, T>> = batch
                    .iter()
                    .map(|&i| PpoSample {
                        obs: &self.buf.obs[i],
                        pre_squash: &self.buf.pre[i],
                        old_log_prob: self.buf.log_prob[i],
                        advantage: adv[i],
                        ret: ret[i],
                    })
                    .collect();
                let (sums, mut grad) = policy_gradient(&self.agent, &samples, &w);
                let n = sums.n.max(1) as f64;
                let (pl, vl) = (sums.policy / n, sums.value / n);
                grad.scale(T::c(1.0 / n));
                if !pl.is_finite() || !vl.is_finite() || !grad.is_finite() {
                    return Err(TrainError::NonFiniteLoss { step, policy: pl, value: vl });
                }
                let a = &mut self.agent;
                a.opt_actor.step(&mut a.net.actor.params, &grad.actor, lr);
                a.opt_log_std.step(&mut a.net.log_std, &grad.log_std, lr);
                a.opt_critic.step(&mut a.net.critic.params, &grad.critic, lr);
                self.win.loss.add(&sums);
                self.win.policy += pl;
                self.win.value += vl;
                self.win.updates += 1;

                if a.curiosity.is_some() {
                    let cs: Vec<CuriositySample<'_, T>> = batch
                        .iter()
                        .map(|&i| CuriositySample {
                            obs: &self.buf.obs[i],
                            action: &self.buf.action[i],
                            next_obs: &self.buf.next_obs[i],
                        })
                        .collect();
                    let (csum, mut cg) = curiosity_gradient(a, &cs);
                    cg.scale(T::c(1.0 / csum.n.max(1) as f64));
                    let c = a.curiosity.as_mut().unwrap();
                    let [oe, of, oi] = a.opt_curiosity.as_mut().unwrap();
                    let clr = self.hp.curiosity_learning_rate;
                    oe.step(&mut c.encoder.params, &cg.encoder, clr);
                    of.step(&mut c.forward_model.params, &cg.forward_model, clr);
                    oi.step(&mut c.inverse_model.params, &cg.inverse_model, clr);
                }
            }
        }
        if self.agent.normalize {
            self.agent.obs_norm.update_batch(&self.buf.raw);
        }
        self.buf.clear();
        Ok(())
    }

    fn summarize(&mut self) {
        let w = std::mem::take(&mut self.win);
        let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
        self.log.push(SummaryRow {
            step: self.agent.step,
            episodes: self.agent.episodes,
            cumulative_reward: mean(w.returns.iter().sum(), w.returns.len()),
            policy_loss: mean(w.policy, w.updates),
            value_loss: mean(w.value, w.updates),
            value_estimate: mean(w.values, w.steps),
            curiosity_reward: mean(w.intrinsic, w.steps),
            entropy: mean(w.loss.entropy, w.loss.n),
            learning_rate: self.hp.learning_rate_at(self.agent.step),
        });
    }
}

fn policy_gradient<T: Scalar>(agent: &Agent<T>, samples: &[PpoSample<'_, T>], w: &LossWeights) -> (LossSums, PolicyGrad<T>) {
    let work = |chunk: &[PpoSample<'_, T>]| {
        let mut g = PolicyGrad::zeros_like(&agent.net);
        let s = accumulate_ppo(&agent.net, chunk, w, &mut g);
        (s, g)
    };
    let parts = map_chunks(samples, work);
    let mut sums = LossSums::default();
    let mut grad = PolicyGrad::zeros_like(&agent.net);
    for (s, g) in &parts {
        sums.add(s);
        grad.add(g);
    }
    (sums, grad)
}

fn curiosity_gradient<T: Scalar>(agent: &Agent<T>, samples: &[CuriositySample<'_, T>]) -> (CuriositySums, CuriosityGrad<T>) {
    let c = agent.curiosity.as_ref().expect("curiosity enabled");
    let work = |chunk: &[CuriositySample<'_, T>]| {
        let mut g = CuriosityGrad::zeros_like(c);
        let s = c.accumulate(chunk, &mut g);
        (s, g)
    };
    let parts = map_chunks(samples, work);
    let mut sums = CuriositySums::default();
    let mut grad = CuriosityGrad::zeros_like(c);
    for (s, g) in &parts {
        sums.add(s);
        grad.add(g);
    }
    (sums, grad)
}

#[cfg(feature = "parallel")]
fn map_chunks<S: Sync, R: Send>(items: &[S], f: impl Fn(&[S]) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_chunks(GRAD_CHUNK).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<S, R>(items: &[S], f: impl Fn(&[S]) -> R) -> Vec<R> {
    items.chunks(GRAD_CHUNK).map(f).collect()
}
