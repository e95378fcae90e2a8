//! Rollout collection and clipped-surrogate optimization.
//!
//! The trainer owns `n_envs` independent environments, each with its own
//! RNG stream derived from the master seed. Every iteration steps all
//! environments `rollout_length` times with actions sampled from the current
//! policy, runs GAE, then performs `n_epochs` passes of shuffled minibatch
//! Adam updates. All randomness flows from the master seed, so two runs with
//! the same configuration produce identical logs and parameters.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{normalize, RolloutBuffer};
use super::log::{IterationRecord, TrainingLog};
use super::normalizer::RunningNorm;
use super::surrogate::{surrogate_from_ratio, surrogate_grad};
use crate::env::{EnvConfig, JointAction, LandingEnv, PlatformSpec};
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::nn::gaussian::{self, entropy};
use crate::nn::{ActorCritic, ActorCriticSpec, AdamParams, AdamState, Real};
use crate::sim::SimParams;

const EPISODE_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub total_timesteps: u64,
    pub n_envs: usize,
    pub rollout_length: usize,
    pub minibatch_size: usize,
    pub n_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub lr: f64,
    pub seed: u64,
    /// Save an intermediate checkpoint every this many updates; 0 keeps
    /// only the final one.
    pub checkpoint_interval: usize,
    /// Record elapsed wall-clock seconds in the log. Off by default: the
    /// column is then written as 0 so logs of identical runs compare
    /// byte-for-byte.
    pub log_wall_clock: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 1_000_000,
            n_envs: 8,
            rollout_length: 1024,
            minibatch_size: 256,
            n_epochs: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            lr: 3e-4,
            seed: 0,
            checkpoint_interval: 0,
            log_wall_clock: false,
        }
    }
}

impl PpoConfig {
    /// Full-length schedule of twenty million environment steps.
    pub fn full_scale() -> Self {
        Self {
            total_timesteps: 20_000_000,
            ..Default::default()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.rollout_length * self.n_envs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_envs == 0 || self.rollout_length == 0 || self.minibatch_size == 0 {
            return bad("n_envs, rollout_length and minibatch_size must be >= 1");
        }
        if self.n_epochs == 0 {
            return bad("n_epochs must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be > 0");
        }
        if self.batch_size() % self.minibatch_size != 0 {
            return bad("rollout_length * n_envs must be divisible by minibatch_size");
        }
        if !(self.lr >= 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("lr must be >= 0 and max_grad_norm > 0");
        }
        if !(self.value_coef >= 0.0) || !self.entropy_coef.is_finite() {
            return bad("loss coefficients must be finite, value_coef >= 0");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            ..Default::default()
        }
    }
}

/// Everything needed to build a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    pub sim: SimParams,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub platform: PlatformSpec,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.env.validate()?;
        self.ppo.validate()
    }

    pub fn net_spec(&self) -> ActorCriticSpec {
        let mut spec = ActorCriticSpec::landing();
        spec.obs_dim = self.env.obs_dim();
        spec.act_dim = self.env.act_dim();
        spec
    }
}

/// Averages over every minibatch of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Borrowed view of one minibatch.
pub struct Minibatch<'a, T> {
    pub obs: &'a [T],
    pub actions: &'a [f64],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub struct LossCoefs {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl From<&PpoConfig> for LossCoefs {
    fn from(c: &PpoConfig) -> Self {
        Self {
            clip_eps: c.clip_eps,
            value_coef: c.value_coef,
            entropy_coef: c.entropy_coef,
        }
    }
}

/// Total loss `policy + value_coef * value - entropy_coef * entropy` on a
/// minibatch and its gradient with respect to every network parameter.
///
/// The policy term is the negated mean clipped surrogate, the value term
/// the mean squared error against `returns`.
pub fn minibatch_loss_and_grads<T: Real>(
    net: &ActorCritic<T>,
    mb: &Minibatch<'_, T>,
    coefs: LossCoefs,
) -> Result<(LossStats, Vec<T>)> {
    let act = net.spec().act_dim;
    let b = mb.returns.len();
    let out = net.forward(mb.obs, b)?;
    let log_std: Vec<f64> = net.log_std().iter().map(|v| v.to_f64().unwrap()).collect();
    let bf = b as f64;

    let mut d_mean = vec![T::zero(); b * act];
    let mut d_value = vec![T::zero(); b];
    let mut d_log_std = vec![0.0f64; act];
    let mut stats = LossStats::default();
    let mut mean = vec![0.0; act];
    for i in 0..b {
        for (j, m) in mean.iter_mut().enumerate() {
            *m = out.mean[i * act + j].to_f64().unwrap();
        }
        let a = &mb.actions[i * act..(i + 1) * act];
        let lp = gaussian::log_prob(a, &mean, &log_std);
        let log_ratio = lp - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = mb.advantages[i];
        stats.policy -= surrogate_from_ratio(ratio, adv, coefs.clip_eps) / bf;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / bf;
        if (ratio - 1.0).abs() > coefs.clip_eps {
            stats.clip_fraction += 1.0 / bf;
        }
        let d_lp = -surrogate_grad(lp, mb.old_log_probs[i], adv, coefs.clip_eps) / bf;
        if d_lp != 0.0 {
            let (g_mean, g_ls) = gaussian::log_prob_grads(a, &mean, &log_std);
            for j in 0..act {
                d_mean[i * act + j] = T::of(d_lp * g_mean[j]);
                d_log_std[j] += d_lp * g_ls[j];
            }
        }
        let v = out.value[i].to_f64().unwrap();
        let err = v - mb.returns[i];
        stats.value += err * err / bf;
        d_value[i] = T::of(coefs.value_coef * 2.0 * err / bf);
    }
    stats.entropy = entropy(&log_std);
    // d(-entropy_coef * H)/d log_std_j = -entropy_coef
    let d_log_std: Vec<T> = d_log_std.iter().map(|g| T::of(g - coefs.entropy_coef)).collect();
    let grads = net.backward(&out.cache, &d_mean, &d_value, &d_log_std)?;
    Ok((stats, grads))
}

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before scaling.
pub fn clip_grad_norm<T: Real>(grads: &mut [T], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| {
            let x = g.to_f64().unwrap();
            x * x
        })
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = T::of(max_norm / (norm + 1e-6));
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnvSlot {
    env: LandingEnv,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    ep_reward: f64,
    ep_len: usize,
}

impl EnvSlot {
    fn restart(&mut self) -> Result<()> {
        let seed = self.rng.random::<u64>();
        self.obs = self.env.reset(seed)?.0;
        self.ep_reward = 0.0;
        self.ep_len = 0;
        Ok(())
    }
}

/// Serializable trainer state apart from the network parameters, which
/// travel in the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerState {
    setup: TrainSetup,
    adam: AdamState<f32>,
    norm: RunningNorm,
    slots: Vec<EnvSlot>,
    shuffle_rng: ChaCha8Rng,
    timestep: u64,
    iteration: u64,
    recent: VecDeque<(f64, usize)>,
    episodes: u64,
    log: TrainingLog,
    wall_s: f64,
}

pub struct Trainer {
    setup: TrainSetup,
    net: ActorCritic<f32>,
    adam: AdamState<f32>,
    norm: RunningNorm,
    slots: Vec<EnvSlot>,
    shuffle_rng: ChaCha8Rng,
    timestep: u64,
    iteration: u64,
    recent: VecDeque<(f64, usize)>,
    episodes: u64,
    log: TrainingLog,
    buffer: RolloutBuffer,
    wall_offset: f64,
    started: Instant,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self> {
        setup.validate()?;
        let seed = setup.ppo.seed;
        let net = ActorCritic::init(setup.net_spec(), derive_seed(seed, 0));
        let mut slots = Vec::with_capacity(setup.ppo.n_envs);
        for i in 0..setup.ppo.n_envs {
            let env = LandingEnv::new(setup.env.clone(), setup.sim, setup.platform.clone())?;
            let mut slot = EnvSlot {
                env,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 100 + i as u64)),
                obs: Vec::new(),
                ep_reward: 0.0,
                ep_len: 0,
            };
            slot.restart()?;
            slots.push(slot);
        }
        let mut norm = RunningNorm::new(setup.env.obs_dim());
        let first: Vec<f64> = slots.iter().flat_map(|s| s.obs.iter().copied()).collect();
        norm.update(&first)?;
        let adam = AdamState::new(net.n_params());
        Ok(Self::assemble(
            setup,
            net,
            adam,
            norm,
            slots,
            ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
        ))
    }

    fn assemble(
        setup: TrainSetup,
        net: ActorCritic<f32>,
        adam: AdamState<f32>,
        norm: RunningNorm,
        slots: Vec<EnvSlot>,
        shuffle_rng: ChaCha8Rng,
    ) -> Self {
        let buffer = RolloutBuffer::new(
            setup.ppo.rollout_length,
            setup.ppo.n_envs,
            setup.env.obs_dim(),
            setup.env.act_dim(),
        );
        Self {
            setup,
            net,
            adam,
            norm,
            slots,
            shuffle_rng,
            timestep: 0,
            iteration: 0,
            recent: VecDeque::with_capacity(EPISODE_WINDOW),
            episodes: 0,
            log: TrainingLog::default(),
            buffer,
            wall_offset: 0.0,
            started: Instant::now(),
        }
    }

    pub fn setup(&self) -> &TrainSetup {
        &self.setup
    }

    pub fn net(&self) -> &ActorCritic<f32> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut ActorCritic<f32> {
        &mut self.net
    }

    pub fn normalizer(&self) -> &RunningNorm {
        &self.norm
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn buffer(&self) -> &RolloutBuffer {
        &self.buffer
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn episodes_completed(&self) -> u64 {
        self.episodes
    }

    pub fn is_done(&self) -> bool {
        self.timestep >= self.setup.ppo.total_timesteps
    }

    fn batch_forward(&self, raw: &[f64], batch: usize) -> Result<(Vec<f32>, Vec<f32>, Vec<f32>)> {
        let obs = self.norm.normalize(raw);
        let out = self.net.forward(&obs, batch)?;
        Ok((obs, out.mean, out.value))
    }

    /// Steps every environment `rollout_length` times with sampled actions,
    /// restarting finished episodes, and fills the rollout buffer.
    pub fn collect_rollouts(&mut self) -> Result<()> {
        let n_envs = self.setup.ppo.n_envs;
        let obs_dim = self.setup.env.obs_dim();
        let act_dim = self.setup.env.act_dim();
        let gamma = self.setup.ppo.gamma;
        let log_std: Vec<f64> = self.net.log_std().iter().map(|&v| v as f64).collect();
        self.buffer.clear();
        let mut mean = vec![0.0; act_dim];
        for _ in 0..self.setup.ppo.rollout_length {
            let raw: Vec<f64> = self.slots.iter().flat_map(|s| s.obs.iter().copied()).collect();
            let (obs, means, values) = self.batch_forward(&raw, n_envs)?;
            let mut truncated = Vec::new();
            let mut pending = Vec::with_capacity(n_envs);
            for (e, slot) in self.slots.iter_mut().enumerate() {
                for (j, m) in mean.iter_mut().enumerate() {
                    *m = means[e * act_dim + j] as f64;
                }
                let s = gaussian::sample_with(&mean, &log_std, &mut slot.rng);
                let res = slot.env.step(&JointAction(s.action.clone()))?;
                slot.ep_reward += res.reward;
                slot.ep_len += 1;
                let done = res.terminated || res.truncated;
                if res.truncated {
                    truncated.push((e, res.observation.0.clone()));
                }
                pending.push((s, res.reward, done));
                if done {
                    if self.recent.len() == EPISODE_WINDOW {
                        self.recent.pop_front();
                    }
                    self.recent.push_back((slot.ep_reward, slot.ep_len));
                    self.episodes += 1;
                    slot.restart()?;
                } else {
                    slot.obs = res.observation.0;
                }
            }
            let mut bootstrap = vec![0.0; n_envs];
            if !truncated.is_empty() {
                let raw_final: Vec<f64> = truncated.iter().flat_map(|(_, o)| o.iter().copied()).collect();
                let (_, _, v_final) = self.batch_forward(&raw_final, truncated.len())?;
                for (k, (e, _)) in truncated.iter().enumerate() {
                    bootstrap[*e] = gamma * v_final[k] as f64;
                }
            }
            for (e, (s, reward, done)) in pending.into_iter().enumerate() {
                self.buffer.push(
                    &obs[e * obs_dim..(e + 1) * obs_dim],
                    &s.action,
                    s.log_prob,
                    reward,
                    values[e] as f64,
                    done,
                    bootstrap[e],
                );
            }
            let next: Vec<f64> = self.slots.iter().flat_map(|s| s.obs.iter().copied()).collect();
            self.norm.update(&next)?;
        }
        let raw: Vec<f64> = self.slots.iter().flat_map(|s| s.obs.iter().copied()).collect();
        let (_, _, last) = self.batch_forward(&raw, n_envs)?;
        let last: Vec<f64> = last.iter().map(|&v| v as f64).collect();
        self.buffer
            .compute_advantages(&last, gamma, self.setup.ppo.gae_lambda);
        Ok(())
    }

    /// Optimizes the policy on the current buffer.
    pub fn update(&mut self) -> Result<LossStats> {
        let cfg = self.setup.ppo.clone();
        let coefs = LossCoefs::from(&cfg);
        let hp = cfg.adam();
        let n = self.buffer.len();
        if n == 0 {
            return Err(Error::Config("update called on an empty buffer".into()));
        }
        let obs_dim = self.buffer.obs_dim;
        let act_dim = self.buffer.act_dim;
        let adv = normalize(&self.buffer.advantages);
        let mb_size = cfg.minibatch_size.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut total = LossStats::default();
        let mut count = 0usize;
        let mut obs = Vec::with_capacity(mb_size * obs_dim);
        let mut actions = Vec::with_capacity(mb_size * act_dim);
        for _ in 0..cfg.n_epochs {
            idx.shuffle(&mut self.shuffle_rng);
            for chunk in idx.chunks(mb_size) {
                obs.clear();
                actions.clear();
                for &i in chunk {
                    obs.extend_from_slice(&self.buffer.observations[i * obs_dim..(i + 1) * obs_dim]);
                    actions.extend_from_slice(&self.buffer.actions[i * act_dim..(i + 1) * act_dim]);
                }
                let lp_old: Vec<f64> = chunk.iter().map(|&i| self.buffer.log_probs[i]).collect();
                let mb_adv: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
                let ret: Vec<f64> = chunk.iter().map(|&i| self.buffer.returns[i]).collect();
                let mb = Minibatch {
                    obs: &obs,
                    actions: &actions,
                    old_log_probs: &lp_old,
                    advantages: &mb_adv,
                    returns: &ret,
                };
                let (mut stats, mut grads) = minibatch_loss_and_grads(&self.net, &mb, coefs)?;
                if !(stats.policy.is_finite() && stats.value.is_finite()) {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at iteration {} (policy {}, value {})",
                        self.iteration, stats.policy, stats.value
                    )));
                }
                stats.grad_norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
                if !stats.grad_norm.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite gradient at iteration {}",
                        self.iteration
                    )));
                }
                self.adam.update(self.net.params_mut(), &grads, &hp)?;
                total.policy += stats.policy;
                total.value += stats.value;
                total.entropy += stats.entropy;
                total.approx_kl += stats.approx_kl;
                total.clip_fraction += stats.clip_fraction;
                total.grad_norm += stats.grad_norm;
                count += 1;
            }
        }
        let c = count as f64;
        Ok(LossStats {
            policy: total.policy / c,
            value: total.value / c,
            entropy: total.entropy / c,
            approx_kl: total.approx_kl / c,
            clip_fraction: total.clip_fraction / c,
            grad_norm: total.grad_norm / c,
        })
    }

    fn wall_clock(&self) -> f64 {
        if self.setup.ppo.log_wall_clock {
            self.wall_offset + self.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    /// One collect + update cycle; appends and returns the log row.
    pub fn iterate(&mut self) -> Result<IterationRecord> {
        self.collect_rollouts()?;
        let stats = self.update()?;
        self.timestep += self.buffer.len() as u64;
        self.iteration += 1;
        let (rew, len) = if self.recent.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let k = self.recent.len() as f64;
            (
                self.recent.iter().map(|r| r.0).sum::<f64>() / k,
                self.recent.iter().map(|r| r.1 as f64).sum::<f64>() / k,
            )
        };
        let wall_s = self.wall_clock();
        let rec = IterationRecord {
            timestep: self.timestep,
            ep_rew_mean: rew,
            ep_len_mean: len,
            loss_policy: stats.policy,
            loss_value: stats.value,
            entropy: stats.entropy,
            kl: stats.approx_kl,
            wall_s,
        };
        self.log.push(rec.clone());
        Ok(rec)
    }

    /// Iterates until `total_timesteps`, calling `on_update` after each
    /// update.
    pub fn train_with<F>(&mut self, mut on_update: F) -> Result<()>
    where
        F: FnMut(&Trainer, &IterationRecord) -> Result<()>,
    {
        while !self.is_done() {
            let rec = self.iterate()?;
            on_update(self, &rec)?;
        }
        Ok(())
    }

    pub fn train(&mut self) -> Result<()> {
        self.train_with(|_, _| Ok(()))
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            setup: self.setup.clone(),
            adam: self.adam.clone(),
            norm: self.norm.clone(),
            slots: self.slots.clone(),
            shuffle_rng: self.shuffle_rng.clone(),
            timestep: self.timestep,
            iteration: self.iteration,
            recent: self.recent.clone(),
            episodes: self.episodes,
            log: self.log.clone(),
            wall_s: self.wall_clock(),
        }
    }

    /// Rebuilds a trainer from saved parameters and state; the next update
    /// is numerically identical to the one an uninterrupted run would make.
    pub fn resume(net: ActorCritic<f32>, state: TrainerState) -> Result<Self> {
        if net.spec() != &state.setup.net_spec() {
            return Err(Error::Resume("network shape differs from the saved setup".into()));
        }
        if state.adam.m.len() != net.n_params() {
            return Err(Error::Resume("optimizer state size differs from the network".into()));
        }
        let TrainerState {
            setup,
            adam,
            norm,
            slots,
            shuffle_rng,
            timestep,
            iteration,
            recent,
            episodes,
            log,
            wall_s,
        } = state;
        let mut t = Self::assemble(setup, net, adam, norm, slots, shuffle_rng);
        t.timestep = timestep;
        t.iteration = iteration;
        t.recent = recent;
        t.episodes = episodes;
        t.log = log;
        t.wall_offset = wall_s;
        Ok(t)
    }

    /// Continues training under a new timestep budget.
    pub fn set_total_timesteps(&mut self, total: u64) {
        self.setup.ppo.total_timesteps = total;
    }
}

impl TrainerState {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        bincode::serialize(self).map_err(|e| Error::Resume(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        bincode::deserialize(bytes).map_err(|e| Error::Resume(e.to_string()))
    }

    pub fn setup(&self) -> &TrainSetup {
        &self.setup
    }

    pub fn normalizer(&self) -> &RunningNorm {
        &self.norm
    }
}
