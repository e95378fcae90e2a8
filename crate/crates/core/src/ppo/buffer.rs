use serde::{Deserialize, Serialize};

use super::gae::compute_gae;

/// Fixed-capacity store of one rollout across `n_envs` environments,
/// indexed `step * n_envs + env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    capacity: usize,
    /// Normalized observations exactly as fed to the policy.
    pub observations: Vec<f32>,
    /// Pre-clamp sampled actions.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Discounted value of the final state for transitions that hit the
    /// step limit; zero elsewhere.
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(rollout_length: usize, n_envs: usize, obs_dim: usize, act_dim: usize) -> Self {
        let capacity = rollout_length * n_envs;
        Self {
            n_envs,
            obs_dim,
            act_dim,
            capacity,
            observations: Vec::with_capacity(capacity * obs_dim),
            actions: Vec::with_capacity(capacity * act_dim),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            bootstrap: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.bootstrap.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f32],
        action: &[f64],
        log_prob: f64,
        reward: f64,
        value: f64,
        done: bool,
        bootstrap: f64,
    ) {
        assert!(!self.is_full(), "rollout buffer overflow");
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        self.observations.extend_from_slice(obs);
        self.actions.extend_from_slice(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        self.bootstrap.push(bootstrap);
    }

    /// Runs GAE independently along each environment's column.
    pub fn compute_advantages(&mut self, last_values: &[f64], gamma: f64, lambda: f64) {
        assert_eq!(last_values.len(), self.n_envs);
        let n = self.len();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        for e in 0..self.n_envs {
            let idx: Vec<usize> = (e..n).step_by(self.n_envs).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i] + self.bootstrap[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (adv, ret) = compute_gae(&r, &v, &d, last_values[e], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = adv[k];
                self.returns[i] = ret[k];
            }
        }
    }

    /// Advantages shifted and scaled to zero mean and unit variance. A
    /// single transition is returned unchanged.
    pub fn normalized_advantages(&self) -> Vec<f64> {
        normalize(&self.advantages)
    }
}

pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.len() < 2 {
        return xs.to_vec();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    xs.iter().map(|x| (x - mean) / sd).collect()
}
