//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! run the network forward.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmland::nn::{ActorCritic, ActorCriticSpec};

/// Per-drone reward written out term by term.
pub fn reward_oracle(prev: f64, cur: f64, speed: f64, first_landing: f64, alpha: f64, beta: f64, c: f64) -> f64 {
    let shaping = alpha * prev - alpha * cur;
    let damping = beta * speed;
    let bonus = c * first_landing;
    shaping + damping + bonus
}

pub fn team_oracle(rs: &[f64], collided: bool, everyone_down: bool, alpha_c: f64, k: f64) -> f64 {
    let mut total = 0.0;
    for r in rs {
        total += r;
    }
    if collided {
        total -= alpha_c;
    }
    if everyone_down {
        total += k;
    }
    total
}

/// Advantage as the explicit sum `sum_k (gamma*lambda)^k delta_{t+k}`,
/// stopping after the first episode boundary.
pub fn gae_bruteforce(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let v_next = |j: usize| if j + 1 < n { values[j + 1] } else { last_value };
    let delta = |j: usize| {
        let cont = if dones[j] { 0.0 } else { gamma * v_next(j) };
        rewards[j] + cont - values[j]
    };
    (0..n)
        .map(|t| {
            let mut a = 0.0;
            for k in 0..(n - t) {
                a += (gamma * lambda).powi(k as i32) * delta(t + k);
                if dones[t + k] {
                    break;
                }
            }
            a
        })
        .collect()
}

/// Log-density of a diagonal Gaussian, written independently of the crate.
pub fn gaussian_log_prob(a: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut lp = 0.0;
    for j in 0..a.len() {
        let sigma = log_std[j].exp();
        let z = (a[j] - mean[j]) / sigma;
        lp += -0.5 * z * z - log_std[j] - 0.5 * (2.0 * PI).ln();
    }
    lp
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls).sum()
}

/// Signs of every trunk pre-activation; a change between `+h` and `-h`
/// perturbations means the finite difference straddles a ReLU kink.
pub fn relu_pattern(net: &ActorCritic<f64>, obs: &[f64], batch: usize) -> Vec<bool> {
    let out = net.forward(obs, batch).unwrap();
    (0..net.spec().hidden.len())
        .flat_map(|l| out.cache.pre_activations(l).iter().map(|&z| z > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Scalar objective plus a vector of branch indicators.
pub type Objective<'a> = dyn Fn(&ActorCritic<f64>) -> (f64, Vec<bool>) + 'a;

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

/// Central differences on the listed parameters. Parameters whose
/// perturbation changes any branch indicator are skipped. The relative
/// error uses `max(|analytic|, |numeric|, floor)` as denominator.
pub fn fd_check(net: &ActorCritic<f64>, analytic: &[f64], indices: &[usize], h: f64, floor: f64, f: &Objective<'_>) -> FdReport {
    let mut rep = FdReport::default();
    let mut probe = net.clone();
    for &i in indices {
        let orig = net.params()[i];
        probe.params_mut()[i] = orig + h;
        let (fp, bp) = f(&probe);
        probe.params_mut()[i] = orig - h;
        let (fm, bm) = f(&probe);
        probe.params_mut()[i] = orig;
        if bp != bm {
            rep.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        rep.max_rel = rep.max_rel.max(rel);
        rep.checked += 1;
    }
    rep
}

/// Parameter indices sampled so every weight block, bias block and
/// `log_std` is represented.
pub fn stratified_indices(net: &ActorCritic<f64>, per_block: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx = Vec::new();
    for (rows, cols, w_off, b_off) in net.layer_offsets() {
        for _ in 0..per_block {
            idx.push(w_off + rng.random_range(0..rows * cols));
            idx.push(b_off + rng.random_range(0..rows));
        }
    }
    let ls = net.log_std_offset();
    for j in 0..net.spec().act_dim {
        idx.push(ls + j);
    }
    idx
}

pub fn random_spec(rng: &mut ChaCha8Rng) -> ActorCriticSpec {
    let depth = rng.random_range(1..=3);
    ActorCriticSpec {
        obs_dim: rng.random_range(2..=7),
        hidden: (0..depth).map(|_| rng.random_range(3..=9)).collect(),
        act_dim: rng.random_range(1..=4),
    }
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minibatch PPO objective evaluated from scratch on the network outputs.
pub struct PpoProblem {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub old_lp: Vec<f64>,
    pub adv: Vec<f64>,
    pub returns: Vec<f64>,
    pub clip: f64,
    pub vf: f64,
    pub ent: f64,
}

impl PpoProblem {
    pub fn batch(&self) -> usize {
        self.returns.len()
    }

    pub fn objective(&self, net: &ActorCritic<f64>) -> (f64, Vec<bool>) {
        let b = self.batch();
        let act = net.spec().act_dim;
        let out = net.forward(&self.obs, b).unwrap();
        let ls = net.log_std().to_vec();
        let mut branches = relu_pattern(net, &self.obs, b);
        let mut policy = 0.0;
        let mut value = 0.0;
        for i in 0..b {
            let m = &out.mean[i * act..(i + 1) * act];
            let a = &self.actions[i * act..(i + 1) * act];
            let r = (gaussian_log_prob(a, m, &ls) - self.old_lp[i]).exp();
            let unclipped = r * self.adv[i];
            let clipped = r.clamp(1.0 - self.clip, 1.0 + self.clip) * self.adv[i];
            branches.push(clipped < unclipped);
            branches.push(r < 1.0 - self.clip);
            branches.push(r > 1.0 + self.clip);
            policy -= unclipped.min(clipped) / b as f64;
            value += (out.value[i] - self.returns[i]).powi(2) / b as f64;
        }
        (policy + self.vf * value - self.ent * gaussian_entropy(&ls), branches)
    }
}
