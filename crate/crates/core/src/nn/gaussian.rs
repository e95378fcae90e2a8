//! Diagonal Gaussian action distribution with a state-independent standard
//! deviation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicySample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub entropy: f64,
}

pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&a, &m), &ls)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + HALF_LN_2PI + ls).sum()
}

/// Gradients of `log_prob` with respect to the mean and `log_std`.
pub fn log_prob_grads(action: &[f64], mean: &[f64], log_std: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_ls = Vec::with_capacity(mean.len());
    for ((&a, &m), &ls) in action.iter().zip(mean).zip(log_std) {
        let inv_var = (-2.0 * ls).exp();
        let diff = a - m;
        d_mean.push(diff * inv_var);
        d_ls.push(diff * diff * inv_var - 1.0);
    }
    (d_mean, d_ls)
}

pub fn sample_with(mean: &[f64], log_std: &[f64], rng: &mut ChaCha8Rng) -> GaussianPolicySample {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let z: f64 = StandardNormal.sample(rng);
            m + ls.exp() * z
        })
        .collect();
    GaussianPolicySample {
        log_prob: log_prob(&action, mean, log_std),
        entropy: entropy(log_std),
        action,
    }
}

pub fn sample(mean: &[f64], log_std: &[f64], seed: u64) -> GaussianPolicySample {
    sample_with(mean, log_std, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn density_at_mode_unit_sigma() {
        let lp = log_prob(&[0.3; 6], &[0.3; 6], &[0.0; 6]);
        assert!((lp - (-3.0 * (2.0 * PI).ln())).abs() < 1e-12);
        assert!((lp + 5.5136).abs() < 1e-4);
    }

    #[test]
    fn unit_sigma_entropy() {
        let h = entropy(&[0.0; 6]);
        assert!((h - 3.0 * (2.0 * PI * E).ln()).abs() < 1e-12);
        assert!((h - 8.51363).abs() < 1e-4);
    }

    #[test]
    fn sampling_is_seeded() {
        let mean = [0.1, -0.2, 0.3, 0.0, 0.5, -0.5];
        let ls = [-0.7; 6];
        assert_eq!(sample(&mean, &ls, 9), sample(&mean, &ls, 9));
        assert_ne!(sample(&mean, &ls, 9).action, sample(&mean, &ls, 10).action);
    }

    #[test]
    fn sample_log_prob_matches_density() {
        let mean = [0.1, -0.2, 0.3];
        let ls = [-0.5, 0.2, -1.0];
        let s = sample(&mean, &ls, 4);
        // independent evaluation of the product of univariate densities
        let mut dens = 1.0;
        for j in 0..3 {
            let sd = f64::exp(ls[j]);
            let z = (s.action[j] - mean[j]) / sd;
            dens *= (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt());
        }
        assert!((s.log_prob - dens.ln()).abs() < 1e-12);
        assert_eq!(s.entropy, entropy(&ls));
    }

    #[test]
    fn grads_match_finite_differences() {
        let a = [0.4, -0.1];
        let m = [0.1, 0.2];
        let ls = [-0.3, 0.1];
        let (dm, dls) = log_prob_grads(&a, &m, &ls);
        let h = 1e-6;
        for j in 0..2 {
            let mut mp = m;
            let mut mm = m;
            mp[j] += h;
            mm[j] -= h;
            let fd = (log_prob(&a, &mp, &ls) - log_prob(&a, &mm, &ls)) / (2.0 * h);
            assert!((fd - dm[j]).abs() < 1e-8);
            let mut lp = ls;
            let mut lm = ls;
            lp[j] += h;
            lm[j] -= h;
            let fd = (log_prob(&a, &m, &lp) - log_prob(&a, &m, &lm)) / (2.0 * h);
            assert!((fd - dls[j]).abs() < 1e-8);
        }
    }
}
