use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_atomic;

pub const CSV_HEADER: &str = "timestep,ep_rew_mean,ep_len_mean,loss_policy,loss_value,entropy,kl,wall_s";

/// One row per update: episodic statistics over the most recent completed
/// episodes and the optimizer's loss averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub timestep: u64,
    pub ep_rew_mean: f64,
    pub ep_len_mean: f64,
    pub loss_policy: f64,
    pub loss_value: f64,
    pub entropy: f64,
    pub kl: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<IterationRecord>,
}

impl TrainingLog {
    pub fn push(&mut self, rec: IterationRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.timestep > last.timestep, "timesteps must increase");
        }
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.timestep,
                r.ep_rew_mean,
                r.ep_len_mean,
                r.loss_policy,
                r.loss_value,
                r.entropy,
                r.kl,
                r.wall_s
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    /// Means of episode reward and length over the first and last
    /// `fraction` of records that have episode statistics.
    pub fn trend(&self, fraction: f64) -> Option<Trend> {
        let rows: Vec<&IterationRecord> =
            self.records.iter().filter(|r| r.ep_rew_mean.is_finite()).collect();
        let k = ((rows.len() as f64 * fraction).ceil() as usize).max(1);
        if rows.len() < 2 * k {
            return None;
        }
        let mean = |xs: &[&IterationRecord], f: fn(&IterationRecord) -> f64| {
            xs.iter().map(|r| f(r)).sum::<f64>() / xs.len() as f64
        };
        let first = &rows[..k];
        let last = &rows[rows.len() - k..];
        Some(Trend {
            reward_first: mean(first, |r| r.ep_rew_mean),
            reward_last: mean(last, |r| r.ep_rew_mean),
            length_first: mean(first, |r| r.ep_len_mean),
            length_last: mean(last, |r| r.ep_len_mean),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend {
    pub reward_first: f64,
    pub reward_last: f64,
    pub length_first: f64,
    pub length_last: f64,
}
