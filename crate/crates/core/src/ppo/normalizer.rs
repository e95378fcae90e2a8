use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_CLIP: f64 = 10.0;
const VAR_EPS: f64 = 1e-8;

/// Running per-dimension mean and variance, merged batch-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 1e-4,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Folds a row-major batch into the statistics.
    pub fn update(&mut self, batch: &[f64]) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || batch.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "batch of {} values is not a multiple of {dim}",
                batch.len()
            )));
        }
        let n = (batch.len() / dim) as f64;
        for j in 0..dim {
            let col = batch.iter().skip(j).step_by(dim);
            let b_mean = col.clone().sum::<f64>() / n;
            let b_var = col.map(|x| (x - b_mean) * (x - b_mean)).sum::<f64>() / n;
            let delta = b_mean - self.mean[j];
            let total = self.count + n;
            let m2 = self.var[j] * self.count + b_var * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count += n;
        Ok(())
    }

    pub fn normalize_into(&self, raw: &[f64], out: &mut Vec<f32>) {
        out.extend(raw.iter().enumerate().map(|(i, &x)| {
            let j = i % self.mean.len();
            ((x - self.mean[j]) / (self.var[j] + VAR_EPS).sqrt()).clamp(-OBS_CLIP, OBS_CLIP) as f32
        }));
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f32> {
        let mut out = Vec::with_capacity(raw.len());
        self.normalize_into(raw, &mut out);
        out
    }
}
