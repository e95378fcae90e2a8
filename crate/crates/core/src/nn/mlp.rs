//! Shared-trunk actor-critic MLP with explicit forward and reverse passes.
//!
//! Layout: a ReLU trunk `obs -> h1 -> ... -> hL`, then two linear heads off
//! the last hidden layer: the action mean (passed through `tanh`) and a
//! scalar state value. A state-independent `log_std` vector closes the
//! parameter block. All parameters live in one flat vector in that order,
//! each layer stored as its weight matrix (`out x in`, row-major) followed
//! by its bias.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::real::{gemm, Real, View};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorCriticSpec {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
}

impl ActorCriticSpec {
    /// Joint two-drone policy: 26 inputs, hidden widths 512, 512, 256, 128,
    /// six action outputs.
    pub fn landing() -> Self {
        Self {
            obs_dim: 26,
            hidden: vec![512, 512, 256, 128],
            act_dim: 6,
        }
    }

    /// `(rows, cols)` of every weight matrix in storage order: trunk layers,
    /// action head, value head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden.len() + 2);
        let mut fan_in = self.obs_dim;
        for &h in &self.hidden {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((self.act_dim, fan_in));
        shapes.push((1, fan_in));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum::<usize>() + self.act_dim
    }

    fn last_hidden(&self) -> usize {
        *self.hidden.last().unwrap_or(&self.obs_dim)
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSlot {
    rows: usize,
    cols: usize,
    w: usize,
    b: usize,
}

fn slots(spec: &ActorCriticSpec) -> (Vec<LayerSlot>, usize) {
    let mut off = 0;
    let slots = spec
        .layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let s = LayerSlot {
                rows,
                cols,
                w: off,
                b: off + rows * cols,
            };
            off += rows * cols + rows;
            s
        })
        .collect();
    (slots, off)
}

/// Intermediate values retained by [`ActorCritic::forward`] for the reverse
/// pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    generation: u64,
    batch: usize,
    input: Vec<T>,
    /// Pre-activations of each trunk layer.
    pre: Vec<Vec<T>>,
    /// ReLU outputs of each trunk layer.
    post: Vec<Vec<T>>,
    /// `tanh`-squashed action means.
    mean: Vec<T>,
}

impl<T> Cache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Pre-activations of trunk layer `l`, `batch x width`.
    pub fn pre_activations(&self, l: usize) -> &[T] {
        &self.pre[l]
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// `batch x act_dim`, each entry in `(-1, 1)`.
    pub mean: Vec<T>,
    pub value: Vec<T>,
    pub cache: Cache<T>,
}

#[derive(Debug, Clone)]
pub struct ActorCritic<T> {
    spec: ActorCriticSpec,
    slots: Vec<LayerSlot>,
    params: Vec<T>,
    generation: u64,
}

impl<T: Real> ActorCritic<T> {
    /// All-zero parameters.
    pub fn zeros(spec: ActorCriticSpec) -> Self {
        let (slots, n) = slots(&spec);
        let total = n + spec.act_dim;
        Self {
            spec,
            slots,
            params: vec![T::zero(); total],
            generation: 0,
        }
    }

    /// Orthogonal init with gain sqrt(2) on trunk layers, 0.01 on the action
    /// head and 1 on the value head; zero biases; `log_std = ln(0.5)`.
    pub fn init(spec: ActorCriticSpec, seed: u64) -> Self {
        let mut net = Self::zeros(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = net.slots.len();
        for (i, slot) in net.slots.clone().into_iter().enumerate() {
            let gain = if i + 2 == n_layers {
                0.01
            } else if i + 1 == n_layers {
                1.0
            } else {
                std::f64::consts::SQRT_2
            };
            let w = orthogonal(slot.rows, slot.cols, gain, &mut rng);
            for (dst, src) in net.params[slot.w..slot.b].iter_mut().zip(w) {
                *dst = T::of(src);
            }
        }
        let half = T::of(0.5f64.ln());
        net.log_std_mut().iter_mut().for_each(|v| *v = half);
        net
    }

    pub fn from_params(spec: ActorCriticSpec, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(spec);
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &ActorCriticSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Mutable access to the flat parameter vector. Invalidates caches from
    /// earlier forward passes.
    pub fn params_mut(&mut self) -> &mut [T] {
        self.generation += 1;
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn log_std(&self) -> &[T] {
        let n = self.params.len();
        &self.params[n - self.spec.act_dim..]
    }

    pub fn log_std_mut(&mut self) -> &mut [T] {
        self.generation += 1;
        let n = self.params.len();
        &mut self.params[n - self.spec.act_dim..]
    }

    /// Offset of the `log_std` block in the flat parameter vector.
    pub fn log_std_offset(&self) -> usize {
        self.params.len() - self.spec.act_dim
    }

    /// `(rows, cols, weight offset, bias offset)` for each layer.
    pub fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        self.slots.iter().map(|s| (s.rows, s.cols, s.w, s.b)).collect()
    }

    fn affine(&self, slot: LayerSlot, x: &[T], batch: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(batch * slot.rows);
        let bias = &self.params[slot.b..slot.b + slot.rows];
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        let w = View::new(&self.params[slot.w..slot.b], slot.rows, slot.cols);
        gemm(View::new(x, batch, slot.cols), w.t(), T::one(), &mut out);
        out
    }

    /// Evaluates a batch of observations laid out row-major,
    /// `batch x obs_dim`.
    pub fn forward(&self, obs: &[T], batch: usize) -> Result<ForwardOutput<T>> {
        if obs.len() != batch * self.spec.obs_dim {
            return Err(Error::Shape(format!(
                "observation batch has {} values, expected {} x {}",
                obs.len(),
                batch,
                self.spec.obs_dim
            )));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        let n_hidden = self.spec.hidden.len();
        let mut pre = Vec::with_capacity(n_hidden);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(n_hidden);
        for l in 0..n_hidden {
            let x = if l == 0 { obs } else { &post[l - 1] };
            let z = self.affine(self.slots[l], x, batch);
            let h: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
            pre.push(z);
            post.push(h);
        }
        let last = if n_hidden == 0 { obs } else { &post[n_hidden - 1] };
        let mut mean = self.affine(self.slots[n_hidden], last, batch);
        mean.iter_mut().for_each(|m| *m = m.tanh());
        let value = self.affine(self.slots[n_hidden + 1], last, batch);
        Ok(ForwardOutput {
            cache: Cache {
                generation: self.generation,
                batch,
                input: obs.to_vec(),
                pre,
                post,
                mean: mean.clone(),
            },
            mean,
            value,
        })
    }

    /// Reverse pass. Takes the loss gradient with respect to the squashed
    /// action means (`batch x act_dim`), the values (`batch`) and `log_std`
    /// (`act_dim`), and returns the gradient for every parameter in flat
    /// storage order.
    pub fn backward(
        &self,
        cache: &Cache<T>,
        d_mean: &[T],
        d_value: &[T],
        d_log_std: &[T],
    ) -> Result<Vec<T>> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache);
        }
        let b = cache.batch;
        let act = self.spec.act_dim;
        if d_mean.len() != b * act || d_value.len() != b || d_log_std.len() != act {
            return Err(Error::Shape("upstream gradient shapes".into()));
        }
        let mut grads = vec![T::zero(); self.params.len()];
        let n_hidden = self.spec.hidden.len();
        let last = if n_hidden == 0 {
            &cache.input
        } else {
            &cache.post[n_hidden - 1]
        };
        let width = self.spec.last_hidden();

        // action head through tanh
        let d_pre_a: Vec<T> = d_mean
            .iter()
            .zip(&cache.mean)
            .map(|(&g, &m)| g * (T::one() - m * m))
            .collect();
        let head = self.slots[n_hidden];
        self.accumulate_layer(head, &d_pre_a, last, b, &mut grads);
        let mut d_h = vec![T::zero(); b * width];
        let w_a = View::new(&self.params[head.w..head.b], head.rows, head.cols);
        gemm(View::new(&d_pre_a, b, act), w_a, T::zero(), &mut d_h);

        let vhead = self.slots[n_hidden + 1];
        self.accumulate_layer(vhead, d_value, last, b, &mut grads);
        let w_v = View::new(&self.params[vhead.w..vhead.b], 1, width);
        gemm(View::new(d_value, b, 1), w_v, T::one(), &mut d_h);

        for l in (0..n_hidden).rev() {
            let slot = self.slots[l];
            let d_z: Vec<T> = d_h
                .iter()
                .zip(&cache.pre[l])
                .map(|(&g, &z)| if z > T::zero() { g } else { T::zero() })
                .collect();
            let x = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            self.accumulate_layer(slot, &d_z, x, b, &mut grads);
            if l > 0 {
                let mut next = vec![T::zero(); b * slot.cols];
                let w = View::new(&self.params[slot.w..slot.b], slot.rows, slot.cols);
                gemm(View::new(&d_z, b, slot.rows), w, T::zero(), &mut next);
                d_h = next;
            }
        }
        let off = self.log_std_offset();
        grads[off..].copy_from_slice(d_log_std);
        Ok(grads)
    }

    /// Adds `d_out^T @ x` into the weight gradient and the column sums of
    /// `d_out` into the bias gradient.
    fn accumulate_layer(&self, slot: LayerSlot, d_out: &[T], x: &[T], b: usize, grads: &mut [T]) {
        gemm(
            View::new(d_out, b, slot.rows).t(),
            View::new(x, b, slot.cols),
            T::one(),
            &mut grads[slot.w..slot.b],
        );
        let gb = &mut grads[slot.b..slot.b + slot.rows];
        for row in d_out.chunks_exact(slot.rows) {
            for (g, &d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ActorCritic<U> {
        ActorCritic {
            spec: self.spec.clone(),
            slots: self.slots.clone(),
            params: self
                .params
                .iter()
                .map(|p| U::of(p.to_f64().unwrap_or(f64::NAN)))
                .collect(),
            generation: 0,
        }
    }
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is
/// fewer), scaled by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // orthonormalize `k` vectors of length `len` by modified Gram-Schmidt
    let (k, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..len).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for i in 0..k {
        let (done, rest) = vecs.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let d: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    out
}
