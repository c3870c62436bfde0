//! Fully-connected Q-network with ReLU hidden layers and a linear head.
//!
//! Parameters live in one flat vector, layer by layer, each layer stored as
//! its row-major weight matrix followed by its bias vector.

use rand::Rng;

use super::DqnError;
use crate::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Reusable buffers for forward/backward passes.
#[derive(Debug, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    nonzero: Vec<(usize, f64)>,
}

impl QNetwork {
    /// Zero-initialized network with the given layer widths (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self, DqnError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(DqnError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; count],
        })
    }

    /// He-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut SimRng) -> Result<Self, DqnError> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, DqnError> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(DqnError::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// (weight offset, bias offset) of layer `l`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Hidden activations into `scratch.acts`; `acts[l]` is the input of layer `l`.
    fn hidden_pass(&self, x: &[f64], scratch: &mut Scratch) {
        assert_eq!(x.len(), self.input_len(), "feature length mismatch");
        let layers = self.layers();
        scratch.acts.resize_with(layers, Vec::new);
        scratch.acts[0].clear();
        scratch.acts[0].extend_from_slice(x);
        for l in 0..layers - 1 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.offsets(l);
            let w = &self.params[wo..bo];
            let b = &self.params[bo..bo + n_out];
            scratch.nonzero.clear();
            scratch
                .nonzero
                .extend(scratch.acts[l].iter().copied().enumerate().filter(|&(_, v)| v != 0.0));
            let (head, tail) = scratch.acts.split_at_mut(l + 1);
            let out = &mut tail[0];
            out.clear();
            let dense = scratch.nonzero.len() * 2 > n_in;
            for k in 0..n_out {
                let row = &w[k * n_in..(k + 1) * n_in];
                let z = if dense {
                    b[k] + dot(row, &head[l])
                } else {
                    b[k] + scratch.nonzero.iter().map(|&(j, v)| row[j] * v).sum::<f64>()
                };
                out.push(z.max(0.0));
            }
        }
    }

    /// All action values for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::default();
        self.forward_with(x, &mut scratch)
    }

    pub fn forward_with(&self, x: &[f64], scratch: &mut Scratch) -> Vec<f64> {
        self.hidden_pass(x, scratch);
        let l = self.layers() - 1;
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let (wo, bo) = self.offsets(l);
        let h = &scratch.acts[l];
        (0..n_out)
            .map(|k| self.params[bo + k] + dot(&self.params[wo + k * n_in..wo + (k + 1) * n_in], h))
            .collect()
    }

    /// Largest action value.
    pub fn max_value(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        self.forward_with(x, scratch).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q(x, action)`; adds `scale(Q) * dQ/dtheta` into `grad`.
    pub fn value_and_grad(
        &self,
        x: &[f64],
        action: usize,
        grad: &mut [f64],
        scale: impl FnOnce(f64) -> f64,
        scratch: &mut Scratch,
    ) -> f64 {
        assert_eq!(grad.len(), self.params.len());
        self.hidden_pass(x, scratch);
        let last = self.layers() - 1;
        let n_hidden = self.sizes[last];
        let (wo, bo) = self.offsets(last);
        let row_off = wo + action * n_hidden;
        let h = &scratch.acts[last];
        let q = self.params[bo + action] + dot(&self.params[row_off..row_off + n_hidden], h);
        let scale = scale(q);
        if scale == 0.0 {
            return q;
        }

        for (g, &hv) in grad[row_off..row_off + n_hidden].iter_mut().zip(h) {
            *g += scale * hv;
        }
        grad[bo + action] += scale;

        // dQ/d(input of the head), gated by ReLU of the last hidden layer
        scratch.delta.clear();
        scratch.delta.extend(
            self.params[row_off..row_off + n_hidden]
                .iter()
                .zip(h)
                .map(|(&w, &hv)| if hv > 0.0 { w } else { 0.0 }),
        );

        for l in (0..last).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.offsets(l);
            let input = &scratch.acts[l];
            scratch.nonzero.clear();
            scratch
                .nonzero
                .extend(input.iter().copied().enumerate().filter(|&(_, v)| v != 0.0));
            for k in 0..n_out {
                let d = scratch.delta[k];
                if d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                grad[bo + k] += sd;
                let grow = &mut grad[wo + k * n_in..wo + (k + 1) * n_in];
                for &(j, v) in &scratch.nonzero {
                    grow[j] += sd * v;
                }
            }
            if l > 0 {
                scratch.delta_prev.clear();
                scratch.delta_prev.resize(n_in, 0.0);
                for k in 0..n_out {
                    let d = scratch.delta[k];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &self.params[wo + k * n_in..wo + (k + 1) * n_in];
                    for (acc, &w) in scratch.delta_prev.iter_mut().zip(row) {
                        *acc += w * d;
                    }
                }
                for (acc, &v) in scratch.delta_prev.iter_mut().zip(input) {
                    if v <= 0.0 {
                        *acc = 0.0;
                    }
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
            }
        }
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
