//! Small fully connected network with leaky-ReLU hidden layers, MSE loss and Adam.
//!
//! Parameters live in one flat vector. Layer `l` occupies a `fan_in x fan_out` row-major
//! weight block (row `j` holds the weights leaving input `j`) followed by `fan_out` biases.
//! Every unit accumulates `sum_j x_j w_jo` in increasing `j` and then adds its bias, so all
//! evaluation paths below produce bit-identical outputs.

mod adam;
mod checkpoint;

pub use adam::AdamState;
pub use checkpoint::{
    load_network, read_network, save_network, sidecar_path, sidecar_text, write_network,
    NETWORK_MAGIC,
};
pub(crate) use checkpoint::{read_f64, read_u32};

use rand::Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub leaky_slope: f64,
    pub output_dim: usize,
}

impl NetConfig {
    /// Five hidden layers of 30 units, slope 0.01, scalar output.
    pub fn q_network(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: 5,
            hidden_width: 30,
            leaky_slope: 0.01,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 || self.output_dim == 0 {
            return Err(invalid(format!("network dimensions must all be >= 1: {self:?}")));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(invalid(format!(
                "leaky slope must lie in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each affine map, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        shapes.push((self.input_dim, self.hidden_width));
        for _ in 1..self.hidden_layers {
            shapes.push((self.hidden_width, self.hidden_width));
        }
        shapes.push((self.hidden_width, self.output_dim));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    config: NetConfig,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

/// Reusable activation buffers for batched evaluation.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    ping: Vec<f64>,
    pong: Vec<f64>,
    base: Vec<f64>,
}

/// Per-layer pre-activations and activations kept for backpropagation.
#[derive(Debug, Default, Clone)]
pub struct TrainCache {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl QNetwork {
    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for slot in net.slots.clone() {
            let limit = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut net.params[slot.weights..slot.weights + slot.fan_in * slot.fan_out] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut slots = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in config.layer_shapes() {
            slots.push(LayerSlot {
                fan_in,
                fan_out,
                weights: offset,
                bias: offset + fan_in * fan_out,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Self {
            config,
            slots,
            params: vec![0.0; offset],
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("network parameters must be finite"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Weight from input `j` to unit `o` of layer `layer`.
    pub fn weight(&self, layer: usize, j: usize, o: usize) -> f64 {
        let s = self.slots[layer];
        self.params[s.weights + j * s.fan_out + o]
    }

    pub fn bias(&self, layer: usize, o: usize) -> f64 {
        let s = self.slots[layer];
        self.params[s.bias + o]
    }

    pub fn set_weight(&mut self, layer: usize, j: usize, o: usize, value: f64) {
        let s = self.slots[layer];
        self.params[s.weights + j * s.fan_out + o] = value;
    }

    pub fn set_bias(&mut self, layer: usize, o: usize, value: f64) {
        let s = self.slots[layer];
        self.params[s.bias + o] = value;
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }

    /// Scalar output for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        if self.config.output_dim != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.config.output_dim,
            });
        }
        self.check_input(features)?;
        let mut ws = Workspace::default();
        let mut out = Vec::with_capacity(1);
        self.forward_batch(features, 1, &mut ws, &mut out);
        Ok(out[0])
    }

    /// Evaluates `count` stacked inputs; `out` receives `count * output_dim` values.
    pub fn forward_batch(&self, inputs: &[f64], count: usize, ws: &mut Workspace, out: &mut Vec<f64>) {
        debug_assert_eq!(inputs.len(), count * self.config.input_dim);
        let first = self.slots[0];
        ws.ping.clear();
        ws.ping.resize(count * first.fan_out, 0.0);
        for c in 0..count {
            let x = &inputs[c * first.fan_in..(c + 1) * first.fan_in];
            let y = &mut ws.ping[c * first.fan_out..(c + 1) * first.fan_out];
            self.affine_into(first, x, y);
        }
        self.finish_batch(count, ws, out);
    }

    /// Evaluates the inputs `prefix ++ [v]` for every `v` in `last_values`, sharing the
    /// prefix's contribution to the first layer. Bit-identical to `forward_batch`.
    pub fn forward_sweep(&self, prefix: &[f64], last_values: &[f64], ws: &mut Workspace, out: &mut Vec<f64>) {
        let first = self.slots[0];
        debug_assert_eq!(prefix.len() + 1, first.fan_in);
        let count = last_values.len();
        ws.base.clear();
        ws.base.resize(first.fan_out, 0.0);
        for (j, &xj) in prefix.iter().enumerate() {
            let row = &self.params[first.weights + j * first.fan_out..first.weights + (j + 1) * first.fan_out];
            for (b, &w) in ws.base.iter_mut().zip(row) {
                *b += xj * w;
            }
        }
        let last_row = &self.params
            [first.weights + prefix.len() * first.fan_out..first.weights + first.fan_in * first.fan_out];
        let bias = &self.params[first.bias..first.bias + first.fan_out];
        let slope = self.config.leaky_slope;
        let output_is_hidden = self.slots.len() > 1;
        ws.ping.clear();
        ws.ping.resize(count * first.fan_out, 0.0);
        for (c, &v) in last_values.iter().enumerate() {
            let y = &mut ws.ping[c * first.fan_out..(c + 1) * first.fan_out];
            for o in 0..first.fan_out {
                let z = (ws.base[o] + v * last_row[o]) + bias[o];
                y[o] = if output_is_hidden { leaky_relu(z, slope) } else { z };
            }
        }
        self.finish_batch(count, ws, out);
    }

    /// Overwrites `self` with `src`'s parameters; the configurations must agree.
    pub fn copy_weights_from(&mut self, src: &QNetwork) -> Result<()> {
        if self.config != src.config {
            return Err(Error::ConfigMismatch(format!(
                "{:?} vs {:?}",
                self.config, src.config
            )));
        }
        self.params.copy_from_slice(&src.params);
        Ok(())
    }

    /// Mean squared error of the batch and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        inputs: &[f64],
        targets: &[f64],
        cache: &mut TrainCache,
        grad: &mut Vec<f64>,
    ) -> Result<f64> {
        let in_dim = self.config.input_dim;
        let count = targets.len();
        if count == 0 {
            return Err(invalid("training batch is empty"));
        }
        if self.config.output_dim != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.config.output_dim,
            });
        }
        if inputs.len() != count * in_dim {
            return Err(Error::Dimension {
                expected: count * in_dim,
                got: inputs.len(),
            });
        }
        let n_layers = self.slots.len();
        let slope = self.config.leaky_slope;
        cache.pre.resize(n_layers, Vec::new());
        cache.act.resize(n_layers, Vec::new());

        for (l, slot) in self.slots.iter().enumerate() {
            let (before, rest) = cache.act.split_at_mut(l);
            let prev: &[f64] = if l == 0 { inputs } else { &before[l - 1] };
            let pre = &mut cache.pre[l];
            pre.clear();
            pre.resize(count * slot.fan_out, 0.0);
            for c in 0..count {
                let x = &prev[c * slot.fan_in..(c + 1) * slot.fan_in];
                self.affine_into_raw(*slot, x, &mut pre[c * slot.fan_out..(c + 1) * slot.fan_out]);
            }
            let act = &mut rest[0];
            act.clear();
            if l + 1 < n_layers {
                act.extend(pre.iter().map(|&z| leaky_relu(z, slope)));
            } else {
                act.extend_from_slice(pre);
            }
        }

        let outputs = &cache.act[n_layers - 1];
        let mut loss = 0.0;
        for (q, y) in outputs.iter().zip(targets) {
            let e = y - q;
            loss += e * e;
        }
        loss /= count as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                episode: 0,
                detail: format!("loss {loss}"),
            });
        }

        grad.clear();
        grad.resize(self.params.len(), 0.0);
        let scale = 2.0 / count as f64;
        for c in 0..count {
            // dL/dQ for sample c
            cache.delta.clear();
            cache.delta.push(scale * (outputs[c] - targets[c]));
            for l in (0..n_layers).rev() {
                let slot = self.slots[l];
                let prev: &[f64] = if l == 0 {
                    &inputs[c * in_dim..(c + 1) * in_dim]
                } else {
                    &cache.act[l - 1][c * slot.fan_in..(c + 1) * slot.fan_in]
                };
                for (o, &d) in cache.delta.iter().enumerate() {
                    grad[slot.bias + o] += d;
                }
                for (j, &xj) in prev.iter().enumerate() {
                    let g = &mut grad[slot.weights + j * slot.fan_out..slot.weights + (j + 1) * slot.fan_out];
                    for (gw, &d) in g.iter_mut().zip(&cache.delta) {
                        *gw += xj * d;
                    }
                }
                if l > 0 {
                    let pre_prev = &cache.pre[l - 1][c * slot.fan_in..(c + 1) * slot.fan_in];
                    cache.delta_prev.clear();
                    for j in 0..slot.fan_in {
                        let row = &self.params[slot.weights + j * slot.fan_out..slot.weights + (j + 1) * slot.fan_out];
                        let s: f64 = row.iter().zip(&cache.delta).map(|(w, d)| w * d).sum();
                        let dact = if pre_prev[j] > 0.0 { 1.0 } else { slope };
                        cache.delta_prev.push(s * dact);
                    }
                    std::mem::swap(&mut cache.delta, &mut cache.delta_prev);
                }
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                episode: 0,
                detail: "gradient".into(),
            });
        }
        Ok(loss)
    }

    /// One MSE/Adam step on the batch. Returns the loss before the step.
    pub fn train_batch(
        &mut self,
        adam: &mut AdamState,
        inputs: &[f64],
        targets: &[f64],
        cache: &mut TrainCache,
        grad: &mut Vec<f64>,
    ) -> Result<f64> {
        if adam.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: adam.len(),
            });
        }
        let loss = self.loss_and_gradient(inputs, targets, cache, grad)?;
        adam.step(&mut self.params, grad);
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                episode: 0,
                detail: "parameter after Adam step".into(),
            });
        }
        Ok(loss)
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.config.input_dim {
            return Err(Error::Dimension {
                expected: self.config.input_dim,
                got: features.len(),
            });
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        Ok(())
    }

    /// Runs layers `1..` on `ws.ping` (layer-0 activations) and writes outputs.
    fn finish_batch(&self, count: usize, ws: &mut Workspace, out: &mut Vec<f64>) {
        for slot in &self.slots[1..] {
            ws.pong.clear();
            ws.pong.resize(count * slot.fan_out, 0.0);
            for c in 0..count {
                let x = &ws.ping[c * slot.fan_in..(c + 1) * slot.fan_in];
                let y = &mut ws.pong[c * slot.fan_out..(c + 1) * slot.fan_out];
                self.affine_into(*slot, x, y);
            }
            std::mem::swap(&mut ws.ping, &mut ws.pong);
        }
        out.clear();
        out.extend_from_slice(&ws.ping);
    }

    /// Affine map plus activation (none on the output layer).
    #[inline]
    fn affine_into(&self, slot: LayerSlot, x: &[f64], y: &mut [f64]) {
        self.affine_into_raw(slot, x, y);
        if slot.bias + slot.fan_out != self.params.len() {
            let slope = self.config.leaky_slope;
            for v in y.iter_mut() {
                *v = leaky_relu(*v, slope);
            }
        }
    }

    #[inline]
    fn affine_into_raw(&self, slot: LayerSlot, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            let row = &self.params[slot.weights + j * slot.fan_out..slot.weights + (j + 1) * slot.fan_out];
            for (yo, &w) in y.iter_mut().zip(row) {
                *yo += xj * w;
            }
        }
        let bias = &self.params[slot.bias..slot.bias + slot.fan_out];
        for (yo, &b) in y.iter_mut().zip(bias) {
            *yo += b;
        }
    }
}

/// Copies `src`'s parameters into `dst`.
pub fn copy_weights(src: &QNetwork, dst: &mut QNetwork) -> Result<()> {
    dst.copy_weights_from(src)
}
