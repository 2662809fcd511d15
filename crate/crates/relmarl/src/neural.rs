//! From-scratch dense Q-network: forward pass, hand-derived backprop for a
//! single selected output unit, Adam, and a small checkpoint codec.
//!
//! Hidden layers use the rectifier, the output layer is linear. All
//! arithmetic is in f64 so that seeded runs are reproducible bit for bit.

use rand::Rng;
use thiserror::Error;

/// Magic header of the checkpoint byte format.
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RAQN";

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("bad magic header (not a q-network checkpoint)")]
    BadMagic,
    #[error("checkpoint stream truncated")]
    Truncated,
    #[error("checkpoint dimensions invalid: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `[out_dim][in_dim]`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }
}

/// Dense feed-forward Q-network.
///
/// `layer_sizes` is `[input_dim, hidden..., action_count]`. One instance
/// per agent approximates that agent's action values; a second instance
/// serves as the periodically synchronized target.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerNet {
    layer_sizes: Vec<usize>,
    layers: Vec<DenseLayer>,
}

impl MultiLayerNet {
    /// Initializes weights uniformly in `±sqrt(6 / (fan_in + fan_out))`
    /// and biases to zero. Deterministic given the rng state.
    pub fn init(input_dim: usize, hidden: &[usize], actions: usize, rng: &mut impl Rng) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        assert!(
            sizes.iter().all(|&s| s > 0),
            "all layer dimensions must be positive, got {sizes:?}"
        );

        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let mut layer = DenseLayer::zeros(in_dim, out_dim);
            for v in layer.weights.iter_mut() {
                *v = rng.gen_range(-limit..limit);
            }
            layers.push(layer);
        }
        Self {
            layer_sizes: sizes,
            layers,
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn actions(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Reads the parameter at canonical flat index `idx` (per layer:
    /// weights row-major, then biases). Used by the finite-difference
    /// harness and the checkpoint codec.
    pub fn param(&self, idx: usize) -> f64 {
        *self.locate(idx)
    }

    pub fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let idx = {
            let mut remaining = idx;
            let mut layer = 0;
            loop {
                let len = self.layers[layer].weights.len() + self.layers[layer].biases.len();
                if remaining < len {
                    break (layer, remaining);
                }
                remaining -= len;
                layer += 1;
            }
        };
        let (layer, offset) = idx;
        let l = &mut self.layers[layer];
        if offset < l.weights.len() {
            &mut l.weights[offset]
        } else {
            &mut l.biases[offset - l.weights.len()]
        }
    }

    fn locate(&self, idx: usize) -> &f64 {
        let mut remaining = idx;
        for l in &self.layers {
            let len = l.weights.len() + l.biases.len();
            if remaining < len {
                return if remaining < l.weights.len() {
                    &l.weights[remaining]
                } else {
                    &l.biases[remaining - l.weights.len()]
                };
            }
            remaining -= len;
        }
        panic!("parameter index {idx} out of range");
    }

    /// Q-values for every action in `state`.
    pub fn forward(&self, state: &[f64]) -> Vec<f64> {
        let acts = self.forward_activations(state);
        acts.into_iter().last().unwrap()
    }

    /// Per-layer post-activation outputs, ending with the linear output
    /// layer. Shared by `forward` and `backward_into`.
    fn forward_activations(&self, state: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(
            state.len(),
            self.input_dim(),
            "state length {} does not match input dim {}",
            state.len(),
            self.input_dim()
        );
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let input: &[f64] = if li == 0 { state } else { &acts[li - 1] };
            let mut out = vec![0.0; layer.out_dim];
            for (o, out_v) in out.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, x) in row.iter().zip(input) {
                    z += w * x;
                }
                *out_v = if li == last { z } else { z.max(0.0) };
            }
            acts.push(out);
        }
        acts
    }

    /// Accumulates into `grads` the gradient of
    /// `upstream * Q(state)[action]` with respect to every parameter.
    ///
    /// Output-layer gradients of the non-selected action units are zero.
    pub fn backward_into(
        &self,
        state: &[f64],
        action: usize,
        upstream: f64,
        grads: &mut Gradients,
    ) {
        assert!(
            action < self.actions(),
            "action index {action} out of range (actions {})",
            self.actions()
        );
        assert_eq!(
            grads.layers.len(),
            self.layers.len(),
            "gradient shape does not match network"
        );
        let acts = self.forward_activations(state);
        let last = self.layers.len() - 1;

        // delta = d(upstream * Q[action]) / d(layer output), propagated back.
        let mut delta = vec![0.0; self.layers[last].out_dim];
        delta[action] = upstream;

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input: &[f64] = if li == 0 { state } else { &acts[li - 1] };
            let g = &mut grads.layers[li];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through the weights, then gate by the rectifier of
            // the previous layer (its output is positive iff its
            // pre-activation was).
            let prev = &acts[li - 1];
            let mut next_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (nd, w) in next_delta.iter_mut().zip(row) {
                    *nd += d * w;
                }
            }
            for (nd, a) in next_delta.iter_mut().zip(prev) {
                if *a <= 0.0 {
                    *nd = 0.0;
                }
            }
            delta = next_delta;
        }
    }

    /// Fresh gradient set for `upstream * Q(state)[action]`.
    pub fn backward(&self, state: &[f64], action: usize, upstream: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(state, action, upstream, &mut grads);
        grads
    }

    /// Copies `src` parameters into `self` (the target-network sync).
    pub fn copy_from(&mut self, src: &MultiLayerNet) {
        assert_eq!(
            self.layer_sizes, src.layer_sizes,
            "cannot copy between networks of different shape"
        );
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.weights.copy_from_slice(&s.weights);
            dst.biases.copy_from_slice(&s.biases);
        }
    }

    /// Checkpoint bytes: magic, layer sizes, then parameters in canonical
    /// order as 64-bit little-endian floats.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * (1 + self.layer_sizes.len()));
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
            if *cursor + n > bytes.len() {
                return Err(CheckpointError::Truncated);
            }
            let s = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(s)
        };

        if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let n_sizes = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        if n_sizes < 2 {
            return Err(CheckpointError::DimensionMismatch(format!(
                "need at least input and output sizes, got {n_sizes}"
            )));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            let s = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
            if s == 0 {
                return Err(CheckpointError::DimensionMismatch(
                    "zero layer size".to_string(),
                ));
            }
            sizes.push(s);
        }
        let mut layers = Vec::with_capacity(n_sizes - 1);
        for w in sizes.windows(2) {
            let mut layer = DenseLayer::zeros(w[0], w[1]);
            for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *v = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
            }
            layers.push(layer);
        }
        if cursor != bytes.len() {
            return Err(CheckpointError::DimensionMismatch(format!(
                "{} trailing bytes after parameters",
                bytes.len() - cursor
            )));
        }
        Ok(Self {
            layer_sizes: sizes,
            layers,
        })
    }
}

/// Per-parameter gradients, mirroring a network's layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(net: &MultiLayerNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    /// Value at canonical flat parameter index (same order as
    /// [`MultiLayerNet::param`]).
    pub fn get(&self, idx: usize) -> f64 {
        let mut remaining = idx;
        for l in &self.layers {
            let len = l.weights.len() + l.biases.len();
            if remaining < len {
                return if remaining < l.weights.len() {
                    l.weights[remaining]
                } else {
                    l.biases[remaining - l.weights.len()]
                };
            }
            remaining -= len;
        }
        panic!("gradient index {idx} out of range");
    }
}

/// Adam accumulators for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<DenseLayer>,
    v: Vec<DenseLayer>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &MultiLayerNet, learning_rate: f64) -> Self {
        let zeros = || -> Vec<DenseLayer> {
            net.layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `net` in the direction of `-grads`.
pub fn adam_step(net: &mut MultiLayerNet, opt: &mut AdamState, grads: &Gradients) {
    assert_eq!(
        net.layers.len(),
        grads.layers.len(),
        "gradient shape does not match network"
    );
    opt.step += 1;
    let t = opt.step as i32;
    let m_corr = 1.0 - opt.beta1.powi(t);
    let v_corr = 1.0 - opt.beta2.powi(t);

    for li in 0..net.layers.len() {
        let layer = &mut net.layers[li];
        let g = &grads.layers[li];
        assert_eq!(layer.in_dim, g.in_dim, "gradient shape mismatch");
        assert_eq!(layer.out_dim, g.out_dim, "gradient shape mismatch");
        let m = &mut opt.m[li];
        let v = &mut opt.v[li];

        let mut update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
            *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
            let m_hat = *m / m_corr;
            let v_hat = *v / v_corr;
            *p -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
        };

        for i in 0..layer.weights.len() {
            update(
                &mut layer.weights[i],
                g.weights[i],
                &mut m.weights[i],
                &mut v.weights[i],
            );
        }
        for i in 0..layer.biases.len() {
            update(
                &mut layer.biases[i],
                g.biases[i],
                &mut m.biases[i],
                &mut v.biases[i],
            );
        }
    }
}
