//! Dense feed-forward networks with exact reverse-mode gradients and an
//! Adam optimiser, sized for the DDPG actor and critic.

mod adam;
pub mod checkpoint;

use rand::Rng;
use thiserror::Error;

pub use adam::{apply_gradients, OptimizerState};

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not belong to this network")]
    StaleCache,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("network shapes differ")]
    ShapeMismatch,
    #[error("mixing factor {0} outside [0, 1]")]
    BadMix(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// `lo + (hi - lo) * sigmoid(z)` per output unit.
    ScaledSigmoid { bounds: Vec<(f64, f64)> },
    /// ReLU followed by a clamp to per-unit bounds.
    ReluClamp { bounds: Vec<(f64, f64)> },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(&self, i: usize, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::ScaledSigmoid { bounds } => {
                let (lo, hi) = bounds[i];
                lo + (hi - lo) * sigmoid(z)
            }
            Activation::ReluClamp { bounds } => {
                let (lo, hi) = bounds[i];
                z.max(0.0).clamp(lo, hi)
            }
        }
    }

    fn derivative(&self, i: usize, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::ScaledSigmoid { bounds } => {
                let (lo, hi) = bounds[i];
                let s = sigmoid(z);
                (hi - lo) * s * (1.0 - s)
            }
            Activation::ReluClamp { bounds } => {
                let (lo, hi) = bounds[i];
                let y = z.max(0.0);
                if z > 0.0 && y > lo && y < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer. `weights` is row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs], activation }
    }

    /// Uniform in `+-1/sqrt(fan_in)` for weights and biases.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self { inputs, outputs, weights, bias, activation }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    /// `(inputs, outputs)` of each layer, to detect mismatched use.
    shape: Vec<(usize, usize)>,
}

impl ForwardCache {
    /// Pre-activation of each layer, input layer first.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// Parameter-shaped gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).flatten().for_each(|x| *x *= k);
    }

    /// Flat view in layer order, weights before bias within a layer.
    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| w.iter().chain(b)).copied().collect()
    }
}

impl Mlp {
    /// Network with hidden ReLU layers of sizes `dims[1..n-1]` and the given
    /// output activation.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "a network needs at least an input and an output size");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output.clone() } else { Activation::Relu };
                Layer::random(dims[i], dims[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    /// Output only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = (0..layer.outputs)
                .map(|o| layer.activation.apply(o, affine(layer, o, &x)))
                .collect();
        }
        Ok(x)
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NeuralError> {
        if input.len() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NeuralError> {
        self.check_input(input)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            shape: self.layers.iter().map(|l| (l.inputs, l.outputs)).collect(),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let z: Vec<f64> = (0..layer.outputs).map(|o| affine(layer, o, &x)).collect();
            let y = z.iter().enumerate().map(|(o, v)| layer.activation.apply(o, *v)).collect();
            cache.inputs.push(std::mem::replace(&mut x, y));
            cache.pre.push(z);
        }
        Ok((x, cache))
    }

    /// Gradients of `output_gradient . output` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<(Gradients, Vec<f64>), NeuralError> {
        let mut grads = Gradients::zeros_like(self);
        let input_gradient = self.backward_into(cache, output_gradient, &mut grads)?;
        Ok((grads, input_gradient))
    }

    /// Like [`Self::backward`] but adds the parameter gradients into `grads`,
    /// which saves an allocation per sample in mini-batch loops.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>, NeuralError> {
        if cache.shape.len() != self.layers.len()
            || cache.shape.iter().zip(&self.layers).any(|(s, l)| *s != (l.inputs, l.outputs))
        {
            return Err(NeuralError::StaleCache);
        }
        if output_gradient.len() != self.output_dim() {
            return Err(NeuralError::DimensionMismatch { expected: self.output_dim(), got: output_gradient.len() });
        }
        if grads.weights.len() != self.layers.len()
            || grads.weights.iter().zip(&self.layers).any(|(g, l)| g.len() != l.weights.len())
        {
            return Err(NeuralError::ShapeMismatch);
        }
        let mut upstream = output_gradient.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[li];
            let gw = &mut grads.weights[li];
            let gb = &mut grads.bias[li];
            let mut down = vec![0.0; layer.inputs];
            for (o, z) in cache.pre[li].iter().enumerate() {
                let d = upstream[o] * layer.activation.derivative(o, *z);
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = o * layer.inputs..(o + 1) * layer.inputs;
                for (g, xi) in gw[row.clone()].iter_mut().zip(x) {
                    *g += d * xi;
                }
                for (dn, w) in down.iter_mut().zip(&layer.weights[row]) {
                    *dn += d * w;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Flat parameter vector in [`Gradients::flat`] order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).copied().collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.param_count() {
            return Err(NeuralError::ShapeMismatch);
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap_or_default());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn affine(layer: &Layer, o: usize, x: &[f64]) -> f64 {
    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
    layer.bias[o] + dot(row, x)
}

/// `tau * online + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &Mlp, online: &Mlp, tau: f64) -> Result<Mlp, NeuralError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NeuralError::BadMix(tau));
    }
    if !target.same_shape(online) {
        return Err(NeuralError::ShapeMismatch);
    }
    let mut out = target.clone();
    for (t, o) in out.layers.iter_mut().zip(&online.layers) {
        for (a, b) in t.weights.iter_mut().chain(t.bias.iter_mut()).zip(o.weights.iter().chain(&o.bias)) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
    Ok(out)
}

/// Layer sizes of the actor: state, `n`, `n`, `n / 20`, action.
pub fn actor_dims(state: usize, action: usize, n: usize) -> Vec<usize> {
    vec![state, n, n, (n / 20).max(1), action]
}

/// Layer sizes of the critic: state + action, `n`, `n / 20`, 1.
pub fn critic_dims(state: usize, action: usize, n: usize) -> Vec<usize> {
    vec![state + action, n, (n / 20).max(1), 1]
}
