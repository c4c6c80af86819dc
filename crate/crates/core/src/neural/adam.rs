use super::{Gradients, Mlp, NeuralError};

/// Adam moment estimates for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn adam(net: &Mlp, learning_rate: f64) -> Self {
        let n = net.param_count();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One Adam descent step on `grads`. Rejects the whole step, leaving the
/// network and optimiser untouched, if any gradient is not finite.
pub fn apply_gradients(net: &mut Mlp, grads: &Gradients, opt: &mut OptimizerState) -> Result<(), NeuralError> {
    if grads.weights.len() != net.layers.len() {
        return Err(NeuralError::ShapeMismatch);
    }
    for (li, (w, b)) in grads.weights.iter().zip(&grads.bias).enumerate() {
        let layer = &net.layers[li];
        if w.len() != layer.weights.len() || b.len() != layer.bias.len() {
            return Err(NeuralError::ShapeMismatch);
        }
        if !w.iter().chain(b).all(|g| g.is_finite()) {
            return Err(NeuralError::NonFiniteGradient { layer: li });
        }
    }
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    let mut k = 0;
    for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
        for (p, g) in layer.weights.iter_mut().chain(layer.bias.iter_mut()).zip(gw.iter().chain(gb)) {
            let m = &mut opt.m[k];
            let v = &mut opt.v[k];
            *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
            *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
            k += 1;
        }
    }
    Ok(())
}
