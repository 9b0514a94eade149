use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

/// Adam with bias correction and L2 regularization of the weights.
///
/// The L2 term `l2 · w` is added to each weight gradient before the moment
/// updates; biases are not regularized. Moments are stored flat in
/// [`Network::params`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(net: &Network, learning_rate: f64, l2: f64) -> Self {
        let n = net.param_count();
        Self {
            learning_rate,
            l2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    pub fn is_congruent(&self, net: &Network) -> bool {
        let n = net.param_count();
        self.first_moment.len() == n && self.second_moment.len() == n
    }

    /// Applies one update to `net` in place.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if !self.is_congruent(net) {
            return Err(Error::shape(
                net.param_count(),
                self.first_moment.len(),
                "optimizer moments",
            ));
        }
        if !grads.is_congruent(net) {
            return Err(Error::shape(net.param_count(), grads.params().count(), "gradients"));
        }
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);

        let mut k = 0;
        for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
            for (w, &gw) in layer.weights.iter_mut().zip(&g.weights) {
                self.update(k, w, gw + self.l2 * *w, correction1, correction2);
                k += 1;
            }
            for (b, &gb) in layer.bias.iter_mut().zip(&g.bias) {
                self.update(k, b, gb, correction1, correction2);
                k += 1;
            }
        }
        Ok(())
    }

    #[inline]
    fn update(&mut self, k: usize, param: &mut f64, grad: f64, correction1: f64, correction2: f64) {
        let m = &mut self.first_moment[k];
        let v = &mut self.second_moment[k];
        *m = self.beta1 * *m + (1.0 - self.beta1) * grad;
        *v = self.beta2 * *v + (1.0 - self.beta2) * grad * grad;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *param -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Layer};

    fn scalar(w: f64) -> Network {
        Network::from_layers(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Identity,
            weights: vec![w],
            bias: vec![0.0],
        }])
        .unwrap()
    }

    fn grads(gw: f64, gb: f64) -> Gradients {
        let mut g = Gradients::zeros_like(&scalar(0.0));
        g.layers[0].weights[0] = gw;
        g.layers[0].bias[0] = gb;
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar(0.5);
        let mut opt = OptimizerState::new(&net, 1e-3, 0.0);
        opt.step(&mut net, &grads(0.37, -2.0)).unwrap();
        let dw = 0.5 - net.layers()[0].weights[0];
        let db = -net.layers()[0].bias[0];
        approx::assert_relative_eq!(dw, 1e-3 * 0.37 / (0.37 + 1e-8), max_relative = 1e-12);
        approx::assert_relative_eq!(db, -1e-3 * 2.0 / (2.0 + 1e-8), max_relative = 1e-12);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut net = scalar(0.5);
        let before = net.clone();
        let mut opt = OptimizerState::new(&net, 1e-3, 0.0);
        for _ in 0..5 {
            opt.step(&mut net, &grads(0.0, 0.0)).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn l2_shrinks_weights_only() {
        let mut net = scalar(2.0);
        net.layers_mut()[0].bias[0] = 3.0;
        let mut opt = OptimizerState::new(&net, 1e-2, 1e-4);
        opt.step(&mut net, &grads(0.0, 0.0)).unwrap();
        // Adam's first step on g = λw is lr · g / (|g| + ε).
        let g = 1e-4 * 2.0;
        approx::assert_relative_eq!(
            net.layers()[0].weights[0],
            2.0 - 1e-2 * g / (g + 1e-8),
            max_relative = 1e-12
        );
        assert_eq!(net.layers()[0].bias[0], 3.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut net = scalar(1.0);
        let other = Network::init(&[2, 2], &[Activation::Identity], 0).unwrap();
        let mut opt = OptimizerState::new(&other, 1e-3, 0.0);
        assert!(matches!(
            opt.step(&mut net, &grads(1.0, 1.0)),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
