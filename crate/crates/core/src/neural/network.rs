use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer `y = act(W x + b)` with a row-major `out × in` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn check(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim {
            return Err(Error::shape(
                self.in_dim * self.out_dim,
                self.weights.len(),
                "layer weights",
            ));
        }
        if self.bias.len() != self.out_dim {
            return Err(Error::shape(self.out_dim, self.bias.len(), "layer bias"));
        }
        Ok(())
    }

    #[inline]
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }
}

/// Feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct Network {
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct RawNetwork {
    layers: Vec<Layer>,
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        Self::from_layers(raw.layers)
    }
}

/// Activations cached by [`Network::forward`] for backpropagation.
///
/// `inputs[j]` is the input of layer `j`, `pre[j]` its affine output and
/// `post[j]` its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTape {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardTape {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients shaped like a [`Network`], plus the gradient with
/// respect to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.params_mut() {
            *v *= factor;
        }
        for v in &mut self.input {
            *v *= factor;
        }
    }

    /// Parameter gradients in the same order as [`Network::params`].
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_congruent(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

impl Network {
    /// Glorot-uniform weights and zero biases, deterministic per seed.
    ///
    /// `dims` lists the input width followed by every layer's output
    /// width; `activations` has one entry per layer.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::BadArchitecture(format!(
                "need at least 2 dimensions, got {}",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().position(|&d| d == 0) {
            return Err(Error::BadArchitecture(format!("dimension {d} is zero")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::BadArchitecture(format!(
                "{} layers but {} activations",
                dims.len() - 1,
                activations.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite bound");
                Layer {
                    in_dim,
                    out_dim,
                    activation,
                    weights: (0..in_dim * out_dim).map(|_| dist.sample(&mut rng)).collect(),
                    bias: vec![0.0; out_dim],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::BadArchitecture("no layers".into()));
        }
        for layer in &layers {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(Error::BadArchitecture("zero-width layer".into()));
            }
            layer.check()?;
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::BadArchitecture(format!(
                    "layer output {} does not feed input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let net = Self { layers };
        if net.params().any(|p| !p.is_finite()) {
            return Err(Error::BadArchitecture("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Input width followed by each layer's output width.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Mutable access to parameter `k` in [`Network::params`] order.
    pub fn param_mut(&mut self, mut k: usize) -> Option<&mut f64> {
        for layer in &mut self.layers {
            let w = layer.weights.len();
            if k < w {
                return Some(&mut layer.weights[k]);
            }
            k -= w;
            if k < layer.bias.len() {
                return Some(&mut layer.bias[k]);
            }
            k -= layer.bias.len();
        }
        None
    }

    pub fn same_shape(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), input.len(), "network input"));
        }
        Ok(())
    }

    /// Output only, without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&current, &mut next);
            for v in &mut next {
                *v = layer.activation.apply(*v);
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
        self.check_input(input)?;
        let n = self.layers.len();
        let mut tape = ForwardTape {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.out_dim);
            layer.affine(&current, &mut pre);
            let post: Vec<f64> = pre.iter().map(|&x| layer.activation.apply(x)).collect();
            tape.inputs.push(std::mem::replace(&mut current, post.clone()));
            tape.pre.push(pre);
            tape.post.push(post);
        }
        Ok((current, tape))
    }

    /// Gradients of `⟨output_grad, output⟩` for the pass recorded in `tape`.
    pub fn backward(&self, tape: &ForwardTape, output_grad: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        grads.input = self.accumulate_backward(tape, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// Adds this pass's parameter gradients into `grads` and returns the
    /// input gradient; `grads.input` is left untouched.
    pub fn accumulate_backward(
        &self,
        tape: &ForwardTape,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if !grads.is_congruent(self) {
            return Err(Error::shape(
                self.param_count(),
                grads.params().count(),
                "gradient buffer",
            ));
        }
        self.backprop(tape, output_grad, Some(grads))
    }

    /// Gradient of `⟨output_grad, output⟩` with respect to the input only.
    pub fn input_gradient(&self, tape: &ForwardTape, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, output_grad, None)
    }

    fn backprop(&self, tape: &ForwardTape, output_grad: &[f64], mut grads: Option<&mut Gradients>) -> Result<Vec<f64>> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::shape(self.layers.len(), tape.pre.len(), "tape layers"));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::shape(self.output_dim(), output_grad.len(), "output gradient"));
        }

        let mut delta = output_grad.to_vec();
        for (j, layer) in self.layers.iter().enumerate().rev() {
            let (pre, post, input) = (&tape.pre[j], &tape.post[j], &tape.inputs[j]);
            if pre.len() != layer.out_dim || input.len() != layer.in_dim {
                return Err(Error::shape(layer.out_dim, pre.len(), "tape activations"));
            }
            for ((d, &x), &y) in delta.iter_mut().zip(pre).zip(post) {
                *d *= layer.activation.derivative(x, y);
            }

            if let Some(grads) = grads.as_deref_mut() {
                let g = &mut grads.layers[j];
                for ((grow, &d), gb) in g.weights.chunks_exact_mut(layer.in_dim).zip(&delta).zip(&mut g.bias) {
                    *gb += d;
                    if d != 0.0 {
                        for (gw, &x) in grow.iter_mut().zip(input) {
                            *gw += d * x;
                        }
                    }
                }
            }

            let mut upstream = vec![0.0; layer.in_dim];
            for (row, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                if d != 0.0 {
                    for (u, &w) in upstream.iter_mut().zip(row) {
                        *u += d * w;
                    }
                }
            }
            delta = upstream;
        }
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(w: f64, b: f64, activation: Activation) -> Network {
        Network::from_layers(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation,
            weights: vec![w],
            bias: vec![b],
        }])
        .unwrap()
    }

    #[test]
    fn actor_parameter_count() {
        let net = Network::init(
            &[168, 64, 64, 6],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
            1,
        )
        .unwrap();
        assert_eq!(net.layers().len(), 3);
        assert_eq!(net.param_count(), 168 * 64 + 64 + 64 * 64 + 64 + 64 * 6 + 6);
        assert_eq!(net.param_count(), 15366);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Network::init(&[4, 3, 2], &[Activation::Relu, Activation::Identity], 9).unwrap();
        let b = Network::init(&[4, 3, 2], &[Activation::Relu, Activation::Identity], 9).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[1].bias.iter().all(|&x| x == 0.0));
        for seed in 0..50 {
            let tiny = Network::init(&[1, 1], &[Activation::Identity], seed).unwrap();
            assert!(tiny.layers()[0].weights[0].abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn bad_architectures() {
        assert!(matches!(Network::init(&[3], &[], 0), Err(Error::BadArchitecture(_))));
        assert!(matches!(
            Network::init(&[3, 0], &[Activation::Relu], 0),
            Err(Error::BadArchitecture(_))
        ));
        assert!(matches!(Network::init(&[3, 2], &[], 0), Err(Error::BadArchitecture(_))));
    }

    #[test]
    fn affine_forward() {
        let net = scalar_net(2.0, 1.0, Activation::Identity);
        assert_eq!(net.forward(&[3.0]).unwrap().0, vec![7.0]);
        let zero = Network::from_layers(vec![Layer {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Identity,
            weights: vec![0.0; 4],
            bias: vec![0.5, -1.5],
        }])
        .unwrap();
        assert_eq!(zero.predict(&[9.0, -4.0]).unwrap(), vec![0.5, -1.5]);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn tanh_output_is_bounded() {
        let net = Network::init(&[5, 8, 3], &[Activation::Relu, Activation::Tanh], 4).unwrap();
        let out = net.predict(&[3.0, -2.0, 0.5, 7.0, 1.0]).unwrap();
        assert!(out.iter().all(|y| y.abs() < 1.0));
    }

    #[test]
    fn hand_chain_rule() {
        let net = scalar_net(2.0, 1.0, Activation::Identity);
        let (_, tape) = net.forward(&[3.0]).unwrap();
        let g = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights, vec![3.0]);
        assert_eq!(g.layers[0].bias, vec![1.0]);
        assert_eq!(g.input, vec![2.0]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = Network::init(&[4, 5, 2], &[Activation::Tanh, Activation::Identity], 2).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2, -0.3, 0.9]).unwrap();
        let g = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert!(g.params().all(|&x| x == 0.0));
        assert!(g.input.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn predict_matches_forward() {
        let net = Network::init(&[6, 7, 3], &[Activation::Relu, Activation::Tanh], 5).unwrap();
        let x = [0.3, -0.1, 2.0, 0.0, -1.2, 0.7];
        assert_eq!(net.predict(&x).unwrap(), net.forward(&x).unwrap().0);
    }

    #[test]
    fn mismatched_layers_are_rejected() {
        let l1 = Layer {
            in_dim: 2,
            out_dim: 3,
            activation: Activation::Relu,
            weights: vec![0.0; 6],
            bias: vec![0.0; 3],
        };
        let l2 = Layer {
            in_dim: 4,
            out_dim: 1,
            activation: Activation::Identity,
            weights: vec![0.0; 4],
            bias: vec![0.0],
        };
        assert!(matches!(
            Network::from_layers(vec![l1, l2]),
            Err(Error::BadArchitecture(_))
        ));
    }
}
