use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Fully-connected network with two hidden layers of equal width and a
/// softmax cross-entropy head.
///
/// Parameters are packed layer by layer (input→hidden, hidden→hidden,
/// hidden→output); within a layer the row-major `out × in` weight matrix
/// comes first, then the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerMlp {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub activation: Activation,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn weights<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        &w[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    fn biases<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &w[start..start + self.fan_out]
    }

    fn forward(&self, w: &[f64], input: &[f64]) -> Vec<f64> {
        self.weights(w)
            .chunks_exact(self.fan_in)
            .zip(self.biases(w))
            .map(|(row, b)| crate::params::dot(row, input) + b)
            .collect()
    }

    fn len(&self) -> usize {
        self.fan_out * (self.fan_in + 1)
    }
}

impl TwoLayerMlp {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden,
            classes,
            activation,
            l2: 0.0,
        }
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    fn layers(&self) -> [Layer; 3] {
        let sizes = [self.input_dim, self.hidden, self.hidden, self.classes];
        let mut offset = 0;
        std::array::from_fn(|i| {
            let layer = Layer {
                fan_in: sizes[i],
                fan_out: sizes[i + 1],
                offset,
            };
            offset += layer.len();
            layer
        })
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(Layer::len).sum()
    }

    /// Pre-activations and activations of both hidden layers, plus logits.
    fn forward(&self, w: &[f64], x: &[f64]) -> ([Vec<f64>; 2], [Vec<f64>; 2], Vec<f64>) {
        let [l1, l2, l3] = self.layers();
        let z1 = l1.forward(w, x);
        let a1: Vec<f64> = z1.iter().map(|&z| self.activation.apply(z)).collect();
        let z2 = l2.forward(w, &a1);
        let a2: Vec<f64> = z2.iter().map(|&z| self.activation.apply(z)).collect();
        let logits = l3.forward(w, &a2);
        ([z1, z2], [a1, a2], logits)
    }

    pub(crate) fn logits(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward(w, x).2
    }

    pub(crate) fn loss(&self, w: &[f64], x: &[f64], class: usize) -> Result<f64> {
        let mut z = self.logits(w, x);
        Ok(super::softmax_cross_entropy(&mut z, class))
    }

    pub(crate) fn grad_into(&self, w: &[f64], x: &[f64], class: usize, out: &mut [f64]) -> Result<f64> {
        let layers = self.layers();
        let ([z1, z2], [a1, a2], mut delta) = self.forward(w, x);
        let loss = super::softmax_cross_entropy(&mut delta, class);
        delta[class] -= 1.0;

        let inputs: [&[f64]; 3] = [x, &a1, &a2];
        let pre: [&[f64]; 2] = [&z1, &z2];
        let post: [&[f64]; 2] = [&a1, &a2];
        for l in (0..3).rev() {
            let layer = layers[l];
            let input = inputs[l];
            let (gw, gb) = out[layer.offset..layer.offset + layer.len()].split_at_mut(layer.fan_in * layer.fan_out);
            for ((row, b), d) in gw.chunks_exact_mut(layer.fan_in).zip(gb).zip(&delta) {
                for (g, a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
                *b = *d;
            }
            if l == 0 {
                break;
            }
            // back through the weights, then the activation of layer l-1
            let mut next = vec![0.0; layer.fan_in];
            for (row, d) in layer.weights(w).chunks_exact(layer.fan_in).zip(&delta) {
                crate::params::axpy(&mut next, *d, row);
            }
            for ((n, z), a) in next.iter_mut().zip(pre[l - 1]).zip(post[l - 1]) {
                *n *= self.activation.derivative(*z, *a);
            }
            delta = next;
        }
        Ok(loss)
    }

    pub(crate) fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut w = ParamVector::zeros(self.num_params());
        for layer in self.layers() {
            let bound = 1.0 / (layer.fan_in.max(1) as f64).sqrt();
            super::uniform_fill(rng, &mut w[layer.offset..layer.offset + layer.len()], bound);
        }
        w
    }
}
