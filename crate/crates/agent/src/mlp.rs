//! Dense feed-forward network with hand-written reverse mode.
//!
//! Weights are stored `in x out` so a batch `X (B x in)` maps to `X W + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AgentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Hidden layers use `hidden`; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub layers: Vec<Layer>,
}

/// Parameter gradients, laid out like [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations saved by the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize], hidden: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self {
            sizes: sizes.to_vec(),
            hidden,
            layers,
        }
    }

    /// Gaussian init with std `1/sqrt(fan_in)`; the last layer is further
    /// scaled by `output_gain`. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, hidden);
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let fan_in = layer.w.nrows() as f64;
            let gain = if i == last { output_gain } else { 1.0 };
            let std = gain / fan_in.sqrt();
            layer.w.mapv_inplace(|_| std * rng.sample::<f64, _>(StandardNormal));
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(AgentError::Shape {
                what: "network input",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w) + &layer.b;
            if i != last {
                let act = self.hidden;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.w) + &layer.b;
            let a = if i != last {
                let act = self.hidden;
                z.mapv(|v| act.apply(v))
            } else {
                z.clone()
            };
            cache.inputs.push(h);
            cache.pre.push(z);
            cache.outputs.push(a.clone());
            h = a;
        }
        Ok((h, cache))
    }

    /// Gradients of `sum(dy * f(x))` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, dy: ArrayView2<f64>) -> MlpGrads {
        let last = self.layers.len() - 1;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = dy.to_owned();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                let act = self.hidden;
                ndarray::Zip::from(&mut delta)
                    .and(&cache.pre[i])
                    .and(&cache.outputs[i])
                    .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            }
            let gw = cache.inputs[i].t().dot(&delta).as_standard_layout().into_owned();
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&self.layers[i].w.t());
            }
            grads.push(Layer { w: gw, b: gb });
        }
        grads.reverse();
        MlpGrads { layers: grads }
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        layer_slices(&self.layers)
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        layer_slices_mut(&mut self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl MlpGrads {
    pub fn param_slices(&self) -> Vec<&[f64]> {
        layer_slices(&self.layers)
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        layer_slices_mut(&mut self.layers)
    }
}

fn layer_slices(layers: &[Layer]) -> Vec<&[f64]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.w.as_slice().expect("standard layout"),
                l.b.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

fn layer_slices_mut(layers: &mut [Layer]) -> Vec<&mut [f64]> {
    layers
        .iter_mut()
        .flat_map(|l| {
            [
                l.w.as_slice_mut().expect("standard layout"),
                l.b.as_slice_mut().expect("standard layout"),
            ]
        })
        .collect()
}

/// Euclidean norm over a set of slices.
pub fn global_norm(slices: &[&[f64]]) -> f64 {
    slices.iter().flat_map(|s| s.iter()).map(|v| v * v).sum::<f64>().sqrt()
}
