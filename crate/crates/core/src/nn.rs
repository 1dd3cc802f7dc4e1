//! Dense feed-forward network with reverse-mode gradients.
//!
//! Every layer computes `a = act(x · W + b)` with `W` stored row-major as
//! `(in_dim, out_dim)`. Hidden layers use the rectifier; the output layer is
//! either rectified (evidence) or linear (logits).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::tensor::{gemm, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: &mut [f64]) {
        if self == Activation::Relu {
            for x in v {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Layer outputs retained by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DenseMatrix,
    outputs: Vec<DenseMatrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &DenseMatrix {
        self.outputs.last().unwrap_or(&self.input)
    }

    pub fn input(&self) -> &DenseMatrix {
        &self.input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients (in layer order) plus the gradient with respect to the
/// network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: DenseMatrix,
}

impl Gradients {
    /// Parameter gradient tensors in declaration order: `W₀, b₀, W₁, b₁, …`.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config("an MLP needs at least input and output dims".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Config("layer dims must be positive".into()));
    }
    Ok(())
}

impl Mlp {
    /// Network with uniform `±1/√fan_in` weights and zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = 1.0 / libm::sqrt(fan_in as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            let activation = if i + 2 == dims.len() { output } else { Activation::Relu };
            layers.push(Dense {
                weights: DenseMatrix::from_vec(fan_in, fan_out, data)?,
                bias: vec![0.0; fan_out],
                activation,
            });
        }
        Ok(Self { layers })
    }

    /// All-zero network.
    pub fn zeros(dims: &[usize], output: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense {
                weights: DenseMatrix::zeros(w[0], w[1]),
                bias: vec![0.0; w[1]],
                activation: if i == last { output } else { Activation::Relu },
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    context: "Mlp::from_layers",
                    expected: (i + 1, pair[0].out_dim()),
                    found: (i + 1, pair[1].in_dim()),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape {
                    context: "Mlp::from_layers bias",
                    expected: (1, l.out_dim()),
                    found: (1, l.bias.len()),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.layers.len() + 1);
        dims.push(self.input_dim());
        dims.extend(self.layers.iter().map(Dense::out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Parameter tensors in declaration order: `W₀, b₀, W₁, b₁, …`.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn load_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape {
                context: "Mlp::load_params",
                expected: (self.num_params(), 1),
                found: (params.len(), 1),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&params[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    fn check_input(&self, batch: &DenseMatrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape {
                context: "Mlp forward input",
                expected: (batch.rows(), self.input_dim()),
                found: batch.shape(),
            });
        }
        Ok(())
    }

    fn layer_forward(layer: &Dense, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(x.rows(), layer.out_dim());
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(&layer.bias);
        }
        gemm(1.0, x, false, &layer.weights, false, 1.0, &mut out);
        layer.activation.apply(out.as_mut_slice());
        out
    }

    pub fn forward(&self, batch: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(batch)?;
        let mut x = Self::layer_forward(&self.layers[0], batch);
        for layer in &self.layers[1..] {
            x = Self::layer_forward(layer, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, batch: &DenseMatrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut outputs: Vec<DenseMatrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = outputs.last().unwrap_or(batch);
            let y = Self::layer_forward(layer, x);
            outputs.push(y);
        }
        Ok(ForwardCache {
            input: batch.clone(),
            outputs,
        })
    }

    /// Gradients of a scalar loss whose gradient with respect to the network
    /// output is `loss_grad`.
    pub fn backward(&self, batch: &DenseMatrix, loss_grad: &DenseMatrix) -> Result<Gradients> {
        let cache = self.forward_cached(batch)?;
        self.backward_cached(&cache, loss_grad)
    }

    pub fn backward_cached(&self, cache: &ForwardCache, loss_grad: &DenseMatrix) -> Result<Gradients> {
        self.backward_impl(cache, loss_grad, true)
    }

    /// Like [`Mlp::backward_cached`] but leaves `Gradients::input` empty
    /// (`0 × input_dim`), skipping the first layer's input product.
    pub fn parameter_gradients(&self, cache: &ForwardCache, loss_grad: &DenseMatrix) -> Result<Gradients> {
        self.backward_impl(cache, loss_grad, false)
    }

    fn backward_impl(&self, cache: &ForwardCache, loss_grad: &DenseMatrix, want_input: bool) -> Result<Gradients> {
        let out = cache.output();
        if loss_grad.shape() != out.shape() {
            return Err(Error::Shape {
                context: "Mlp::backward loss gradient",
                expected: out.shape(),
                found: loss_grad.shape(),
            });
        }
        let mut layers_rev = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                let a = cache.outputs[l].as_slice();
                for (g, &y) in upstream.as_mut_slice().iter_mut().zip(a) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let x = if l == 0 { &cache.input } else { &cache.outputs[l - 1] };
            let mut dw = DenseMatrix::zeros(layer.in_dim(), layer.out_dim());
            gemm(1.0, x, true, &upstream, false, 0.0, &mut dw);
            let mut db = vec![0.0; layer.out_dim()];
            for row in upstream.iter_rows() {
                for (b, g) in db.iter_mut().zip(row) {
                    *b += g;
                }
            }
            let dx = if l > 0 || want_input {
                let mut dx = DenseMatrix::zeros(x.rows(), layer.in_dim());
                gemm(1.0, &upstream, false, &layer.weights, true, 0.0, &mut dx);
                dx
            } else {
                DenseMatrix::zeros(0, layer.in_dim())
            };
            layers_rev.push(LayerGrad { weights: dw, bias: db });
            upstream = dx;
        }
        layers_rev.reverse();
        Ok(Gradients {
            layers: layers_rev,
            input: upstream,
        })
    }
}
