use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::ops::{self, ConvGeometry};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Declarative description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Maxpool2d {
        size: usize,
        stride: usize,
    },
    LeakyRelu {
        slope: f32,
    },
    Linear {
        out_features: usize,
    },
    Flatten,
    Sigmoid,
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        LayerSpec::Conv2d {
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    pub fn pool(size: usize) -> Self {
        LayerSpec::Maxpool2d { size, stride: size }
    }

    pub fn leaky(slope: f32) -> Self {
        LayerSpec::LeakyRelu { slope }
    }

    pub fn linear(out_features: usize) -> Self {
        LayerSpec::Linear { out_features }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Maxpool2d { .. } => "maxpool2d",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Configuration(format!("{} {name} must be positive", self.kind())))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                ..
            } => {
                positive("out_channels", out_channels)?;
                positive("kernel", kernel)?;
                positive("stride", stride)
            }
            LayerSpec::Maxpool2d { size, stride } => {
                positive("size", size)?;
                positive("stride", stride)
            }
            LayerSpec::LeakyRelu { slope } => {
                if slope > 0.0 && slope < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Configuration(format!("leaky slope {slope} outside (0, 1)")))
                }
            }
            LayerSpec::Linear { out_features } => positive("out_features", out_features),
            LayerSpec::Flatten | LayerSpec::Sigmoid => Ok(()),
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let chw = || match input {
            [c, h, w] => Ok([*c, *h, *w]),
            _ => Err(Error::shape(self.kind(), format!("expected [C, H, W] input, got {input:?}"))),
        };
        match *self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                pad,
            } => {
                let [_, h, w] = chw()?;
                Ok(vec![
                    out_channels,
                    ops::window_out("conv2d", h, kernel, stride, pad)?,
                    ops::window_out("conv2d", w, kernel, stride, pad)?,
                ])
            }
            LayerSpec::Maxpool2d { size, stride } => {
                let [c, h, w] = chw()?;
                Ok(vec![
                    c,
                    ops::window_out("maxpool2d", h, size, stride, 0)?,
                    ops::window_out("maxpool2d", w, size, stride, 0)?,
                ])
            }
            LayerSpec::Linear { out_features } => {
                if input.len() != 1 {
                    return Err(Error::shape("linear", format!("expected a flat input, got {input:?}")));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::LeakyRelu { .. } | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }
}

/// A trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: &'static str,
    pub value: Tensor,
    pub grad: Tensor,
    pub velocity: Tensor,
}

impl Param {
    fn new(name: &'static str, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        Self {
            name,
            value,
            grad,
            velocity,
        }
    }
}

#[derive(Debug, Clone)]
enum Cache {
    None,
    Conv { cols: Vec<f32>, geom: ConvGeometry },
    Pool { input_len: usize, input_shape: Vec<usize>, argmax: Vec<usize> },
    Input(Tensor),
    Output(Tensor),
    Shape(Vec<usize>),
}

/// A layer instance: spec, parameters, and the activations cached by the
/// last training forward pass.
#[derive(Debug, Clone)]
pub struct Layer {
    spec: LayerSpec,
    params: Vec<Param>,
    cache: Cache,
}

impl Layer {
    /// Builds a layer for `input_shape`. Conv and linear weights are
    /// Kaiming-uniform over the fan-in with gain chosen by `gain_slope`
    /// (the slope of the following leaky activation, or 1 for a linear
    /// output); biases start at zero.
    pub(crate) fn new(spec: LayerSpec, input_shape: &[usize], gain_slope: f32, seed: u64) -> Result<Self> {
        spec.validate()?;
        let out_shape = spec.output_shape(input_shape)?;
        let mut rng = rng::rng(seed);
        let mut kaiming = |shape: Vec<usize>, fan_in: usize| -> Tensor {
            let a = gain_slope as f64;
            let bound = (6.0 / ((1.0 + a * a) * fan_in as f64)).sqrt() as f32;
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let n = shape.iter().product();
            let data = (0..n).map(|_| dist.sample(&mut rng)).collect();
            Tensor::new(shape, data).expect("shape matches")
        };
        let params = match spec {
            LayerSpec::Conv2d { out_channels, kernel, .. } => {
                let c_in = input_shape[0];
                vec![
                    Param::new("weight", kaiming(vec![out_channels, c_in, kernel, kernel], c_in * kernel * kernel)),
                    Param::new("bias", Tensor::zeros(&[out_channels])),
                ]
            }
            LayerSpec::Linear { out_features } => {
                let n = input_shape[0];
                vec![
                    Param::new("weight", kaiming(vec![out_features, n], n)),
                    Param::new("bias", Tensor::zeros(&[out_features])),
                ]
            }
            _ => Vec::new(),
        };
        debug_assert!(!out_shape.is_empty());
        Ok(Self {
            spec,
            params,
            cache: Cache::None,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = Cache::None;
    }

    /// Forward pass. With `train` set, keeps what backward needs.
    pub(crate) fn forward(&mut self, input: Tensor, train: bool) -> Result<Tensor> {
        let (out, cache) = self.forward_impl(input, train)?;
        if train {
            self.cache = cache;
        }
        Ok(out)
    }

    /// Forward pass without touching the cache.
    pub(crate) fn infer(&self, input: Tensor) -> Result<Tensor> {
        self.forward_impl(input, false).map(|(t, _)| t)
    }

    fn forward_impl(&self, input: Tensor, train: bool) -> Result<(Tensor, Cache)> {
        Ok(match self.spec {
            LayerSpec::Conv2d { stride, pad, .. } => {
                let (out, cols, geom) =
                    ops::conv2d_forward(&input, &self.params[0].value, &self.params[1].value, stride, pad)?;
                (out, if train { Cache::Conv { cols, geom } } else { Cache::None })
            }
            LayerSpec::Maxpool2d { size, stride } => {
                let (out, argmax) = ops::maxpool2d_forward(&input, size, stride)?;
                let cache = if train {
                    Cache::Pool {
                        input_len: input.len(),
                        input_shape: input.shape().to_vec(),
                        argmax,
                    }
                } else {
                    Cache::None
                };
                (out, cache)
            }
            LayerSpec::LeakyRelu { slope } => {
                let out = ops::leaky_relu(&input, slope);
                (out, if train { Cache::Input(input) } else { Cache::None })
            }
            LayerSpec::Linear { .. } => {
                let out = ops::linear(&input, &self.params[0].value, &self.params[1].value)?;
                (out, if train { Cache::Input(input) } else { Cache::None })
            }
            LayerSpec::Flatten => {
                let shape = input.shape().to_vec();
                let n = input.len();
                (input.reshape(vec![n])?, if train { Cache::Shape(shape) } else { Cache::None })
            }
            LayerSpec::Sigmoid => {
                let out = ops::sigmoid(&input);
                let cache = if train { Cache::Output(out.clone()) } else { Cache::None };
                (out, cache)
            }
        })
    }

    /// Backward pass: accumulates parameter gradients and returns the input
    /// gradient when `need_input` is set.
    pub(crate) fn backward(&mut self, grad_out: Tensor, need_input: bool) -> Result<Option<Tensor>> {
        let missing = || Error::State(format!("{} backward called without a forward pass", self.spec.kind()));
        match (&self.spec, &self.cache) {
            (LayerSpec::Conv2d { .. }, Cache::Conv { cols, geom }) => {
                let (w, b) = self.params.split_at_mut(1);
                let dx = ops::conv2d_backward_cols(
                    geom,
                    cols,
                    w[0].value.data(),
                    grad_out.data(),
                    w[0].grad.data_mut(),
                    b[0].grad.data_mut(),
                    need_input,
                );
                dx.map(|d| Tensor::new(vec![geom.c_in, geom.h, geom.w], d)).transpose()
            }
            (LayerSpec::Maxpool2d { .. }, Cache::Pool { input_len, input_shape, argmax }) => Ok(Some(Tensor::new(
                input_shape.clone(),
                ops::maxpool2d_backward_arg(*input_len, argmax, grad_out.data()),
            )?)),
            (LayerSpec::LeakyRelu { slope }, Cache::Input(x)) => Ok(Some(ops::leaky_relu_backward(x, *slope, &grad_out))),
            (LayerSpec::Linear { .. }, Cache::Input(x)) => {
                let (w, b) = self.params.split_at_mut(1);
                let dx = ops::linear_backward_acc(
                    x.data(),
                    w[0].value.data(),
                    grad_out.data(),
                    w[0].grad.data_mut(),
                    b[0].grad.data_mut(),
                    need_input,
                );
                dx.map(|d| Tensor::new(x.shape().to_vec(), d)).transpose()
            }
            (LayerSpec::Flatten, Cache::Shape(shape)) => Ok(Some(grad_out.reshape(shape.clone())?)),
            (LayerSpec::Sigmoid, Cache::Output(y)) => Ok(Some(ops::sigmoid_backward(y, &grad_out))),
            _ => Err(missing()),
        }
    }
}
