use super::layer::{Layer, LayerSpec, Param};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// A sequential stack of layers over a fixed input shape.
///
/// [`Network::forward`] caches activations for [`Network::backward`] and so
/// needs `&mut self`; [`Network::predict`] is read-only and can be shared
/// across threads.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<Layer>,
    primed: bool,
}

impl Network {
    /// Builds the stack with seeded initialization. Each layer draws from its
    /// own derived stream, so inserting a layer does not reshuffle the others.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let gain_slope = match specs.get(i + 1) {
                Some(LayerSpec::LeakyRelu { slope }) => *slope,
                _ => 1.0,
            };
            let layer = Layer::new(*spec, &shape, gain_slope, rng::derive_seed(seed, i as u64))
                .map_err(|e| annotate(e, i, spec))?;
            shape = spec.output_shape(&shape).map_err(|e| annotate(e, i, spec))?;
            layers.push(layer);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            output_shape: shape,
            layers,
            primed: false,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| *l.spec()).collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| l.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut().iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    /// All parameter values concatenated in declaration order.
    pub fn flat_params(&self) -> Vec<f32> {
        self.params().flat_map(|p| p.value.data().iter().copied()).collect()
    }

    /// All accumulated gradients in declaration order.
    pub fn flat_grads(&self) -> Vec<f32> {
        self.params().flat_map(|p| p.grad.data().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[f32]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(
                "network",
                format!("expected {} parameters, got {}", self.param_count(), values.len()),
            ));
        }
        let mut rest = values;
        for p in self.params_mut() {
            let (head, tail) = rest.split_at(p.value.len());
            p.value.data_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::shape(
                "network input",
                format!("expected {:?}, got {:?}", self.input_shape, input.shape()),
            ));
        }
        Ok(())
    }

    /// Training forward pass; caches intermediates for [`Network::backward`].
    pub fn forward(&mut self, input: Tensor) -> Result<Tensor> {
        self.check_input(&input)?;
        let mut x = input;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let spec = *layer.spec();
            x = layer.forward(x, true).map_err(|e| annotate(e, i, &spec))?;
        }
        self.primed = true;
        Ok(x)
    }

    /// Inference forward pass; leaves the cache alone.
    pub fn predict(&self, input: Tensor) -> Result<Tensor> {
        self.check_input(&input)?;
        let mut x = input;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.infer(x).map_err(|e| annotate(e, i, layer.spec()))?;
        }
        Ok(x)
    }

    fn backward_impl(&mut self, grad: Tensor, need_input: bool) -> Result<Option<Tensor>> {
        if !self.primed {
            return Err(Error::State("backward called without a cached forward pass".into()));
        }
        if grad.len() != self.output_len() {
            return Err(Error::shape(
                "network output",
                format!("upstream gradient has {} values, output has {}", grad.len(), self.output_len()),
            ));
        }
        let mut g = grad.reshape(self.output_shape.clone())?;
        let n = self.layers.len();
        for i in (0..n).rev() {
            let want = need_input || i > 0;
            let spec = *self.layers[i].spec();
            match self.layers[i].backward(g, want).map_err(|e| annotate(e, i, &spec))? {
                Some(next) => g = next,
                None => {
                    self.finish_backward();
                    return Ok(None);
                }
            }
        }
        self.finish_backward();
        Ok(Some(g))
    }

    fn finish_backward(&mut self) {
        self.primed = false;
        for l in &mut self.layers {
            l.clear_cache();
        }
    }

    /// Reverse-mode pass: accumulates parameter gradients into each
    /// [`Param::grad`] and returns the gradient with respect to the input.
    /// Consumes the cached forward pass.
    pub fn backward(&mut self, upstream: Tensor) -> Result<Tensor> {
        Ok(self
            .backward_impl(upstream, true)?
            .expect("input gradient requested"))
    }

    /// Like [`Network::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, upstream: Tensor) -> Result<()> {
        self.backward_impl(upstream, false).map(|_| ())
    }
}

fn annotate(e: Error, index: usize, spec: &LayerSpec) -> Error {
    match e {
        Error::Shape { message, .. } => Error::Shape {
            layer: format!("layer {index} ({})", spec.kind()),
            message,
        },
        other => other,
    }
}
