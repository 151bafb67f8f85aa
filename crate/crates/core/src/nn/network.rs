use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::tensor::Tensor;

/// An ordered stack of layers with validated shape flow.
///
/// Shapes are per sample; batched tensors prepend the batch axis. An
/// empty layer list is the identity network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    /// shapes[0] = input shape, shapes[i+1] = output shape of layer i.
    shapes: Vec<Vec<usize>>,
}

/// All intermediate activations of one forward pass, input first.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Tensor>,
    batch: usize,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients produced by one backward pass: one tensor per parameter
/// tensor (network order, weight before bias) plus the input gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

impl Gradients {
    pub fn add_scaled(&mut self, other: &Gradients, scale: f32) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<NetworkSpec> {
        let mut shapes = vec![input_shape.clone()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(i, shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(NetworkSpec {
            input_shape,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Scalar parameter count over all layers.
    pub fn total_parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn split_batch<'a>(&self, batch: &'a Tensor) -> Result<(usize, &'a [usize])> {
        let shape = batch.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::Config(format!(
                "layer 0: batch shape {shape:?} does not extend input shape {:?}",
                self.input_shape
            )));
        }
        Ok((shape[0], &shape[1..]))
    }

    /// Runs the network over a batch, keeping every intermediate tensor.
    pub fn forward(&self, batch: &Tensor) -> Result<Trace> {
        let (b, _) = self.split_batch(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.forward(activations.last().expect("non-empty"), b, &self.shapes[i + 1]);
            activations.push(out);
        }
        Ok(Trace {
            activations,
            batch: b,
        })
    }

    /// Convenience wrapper adding/removing a batch axis of 1.
    pub fn forward_single(&self, sample: &Tensor) -> Result<Tensor> {
        if sample.shape() != self.input_shape {
            return Err(Error::Config(format!(
                "layer 0: sample shape {:?} does not match input shape {:?}",
                sample.shape(),
                self.input_shape
            )));
        }
        let mut batched_shape = vec![1];
        batched_shape.extend_from_slice(sample.shape());
        let batched = sample.reshaped(&batched_shape)?;
        let trace = self.forward(&batched)?;
        trace.output().reshaped(self.output_shape())
    }

    /// Back-propagates `out_grad` through a trace produced by [`forward`].
    ///
    /// [`forward`]: NetworkSpec::forward
    pub fn backward(&self, trace: &Trace, out_grad: &Tensor) -> Result<Gradients> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::Usage(format!(
                "trace has {} activations but the network has {} layers",
                trace.activations.len(),
                self.layers.len()
            )));
        }
        for (i, act) in trace.activations.iter().enumerate() {
            if act.shape()[0] != trace.batch || act.shape()[1..] != self.shapes[i][..] {
                return Err(Error::Usage(format!(
                    "trace activation {i} has shape {:?}, network expects {:?} per sample",
                    act.shape(),
                    self.shapes[i]
                )));
            }
        }
        if out_grad.shape() != trace.output().shape() {
            return Err(Error::Usage(format!(
                "output gradient shape {:?} does not match output {:?}",
                out_grad.shape(),
                trace.output().shape()
            )));
        }

        let mut param_grads_rev: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
        let mut grad = out_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut layer_grads = Vec::new();
            grad = layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                &grad,
                trace.batch,
                &mut layer_grads,
            );
            param_grads_rev.push(layer_grads);
        }
        let params = param_grads_rev.into_iter().rev().flatten().collect();
        Ok(Gradients {
            params,
            input: grad,
        })
    }

    /// Zero-valued gradient holder matching this network's parameters.
    pub fn zero_gradients(&self, batch_shape: &[usize]) -> Gradients {
        Gradients {
            params: self.params().iter().map(|t| Tensor::zeros(t.shape())).collect(),
            input: Tensor::zeros(batch_shape),
        }
    }
}
