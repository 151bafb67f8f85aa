use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::{sgemm, sgemm_nt, sgemm_tn, Tensor};

/// One layer of a sequential network.
///
/// Convolutions are fixed at 2×2 kernels with stride 2 in both axes, so
/// windows never overlap and every conv/transposed-conv reduces to a
/// gather + GEMM + scatter. Spatial tensors are `[height, width, channels]`
/// per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LayerSpec {
    /// `y = W·x + b` with `weight` shaped `[out, in]`.
    Dense { weight: Tensor, bias: Tensor },
    /// 2×2 stride-2 convolution, `weight` shaped `[out_c, 2, 2, in_c]`.
    Conv2x2Stride2 { weight: Tensor, bias: Tensor },
    /// 2×2 stride-2 transposed convolution, `weight` shaped `[in_c, 2, 2, out_c]`.
    TransposedConv2x2Stride2 { weight: Tensor, bias: Tensor },
    Relu,
    LeakyRelu { slope: f32 },
    Sigmoid,
    Tanh,
    Flatten,
    Reshape { target: Vec<usize> },
}

fn init_uniform<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

impl LayerSpec {
    pub fn dense<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> LayerSpec {
        LayerSpec::Dense {
            weight: init_uniform(&[out_dim, in_dim], in_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn conv<R: Rng>(in_filters: usize, out_filters: usize, rng: &mut R) -> LayerSpec {
        LayerSpec::Conv2x2Stride2 {
            weight: init_uniform(&[out_filters, 2, 2, in_filters], 4 * in_filters, rng),
            bias: Tensor::zeros(&[out_filters]),
        }
    }

    pub fn transposed_conv<R: Rng>(
        in_filters: usize,
        out_filters: usize,
        rng: &mut R,
    ) -> LayerSpec {
        LayerSpec::TransposedConv2x2Stride2 {
            weight: init_uniform(&[in_filters, 2, 2, out_filters], in_filters, rng),
            bias: Tensor::zeros(&[out_filters]),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2x2Stride2 { .. } => "conv2x2stride2",
            LayerSpec::TransposedConv2x2Stride2 { .. } => "transposed_conv2x2stride2",
            LayerSpec::Relu => "relu",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let err = |msg: String| Error::Config(format!("layer {index} ({}): {msg}", self.kind_name()));
        match self {
            LayerSpec::Dense { weight, .. } => {
                let (out_dim, in_dim) = (weight.shape()[0], weight.shape()[1]);
                if input != [in_dim] {
                    return Err(err(format!("expected input shape [{in_dim}], got {input:?}")));
                }
                Ok(vec![out_dim])
            }
            LayerSpec::Conv2x2Stride2 { weight, .. } => {
                let (out_c, in_c) = (weight.shape()[0], weight.shape()[3]);
                match input {
                    [h, w, c] if *c == in_c => {
                        if h % 2 != 0 || w % 2 != 0 {
                            return Err(err(format!(
                                "spatial dims must be even for stride 2, got {h}x{w}"
                            )));
                        }
                        Ok(vec![h / 2, w / 2, out_c])
                    }
                    _ => Err(err(format!(
                        "expected input shape [h, w, {in_c}], got {input:?}"
                    ))),
                }
            }
            LayerSpec::TransposedConv2x2Stride2 { weight, .. } => {
                let (in_c, out_c) = (weight.shape()[0], weight.shape()[3]);
                match input {
                    [h, w, c] if *c == in_c => Ok(vec![h * 2, w * 2, out_c]),
                    _ => Err(err(format!(
                        "expected input shape [h, w, {in_c}], got {input:?}"
                    ))),
                }
            }
            LayerSpec::Relu | LayerSpec::LeakyRelu { .. } | LayerSpec::Sigmoid | LayerSpec::Tanh => {
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { target } => {
                let have: usize = input.iter().product();
                let want: usize = target.iter().product();
                if have != want {
                    return Err(err(format!(
                        "cannot reshape {input:?} ({have} values) to {target:?} ({want} values)"
                    )));
                }
                Ok(target.clone())
            }
        }
    }

    /// Parameter tensors of this layer, weight before bias.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            LayerSpec::Dense { weight, bias }
            | LayerSpec::Conv2x2Stride2 { weight, bias }
            | LayerSpec::TransposedConv2x2Stride2 { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            LayerSpec::Dense { weight, bias }
            | LayerSpec::Conv2x2Stride2 { weight, bias }
            | LayerSpec::TransposedConv2x2Stride2 { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }
}

/// Copies stride-2 2×2 windows into rows of length `4·c`, batch included.
/// Tap order is (0,0), (0,1), (1,0), (1,1) to match the weight layout.
fn im2row(input: &[f32], batch: usize, h: usize, w: usize, c: usize, rows: &mut [f32]) {
    let (oh, ow) = (h / 2, w / 2);
    let row_len = 4 * c;
    debug_assert_eq!(rows.len(), batch * oh * ow * row_len);
    for b in 0..batch {
        let sample = &input[b * h * w * c..(b + 1) * h * w * c];
        for i in 0..oh {
            for j in 0..ow {
                let dst = ((b * oh + i) * ow + j) * row_len;
                let top = (2 * i * w + 2 * j) * c;
                let bottom = ((2 * i + 1) * w + 2 * j) * c;
                rows[dst..dst + 2 * c].copy_from_slice(&sample[top..top + 2 * c]);
                rows[dst + 2 * c..dst + 4 * c].copy_from_slice(&sample[bottom..bottom + 2 * c]);
            }
        }
    }
}

/// Inverse of [`im2row`]: scatters rows back into the spatial layout.
/// Windows are disjoint so this is a pure copy.
fn row2im(rows: &[f32], batch: usize, h: usize, w: usize, c: usize, out: &mut [f32]) {
    let (oh, ow) = (h / 2, w / 2);
    let row_len = 4 * c;
    for b in 0..batch {
        let sample = &mut out[b * h * w * c..(b + 1) * h * w * c];
        for i in 0..oh {
            for j in 0..ow {
                let src = ((b * oh + i) * ow + j) * row_len;
                let top = (2 * i * w + 2 * j) * c;
                let bottom = ((2 * i + 1) * w + 2 * j) * c;
                sample[top..top + 2 * c].copy_from_slice(&rows[src..src + 2 * c]);
                sample[bottom..bottom + 2 * c].copy_from_slice(&rows[src + 2 * c..src + 4 * c]);
            }
        }
    }
}

fn add_bias_rows(out: &mut [f32], bias: &[f32]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

fn bias_grad_rows(dy: &[f32], db: &mut [f32]) {
    for row in dy.chunks_exact(db.len()) {
        for (g, d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
}

impl LayerSpec {
    /// Batched forward. `input` is `[batch] + in_shape`, returns `[batch] + out_shape`.
    pub(crate) fn forward(&self, input: &Tensor, batch: usize, out_shape: &[usize]) -> Tensor {
        let mut out_full = vec![batch];
        out_full.extend_from_slice(out_shape);
        match self {
            LayerSpec::Dense { weight, bias } => {
                let (out_dim, in_dim) = (weight.shape()[0], weight.shape()[1]);
                let mut y = Tensor::zeros(&out_full);
                sgemm_nt(batch, in_dim, out_dim, input.data(), weight.data(), 0.0, y.data_mut());
                add_bias_rows(y.data_mut(), bias.data());
                y
            }
            LayerSpec::Conv2x2Stride2 { weight, bias } => {
                let in_shape = input.shape();
                let (h, w, c) = (in_shape[1], in_shape[2], in_shape[3]);
                let out_c = weight.shape()[0];
                let rows_n = batch * (h / 2) * (w / 2);
                let mut rows = vec![0.0; rows_n * 4 * c];
                im2row(input.data(), batch, h, w, c, &mut rows);
                let mut y = Tensor::zeros(&out_full);
                sgemm_nt(rows_n, 4 * c, out_c, &rows, weight.data(), 0.0, y.data_mut());
                add_bias_rows(y.data_mut(), bias.data());
                y
            }
            LayerSpec::TransposedConv2x2Stride2 { weight, bias } => {
                let in_shape = input.shape();
                let (h, w, c) = (in_shape[1], in_shape[2], in_shape[3]);
                let out_c = weight.shape()[3];
                let rows_n = batch * h * w;
                let mut yrows = vec![0.0; rows_n * 4 * out_c];
                sgemm(rows_n, c, 4 * out_c, input.data(), weight.data(), 0.0, &mut yrows);
                let mut y = Tensor::zeros(&out_full);
                row2im(&yrows, batch, 2 * h, 2 * w, out_c, y.data_mut());
                add_bias_rows(y.data_mut(), bias.data());
                y
            }
            LayerSpec::Relu => {
                let mut y = input.clone();
                for v in y.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                y.reshaped(&out_full).expect("relu shape")
            }
            LayerSpec::LeakyRelu { slope } => {
                let mut y = input.clone();
                for v in y.data_mut() {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
                y.reshaped(&out_full).expect("leaky_relu shape")
            }
            LayerSpec::Sigmoid => {
                let mut y = input.clone();
                for v in y.data_mut() {
                    *v = (1.0 / (1.0 + (-f64::from(*v)).exp())) as f32;
                }
                y.reshaped(&out_full).expect("sigmoid shape")
            }
            LayerSpec::Tanh => {
                let mut y = input.clone();
                for v in y.data_mut() {
                    *v = f64::from(*v).tanh() as f32;
                }
                y.reshaped(&out_full).expect("tanh shape")
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                input.reshaped(&out_full).expect("reshape validated at construction")
            }
        }
    }

    /// Batched backward. Returns the input gradient and appends parameter
    /// gradients (weight, bias) in order.
    pub(crate) fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        out_grad: &Tensor,
        batch: usize,
        param_grads: &mut Vec<Tensor>,
    ) -> Tensor {
        match self {
            LayerSpec::Dense { weight, .. } => {
                let (out_dim, in_dim) = (weight.shape()[0], weight.shape()[1]);
                let mut dw = Tensor::zeros(weight.shape());
                sgemm_tn(batch, out_dim, in_dim, out_grad.data(), input.data(), 0.0, dw.data_mut());
                let mut db = Tensor::zeros(&[out_dim]);
                bias_grad_rows(out_grad.data(), db.data_mut());
                let mut dx = Tensor::zeros(input.shape());
                sgemm(batch, out_dim, in_dim, out_grad.data(), weight.data(), 0.0, dx.data_mut());
                param_grads.push(dw);
                param_grads.push(db);
                dx
            }
            LayerSpec::Conv2x2Stride2 { weight, .. } => {
                let in_shape = input.shape();
                let (h, w, c) = (in_shape[1], in_shape[2], in_shape[3]);
                let out_c = weight.shape()[0];
                let rows_n = batch * (h / 2) * (w / 2);
                let mut rows = vec![0.0; rows_n * 4 * c];
                im2row(input.data(), batch, h, w, c, &mut rows);

                let mut dw = Tensor::zeros(weight.shape());
                sgemm_tn(rows_n, out_c, 4 * c, out_grad.data(), &rows, 0.0, dw.data_mut());
                let mut db = Tensor::zeros(&[out_c]);
                bias_grad_rows(out_grad.data(), db.data_mut());

                let mut drows = vec![0.0; rows_n * 4 * c];
                sgemm(rows_n, out_c, 4 * c, out_grad.data(), weight.data(), 0.0, &mut drows);
                let mut dx = Tensor::zeros(input.shape());
                row2im(&drows, batch, h, w, c, dx.data_mut());
                param_grads.push(dw);
                param_grads.push(db);
                dx
            }
            LayerSpec::TransposedConv2x2Stride2 { weight, .. } => {
                let in_shape = input.shape();
                let (h, w, c) = (in_shape[1], in_shape[2], in_shape[3]);
                let out_c = weight.shape()[3];
                let rows_n = batch * h * w;
                // Gather output gradient into GEMM row layout.
                let mut dyrows = vec![0.0; rows_n * 4 * out_c];
                im2row(out_grad.data(), batch, 2 * h, 2 * w, out_c, &mut dyrows);

                let mut dw = Tensor::zeros(weight.shape());
                sgemm_tn(rows_n, c, 4 * out_c, input.data(), &dyrows, 0.0, dw.data_mut());
                let mut db = Tensor::zeros(&[out_c]);
                bias_grad_rows(out_grad.data(), db.data_mut());

                let mut dx = Tensor::zeros(input.shape());
                sgemm_nt(rows_n, 4 * out_c, c, &dyrows, weight.data(), 0.0, dx.data_mut());
                param_grads.push(dw);
                param_grads.push(db);
                dx
            }
            LayerSpec::Relu => {
                let mut dx = out_grad.clone();
                for (g, x) in dx.data_mut().iter_mut().zip(input.data()) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
                dx.reshaped(input.shape()).expect("relu grad shape")
            }
            LayerSpec::LeakyRelu { slope } => {
                let mut dx = out_grad.clone();
                for (g, x) in dx.data_mut().iter_mut().zip(input.data()) {
                    if *x <= 0.0 {
                        *g *= slope;
                    }
                }
                dx.reshaped(input.shape()).expect("leaky grad shape")
            }
            LayerSpec::Sigmoid => {
                let mut dx = out_grad.clone();
                for (g, y) in dx.data_mut().iter_mut().zip(output.data()) {
                    *g *= y * (1.0 - y);
                }
                dx.reshaped(input.shape()).expect("sigmoid grad shape")
            }
            LayerSpec::Tanh => {
                let mut dx = out_grad.clone();
                for (g, y) in dx.data_mut().iter_mut().zip(output.data()) {
                    *g *= 1.0 - y * y;
                }
                dx.reshaped(input.shape()).expect("tanh grad shape")
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                out_grad.reshaped(input.shape()).expect("reshape grad shape")
            }
        }
    }
}
