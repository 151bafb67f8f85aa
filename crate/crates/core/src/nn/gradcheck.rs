use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::network::NetworkSpec;
use crate::nn::tensor::Tensor;

/// Double-precision re-evaluation of a network on one batch, returning
/// the sum of all outputs. Used as the finite-difference side of
/// [`gradient_check`] so the comparison is not polluted by 32-bit
/// rounding in the differences.
fn reference_loss(net: &NetworkSpec, batch: &Tensor) -> f64 {
    let b = batch.shape()[0];
    let mut current: Vec<f64> = batch.data().iter().map(|&v| f64::from(v)).collect();
    let mut shape: Vec<usize> = net.input_shape().to_vec();

    for layer in net.layers() {
        match layer {
            LayerSpec::Dense { weight, bias } => {
                let (out_dim, in_dim) = (weight.shape()[0], weight.shape()[1]);
                let mut next = vec![0.0f64; b * out_dim];
                for s in 0..b {
                    let x = &current[s * in_dim..(s + 1) * in_dim];
                    for o in 0..out_dim {
                        let row = &weight.data()[o * in_dim..(o + 1) * in_dim];
                        let mut acc = f64::from(bias.data()[o]);
                        for (w, v) in row.iter().zip(x) {
                            acc += f64::from(*w) * v;
                        }
                        next[s * out_dim + o] = acc;
                    }
                }
                current = next;
                shape = vec![out_dim];
            }
            LayerSpec::Conv2x2Stride2 { weight, bias } => {
                let (h, w, c) = (shape[0], shape[1], shape[2]);
                let out_c = weight.shape()[0];
                let (oh, ow) = (h / 2, w / 2);
                let mut next = vec![0.0f64; b * oh * ow * out_c];
                for s in 0..b {
                    let x = &current[s * h * w * c..(s + 1) * h * w * c];
                    for i in 0..oh {
                        for j in 0..ow {
                            for oc in 0..out_c {
                                let mut acc = f64::from(bias.data()[oc]);
                                for di in 0..2 {
                                    for dj in 0..2 {
                                        for ic in 0..c {
                                            let xv = x[((2 * i + di) * w + 2 * j + dj) * c + ic];
                                            let wv = weight.data()
                                                [((oc * 2 + di) * 2 + dj) * c + ic];
                                            acc += xv * f64::from(wv);
                                        }
                                    }
                                }
                                next[((s * oh + i) * ow + j) * out_c + oc] = acc;
                            }
                        }
                    }
                }
                current = next;
                shape = vec![oh, ow, out_c];
            }
            LayerSpec::TransposedConv2x2Stride2 { weight, bias } => {
                let (h, w, c) = (shape[0], shape[1], shape[2]);
                let out_c = weight.shape()[3];
                let (oh, ow) = (2 * h, 2 * w);
                let mut next = vec![0.0f64; b * oh * ow * out_c];
                for s in 0..b {
                    let x = &current[s * h * w * c..(s + 1) * h * w * c];
                    let y = &mut next[s * oh * ow * out_c..(s + 1) * oh * ow * out_c];
                    for v in y.iter_mut().enumerate() {
                        *v.1 = f64::from(bias.data()[v.0 % out_c]);
                    }
                    for i in 0..h {
                        for j in 0..w {
                            for ic in 0..c {
                                let xv = x[(i * w + j) * c + ic];
                                for di in 0..2 {
                                    for dj in 0..2 {
                                        for oc in 0..out_c {
                                            let wv = weight.data()
                                                [((ic * 2 + di) * 2 + dj) * out_c + oc];
                                            y[((2 * i + di) * ow + 2 * j + dj) * out_c + oc] +=
                                                xv * f64::from(wv);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                current = next;
                shape = vec![oh, ow, out_c];
            }
            LayerSpec::Relu => {
                for v in &mut current {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            LayerSpec::LeakyRelu { slope } => {
                for v in &mut current {
                    if *v < 0.0 {
                        *v *= f64::from(*slope);
                    }
                }
            }
            LayerSpec::Sigmoid => {
                for v in &mut current {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
            }
            LayerSpec::Tanh => {
                for v in &mut current {
                    *v = v.tanh();
                }
            }
            LayerSpec::Flatten => {
                shape = vec![shape.iter().product()];
            }
            LayerSpec::Reshape { target } => {
                shape = target.clone();
            }
        }
    }
    current.iter().sum()
}

/// Compares analytic gradients against central finite differences of the
/// scalar loss `sum(outputs)` and returns the maximum relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)` over all
/// parameters.
pub fn gradient_check(net: &NetworkSpec, input: &Tensor, step: f64) -> Result<f64> {
    if net.total_parameter_count() == 0 {
        return Err(Error::Usage(
            "gradient_check requires a network with at least one parameter".into(),
        ));
    }
    let trace = net.forward(input)?;
    let ones = Tensor::from_vec(
        trace.output().shape(),
        vec![1.0; trace.output().len()],
    )?;
    let analytic = net.backward(&trace, &ones)?;

    let mut worst = 0.0f64;
    let mut probe = net.clone();
    let param_count = net.params().len();
    for t in 0..param_count {
        for i in 0..net.params()[t].len() {
            let original = probe.params()[t].data()[i];

            probe.params_mut()[t].data_mut()[i] = original + step as f32;
            let plus = reference_loss(&probe, input);
            probe.params_mut()[t].data_mut()[i] = original - step as f32;
            let minus = reference_loss(&probe, input);
            probe.params_mut()[t].data_mut()[i] = original;

            // Use the realized f32 perturbation, not the requested one.
            let h_plus = f64::from(original + step as f32) - f64::from(original);
            let h_minus = f64::from(original) - f64::from(original - step as f32);
            let numeric = (plus - minus) / (h_plus + h_minus);
            let a = f64::from(analytic.params[t].data()[i]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        use rand::Rng;
        let len: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(0.1..1.0f32)).collect()).unwrap()
    }

    #[test]
    fn pure_linear_net_checks_out_nearly_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = NetworkSpec::new(
            vec![3],
            vec![LayerSpec::dense(3, 4, &mut rng), LayerSpec::dense(4, 2, &mut rng)],
        )
        .unwrap();
        let input = random_input(&[2, 3], &mut rng);
        let err = gradient_check(&net, &input, 1e-3).unwrap();
        assert!(err < 1e-5, "linear gradient error {err}");
    }

    #[test]
    fn leaky_relu_net_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = NetworkSpec::new(
            vec![4],
            vec![
                LayerSpec::dense(4, 6, &mut rng),
                LayerSpec::LeakyRelu { slope: 0.2 },
                LayerSpec::dense(6, 3, &mut rng),
                LayerSpec::Sigmoid,
            ],
        )
        .unwrap();
        let input = random_input(&[3, 4], &mut rng);
        let err = gradient_check(&net, &input, 1e-3).unwrap();
        assert!(err < 1e-3, "leaky_relu gradient error {err}");
    }

    #[test]
    fn conv_and_transposed_conv_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = NetworkSpec::new(
            vec![4, 4, 2],
            vec![
                LayerSpec::conv(2, 3, &mut rng),
                LayerSpec::Tanh,
                LayerSpec::transposed_conv(3, 2, &mut rng),
                LayerSpec::Sigmoid,
            ],
        )
        .unwrap();
        let input = random_input(&[2, 4, 4, 2], &mut rng);
        let err = gradient_check(&net, &input, 1e-3).unwrap();
        assert!(err < 1e-3, "conv gradient error {err}");
    }

    #[test]
    fn parameterless_net_is_a_usage_error() {
        let net = NetworkSpec::new(vec![2], vec![LayerSpec::Relu]).unwrap();
        let input = Tensor::from_vec(&[1, 2], vec![0.5, 0.5]).unwrap();
        assert!(gradient_check(&net, &input, 1e-3).is_err());
    }

    #[test]
    fn f32_forward_agrees_with_f64_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net = NetworkSpec::new(
            vec![4, 8, 1],
            vec![
                LayerSpec::conv(1, 4, &mut rng),
                LayerSpec::LeakyRelu { slope: 0.2 },
                LayerSpec::Flatten,
                LayerSpec::dense(32, 5, &mut rng),
                LayerSpec::Tanh,
            ],
        )
        .unwrap();
        let input = random_input(&[3, 4, 8, 1], &mut rng);
        let trace = net.forward(&input).unwrap();
        let sum32: f64 = trace.output().data().iter().map(|&v| f64::from(v)).sum();
        let sum64 = reference_loss(&net, &input);
        assert!(
            (sum32 - sum64).abs() <= 1e-4 * sum64.abs().max(1.0),
            "f32 {sum32} vs f64 {sum64}"
        );
    }
}
