// Rough throughput probe: one VAE-scale batch forward+backward.
use std::time::Instant;

use coexist_core::nn::{LayerSpec, NetworkSpec, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let encoder = NetworkSpec::new(
        vec![8, 16, 1],
        vec![
            LayerSpec::conv(1, 128, &mut rng),
            LayerSpec::Relu,
            LayerSpec::conv(128, 256, &mut rng),
            LayerSpec::Relu,
            LayerSpec::conv(256, 512, &mut rng),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::dense(1024, 256, &mut rng),
        ],
    )
    .unwrap();
    let decoder = NetworkSpec::new(
        vec![128],
        vec![
            LayerSpec::dense(128, 1024, &mut rng),
            LayerSpec::Relu,
            LayerSpec::Reshape { target: vec![1, 2, 512] },
            LayerSpec::transposed_conv(512, 256, &mut rng),
            LayerSpec::Relu,
            LayerSpec::transposed_conv(256, 128, &mut rng),
            LayerSpec::Relu,
            LayerSpec::transposed_conv(128, 1, &mut rng),
            LayerSpec::Sigmoid,
        ],
    )
    .unwrap();

    let batch = 64usize;
    let input = Tensor::from_vec(
        &[batch, 8, 16, 1],
        (0..batch * 128).map(|v| (v % 2) as f32).collect(),
    )
    .unwrap();
    let latent = Tensor::from_vec(&[batch, 128], vec![0.1; batch * 128]).unwrap();

    // warmup
    for _ in 0..3 {
        let t = encoder.forward(&input).unwrap();
        let ones = Tensor::from_vec(t.output().shape(), vec![1.0; t.output().len()]).unwrap();
        encoder.backward(&t, &ones).unwrap();
    }

    let iters = 30;
    let start = Instant::now();
    for _ in 0..iters {
        let te = encoder.forward(&input).unwrap();
        let ge = Tensor::from_vec(te.output().shape(), vec![1.0; te.output().len()]).unwrap();
        encoder.backward(&te, &ge).unwrap();
        let td = decoder.forward(&latent).unwrap();
        let gd = Tensor::from_vec(td.output().shape(), vec![0.5; td.output().len()]).unwrap();
        decoder.backward(&td, &gd).unwrap();
    }
    let dt = start.elapsed().as_secs_f64() / iters as f64;
    // flops per sample fwd+bwd approx 3x fwd(9.25M) = 27.75M
    let flops = 27.75e6 * batch as f64;
    println!(
        "batch step: {:.2} ms  (~{:.1} GFLOPS)",
        dt * 1e3,
        flops / dt / 1e9
    );
    println!(
        "VAE epoch (5000 samples): {:.2} s; 300 epochs: {:.1} s",
        dt * 79.0,
        dt * 79.0 * 300.0
    );
}
