//! Central-difference gradient checks for the tensor primitives and a small
//! network. Each `check_*` returns the relative error
//! `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)` between analytic gradients `a` and numeric
//! estimates `n` over every checked entry.

use rand::Rng;
use segpipe_core::dataset::Image;
use segpipe_core::network::{images_to_batch, Layer, Network, NetworkConfig};
use segpipe_core::rng::seeded;
use segpipe_core::tensor::{
    conv2d_backward, conv2d_forward, leaky_relu, leaky_relu_backward, softmax_cross_entropy,
    upsample_nearest, upsample_nearest_backward, Tensor,
};

pub const EPS: f32 = 1e-3;

pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 { 0.0 } else { norm(&diff) / scale }
}

/// Perturbs entry `i` by ±ε and returns both copies with the actual f32 step.
fn perturbed(x: &Tensor, i: usize) -> (Tensor, Tensor, f64) {
    let mut plus = x.clone();
    let mut minus = x.clone();
    plus.data_mut()[i] += EPS;
    minus.data_mut()[i] -= EPS;
    let step = plus.data()[i] as f64 - minus.data()[i] as f64;
    (plus, minus, step)
}

/// Derivative of `Σ r·f(x)` along entry `i`, differencing each output
/// before weighting so unchanged outputs cancel exactly.
fn projected_diff(x: &Tensor, i: usize, r: &Tensor, f: impl Fn(&Tensor) -> Tensor) -> f64 {
    let (plus, minus, step) = perturbed(x, i);
    let (yp, ym) = (f(&plus), f(&minus));
    let delta: f64 = yp
        .data()
        .iter()
        .zip(ym.data())
        .zip(r.data())
        .map(|((&a, &b), &w)| (a as f64 - b as f64) * w as f64)
        .sum();
    delta / step
}

fn scalar_diff(x: &Tensor, i: usize, f: impl Fn(&Tensor) -> f64) -> f64 {
    let (plus, minus, step) = perturbed(x, i);
    (f(&plus) - f(&minus)) / step
}

fn uniform(shape: &[usize], lo: f32, hi: f32, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values in `[−1, −0.05] ∪ [0.05, 1]`, away from the activation kink.
fn off_kink(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v: f32 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) { v } else { -v }
    })
}

fn compare(analytic: &Tensor, numeric: impl Fn(usize) -> f64) -> f64 {
    let a: Vec<f64> = analytic.data().iter().map(|&v| v as f64).collect();
    let n: Vec<f64> = (0..a.len()).map(numeric).collect();
    rel_err(&a, &n)
}

pub fn check_conv(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let stride = 1 + (seed % 2) as usize;
    let input = uniform(&[2, 3, 6, 6], -1.0, 1.0, &mut rng);
    let weights = uniform(&[4, 3, 3, 3], -1.0, 1.0, &mut rng);
    let bias = uniform(&[4], -1.0, 1.0, &mut rng);
    let out = conv2d_forward(&input, &weights, &bias, stride, 1).unwrap();
    let r = uniform(out.shape(), -1.0, 1.0, &mut rng);
    let g = conv2d_backward(&input, &weights, &r, stride, 1).unwrap();
    let conv = |x: &Tensor, w: &Tensor, b: &Tensor| conv2d_forward(x, w, b, stride, 1).unwrap();
    let e_in = compare(&g.input, |i| projected_diff(&input, i, &r, |x| conv(x, &weights, &bias)));
    let e_w = compare(&g.weights, |i| projected_diff(&weights, i, &r, |w| conv(&input, w, &bias)));
    let e_b = compare(&g.bias, |i| projected_diff(&bias, i, &r, |b| conv(&input, &weights, b)));
    e_in.max(e_w).max(e_b)
}

pub fn check_leaky_relu(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let alpha = 0.01;
    let x = off_kink(&[2, 3, 5, 5], &mut rng);
    let r = uniform(x.shape(), -1.0, 1.0, &mut rng);
    let g = leaky_relu_backward(&x, &r, alpha).unwrap();
    compare(&g, |i| projected_diff(&x, i, &r, |x| leaky_relu(x, alpha).unwrap()))
}

pub fn check_upsample(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let x = uniform(&[1, 2, 3, 4], -1.0, 1.0, &mut rng);
    let r = uniform(&[1, 2, 6, 8], -1.0, 1.0, &mut rng);
    let g = upsample_nearest_backward(&r, 2).unwrap();
    compare(&g, |i| projected_diff(&x, i, &r, |x| upsample_nearest(x, 2).unwrap()))
}

pub fn check_softmax_cross_entropy(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let logits = uniform(&[2, 5, 3, 3], -2.0, 2.0, &mut rng);
    let targets: Vec<u8> = (0..2 * 3 * 3).map(|_| rng.random_range(0..5)).collect();
    let (_, g) = softmax_cross_entropy(&logits, &targets).unwrap();
    compare(&g, |i| scalar_diff(&logits, i, |l| softmax_cross_entropy(l, &targets).unwrap().0))
}

pub const NETWORK_SAMPLES: usize = 60;

/// Sign pattern of every leaky-ReLU input for `batch`.
fn kink_signs(net: &Network, batch: &Tensor) -> Vec<bool> {
    let (_, cache) = net.forward_cached(batch).unwrap();
    net.layers()
        .iter()
        .zip(cache.layer_inputs())
        .filter(|(l, _)| matches!(l, Layer::LeakyRelu { .. }))
        .flat_map(|(_, x)| x.data().iter().map(|&v| v > 0.0))
        .collect()
}

fn with_param(net: &Network, t: usize, p: &Tensor) -> Network {
    let mut probe = net.clone();
    *probe.parameters_mut()[t] = p.clone();
    probe
}

/// Two-stage network on a 1×3×16×16 input; checks `NETWORK_SAMPLES`
/// randomly chosen parameters against the full loss. A parameter whose ±ε
/// step moves any leaky-ReLU input across zero is redrawn, since the loss
/// is not differentiable along that step.
pub fn check_network(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let cfg = NetworkConfig {
        stage_widths: vec![4, 8],
        ..NetworkConfig::default()
    };
    let net = Network::build(cfg, seed).unwrap();
    let pixels: Vec<u8> = (0..16 * 16 * 3).map(|_| rng.random()).collect();
    let image = Image::new(16, 16, pixels).unwrap();
    let batch = images_to_batch(&[&image], net.config().normalization).unwrap();
    let targets: Vec<u8> = (0..16 * 16).map(|_| rng.random_range(0..12)).collect();
    let (_, grads) = net.loss_and_grads(&batch, &targets).unwrap();
    let base_signs = kink_signs(&net, &batch);

    let sizes: Vec<usize> = grads.iter().map(Tensor::len).collect();
    let total: usize = sizes.iter().sum();
    assert!(total >= NETWORK_SAMPLES);
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    let mut draws = 0;
    while analytic.len() < NETWORK_SAMPLES {
        draws += 1;
        assert!(draws < 20 * NETWORK_SAMPLES, "too many parameters straddle a kink");
        let mut flat = rng.random_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let (plus, minus, step) = perturbed(net.parameters()[t], flat);
        let (np, nm) = (with_param(&net, t, &plus), with_param(&net, t, &minus));
        if kink_signs(&np, &batch) != base_signs || kink_signs(&nm, &batch) != base_signs {
            continue;
        }
        let n = (np.loss(&batch, &targets).unwrap() - nm.loss(&batch, &targets).unwrap()) / step;
        analytic.push(grads[t].data()[flat] as f64);
        numeric.push(n);
    }
    rel_err(&analytic, &numeric)
}
