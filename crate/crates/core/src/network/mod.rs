//! The segmentation network: a stride-2 convolutional encoder, a
//! nearest-upsampling decoder that mirrors it, and a 1×1 classifier head.
//!
//! For stage widths `[w0, w1, …, wS-1]` the layer stack is
//!
//! ```text
//! encoder   conv k×k /2 (in → w0) · lrelu · … · conv k×k /2 (wS-2 → wS-1) · lrelu
//! decoder   up×2 · conv k×k (wS-1 → wS-2) · lrelu · … · up×2 · conv k×k (w0 → w0) · lrelu
//! head      conv 1×1 (w0 → classes)
//! ```
//!
//! so the logits come out at the input resolution whenever both spatial
//! sizes are multiples of `2^S`.

mod checkpoint;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use train::{pixel_accuracy, predict_batch, train, train_with, EpochStats, Sample, TrainConfig, TrainReport};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Image, LabelMap};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{
    conv2d_backward, conv2d_forward, leaky_relu, leaky_relu_backward, softmax_cross_entropy,
    upsample_nearest, upsample_nearest_backward, Tensor, DEFAULT_LEAKY_ALPHA,
};

/// How raw 8-bit pixels become network inputs. Stored in checkpoints so
/// inference always matches training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `value / 255`, no mean subtraction.
    #[default]
    UnitRange,
}

impl Normalization {
    pub fn id(self) -> u32 {
        match self {
            Normalization::UnitRange => 0,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(Normalization::UnitRange),
            _ => None,
        }
    }

    pub fn apply(self, byte: u8) -> f32 {
        match self {
            Normalization::UnitRange => byte as f32 / 255.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    pub stage_widths: Vec<usize>,
    pub kernel: usize,
    pub leaky_alpha: f32,
    pub normalization: Normalization,
    /// Start the classifier head at exactly zero (uniform initial predictions).
    pub zero_init_head: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            in_channels: 3,
            num_classes: 12,
            stage_widths: vec![16, 32, 64],
            kernel: 3,
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
            normalization: Normalization::UnitRange,
            zero_init_head: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > 256 {
            return Err(Error::Parameter(format!(
                "num_classes {} not in [2, 256]",
                self.num_classes
            )));
        }
        if self.in_channels == 0 {
            return Err(Error::Parameter("in_channels must be positive".into()));
        }
        if self.stage_widths.is_empty() || self.stage_widths.contains(&0) {
            return Err(Error::Parameter(format!(
                "stage widths {:?} must be nonempty and positive",
                self.stage_widths
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Parameter(format!("kernel {} must be odd", self.kernel)));
        }
        if !(self.leaky_alpha > 0.0 && self.leaky_alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "leaky_alpha {} not in (0, 1)",
                self.leaky_alpha
            )));
        }
        Ok(())
    }

    /// Spatial sizes must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.stage_widths.len()
    }

    /// `(in, out, kernel, stride)` for every convolution, in layer order.
    pub fn conv_specs(&self) -> Vec<(usize, usize, usize, usize)> {
        let w = &self.stage_widths;
        let k = self.kernel;
        let mut specs = Vec::new();
        let mut prev = self.in_channels;
        for &width in w {
            specs.push((prev, width, k, 2));
            prev = width;
        }
        for i in (0..w.len()).rev() {
            let out = if i == 0 { w[0] } else { w[i - 1] };
            specs.push((prev, out, k, 1));
            prev = out;
        }
        specs.push((prev, self.num_classes, 1, 1));
        specs
    }

    /// Closed-form parameter count: `Σ cout·cin·k² + cout` over convolutions.
    pub fn param_count(&self) -> usize {
        self.conv_specs()
            .iter()
            .map(|&(cin, cout, k, _)| cout * cin * k * k + cout)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weights: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    LeakyRelu { alpha: f32 },
    Upsample { factor: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
}

/// Inputs to each layer from a forward pass, kept for backpropagation.
pub struct ForwardCache {
    inputs: Vec<Tensor>,
}

impl ForwardCache {
    /// The input each layer received, in layer order.
    pub fn layer_inputs(&self) -> &[Tensor] {
        &self.inputs
    }
}

impl Network {
    /// He-normal (fan-in) weights from the seeded generator, zero biases.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(seed);
        let specs = config.conv_specs();
        let stages = config.stage_widths.len();
        let mut layers = Vec::new();
        for (i, &(cin, cout, k, stride)) in specs.iter().enumerate() {
            let is_head = i == specs.len() - 1;
            if i >= stages && !is_head {
                layers.push(Layer::Upsample { factor: 2 });
            }
            let std = (2.0 / (cin * k * k) as f64).sqrt();
            let shape = [cout, cin, k, k];
            let weights = if is_head && config.zero_init_head {
                Tensor::zeros(&shape)
            } else {
                Tensor::from_fn(&shape, |_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (z * std) as f32
                })
            };
            layers.push(Layer::Conv(Conv2d {
                weights,
                bias: Tensor::zeros(&[cout]),
                stride,
                padding: k / 2,
            }));
            if !is_head {
                layers.push(Layer::LeakyRelu {
                    alpha: config.leaky_alpha,
                });
            }
        }
        Ok(Network { config, layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Parameter tensors in layer order (weights then bias per convolution).
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(c) => Some([&c.weights, &c.bias]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Conv(c) => Some([&mut c.weights, &mut c.bias]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        param_count(&self.layers)
    }

    /// Parameter count in millions, rounded to two decimals.
    pub fn param_millions(&self) -> f64 {
        (self.param_count() as f64 / 1e4).round() / 100.0
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let [_, c, h, w] = batch.dims4()?;
        if c != self.config.in_channels {
            return Err(Error::Dimension(format!(
                "network expects {} input channels, got {c}",
                self.config.in_channels
            )));
        }
        let m = self.config.size_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(Error::Geometry(format!(
                "input {h}x{w}: height and width must be multiples of {m}"
            )));
        }
        Ok(())
    }

    /// Logits `[N, classes, H, W]` for a batch `[N, in_channels, H, W]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = apply(layer, &x)?;
        }
        Ok(x)
    }

    /// Forward pass that also returns every layer's input.
    pub fn forward_cached(&self, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let y = apply(layer, &x)?;
            inputs.push(std::mem::replace(&mut x, y));
        }
        Ok((x, ForwardCache { inputs }))
    }

    /// Parameter gradients (same order as [`Network::parameters`]) given the
    /// gradient of the loss with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: Tensor) -> Result<Vec<Tensor>> {
        let mut grads = Vec::new();
        let mut g = grad_logits;
        for (layer, input) in self.layers.iter().zip(&cache.inputs).rev() {
            match layer {
                Layer::Conv(c) => {
                    let cg = conv2d_backward(input, &c.weights, &g, c.stride, c.padding)?;
                    grads.push(cg.bias);
                    grads.push(cg.weights);
                    g = cg.input;
                }
                Layer::LeakyRelu { alpha } => g = leaky_relu_backward(input, &g, *alpha)?,
                Layer::Upsample { factor } => g = upsample_nearest_backward(&g, *factor)?,
            }
        }
        grads.reverse();
        Ok(grads)
    }

    /// Mean cross-entropy over all pixels of a labelled batch.
    pub fn loss(&self, batch: &Tensor, targets: &[u8]) -> Result<f64> {
        let logits = self.forward(batch)?;
        Ok(softmax_cross_entropy(&logits, targets)?.0)
    }

    /// Loss and parameter gradients for one batch.
    pub fn loss_and_grads(&self, batch: &Tensor, targets: &[u8]) -> Result<(f64, Vec<Tensor>)> {
        let (logits, cache) = self.forward_cached(batch)?;
        let (loss, grad) = softmax_cross_entropy(&logits, targets)?;
        Ok((loss, self.backward(&cache, grad)?))
    }

    /// Per-pixel class with the highest probability (lowest index on ties).
    pub fn predict(&self, image: &Image) -> Result<LabelMap> {
        let batch = images_to_batch(&[image], self.config.normalization)?;
        let logits = self.forward(&batch)?;
        Ok(argmax_labels(&logits)?.remove(0))
    }
}

fn apply(layer: &Layer, x: &Tensor) -> Result<Tensor> {
    match layer {
        Layer::Conv(c) => conv2d_forward(x, &c.weights, &c.bias, c.stride, c.padding),
        Layer::LeakyRelu { alpha } => leaky_relu(x, *alpha),
        Layer::Upsample { factor } => upsample_nearest(x, *factor),
    }
}

/// Number of parameter elements in a layer list.
pub fn param_count(layers: &[Layer]) -> usize {
    layers
        .iter()
        .map(|l| match l {
            Layer::Conv(c) => c.weights.len() + c.bias.len(),
            _ => 0,
        })
        .sum()
}

/// Stacks images into a normalised `[N, 3, H, W]` tensor.
pub fn images_to_batch(images: &[&Image], norm: Normalization) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Data("empty image batch".into()))?;
    let (w, h) = (first.width(), first.height());
    let plane = w * h;
    let mut data = vec![0.0f32; images.len() * 3 * plane];
    for (n, img) in images.iter().enumerate() {
        if img.width() != w || img.height() != h {
            return Err(Error::Data(format!(
                "batch mixes {w}x{h} and {}x{} images",
                img.width(),
                img.height()
            )));
        }
        for (p, px) in img.pixels().chunks_exact(3).enumerate() {
            for ch in 0..3 {
                data[(n * 3 + ch) * plane + p] = norm.apply(px[ch]);
            }
        }
    }
    Tensor::new(vec![images.len(), 3, h, w], data)
}

/// Argmax over the class axis of `[N, C, H, W]` logits, one label map per sample.
pub fn argmax_labels(logits: &Tensor) -> Result<Vec<LabelMap>> {
    let [n, c, h, w] = logits.dims4()?;
    let plane = h * w;
    let data = logits.data();
    (0..n)
        .map(|ni| {
            let base = ni * c * plane;
            let labels = (0..plane)
                .map(|p| {
                    let mut best = 0;
                    for k in 1..c {
                        if data[base + k * plane + p] > data[base + best * plane + p] {
                            best = k;
                        }
                    }
                    best as u8
                })
                .collect();
            LabelMap::new(w, h, labels)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::softmax_channels;

    #[test]
    fn default_param_count_matches_closed_form() {
        // encoder 3→16→32→64, decoder 64→32→16→16, head 16→12; 3×3 kernels.
        let hand = (16 * 3 * 9 + 16)
            + (32 * 16 * 9 + 32)
            + (64 * 32 * 9 + 64)
            + (32 * 64 * 9 + 32)
            + (16 * 32 * 9 + 16)
            + (16 * 16 * 9 + 16)
            + (12 * 16 + 12);
        assert_eq!(hand, 49_196);
        let net = Network::build(NetworkConfig::default(), 1).unwrap();
        assert_eq!(net.param_count(), hand);
        assert_eq!(net.config().param_count(), hand);
        assert_eq!(net.param_millions(), 0.05);
    }

    #[test]
    fn single_conv_count() {
        let layer = Layer::Conv(Conv2d {
            weights: Tensor::zeros(&[8, 3, 3, 3]),
            bias: Tensor::zeros(&[8]),
            stride: 1,
            padding: 1,
        });
        assert_eq!(param_count(&[layer]), 224);
        assert_eq!(param_count(&[]), 0);
    }

    #[test]
    fn build_is_deterministic() {
        let a = Network::build(NetworkConfig::default(), 7).unwrap();
        let b = Network::build(NetworkConfig::default(), 7).unwrap();
        assert_eq!(a, b);
        let c = Network::build(NetworkConfig::default(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_shape_and_geometry() {
        let net = Network::build(NetworkConfig::default(), 1).unwrap();
        let out = net.forward(&Tensor::zeros(&[1, 3, 32, 32])).unwrap();
        assert_eq!(out.shape(), &[1, 12, 32, 32]);
        let out = net.forward(&Tensor::zeros(&[2, 3, 16, 40])).unwrap();
        assert_eq!(out.shape(), &[2, 12, 16, 40]);
        let err = net.forward(&Tensor::zeros(&[1, 3, 20, 32])).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
        assert!(err.to_string().contains("multiples of 8"), "{err}");
    }

    fn zeroed(net: &mut Network) {
        for p in net.parameters_mut() {
            p.data_mut().fill(0.0);
        }
    }

    #[test]
    fn zero_network_is_uniform_and_predicts_class_zero() {
        let mut net = Network::build(NetworkConfig::default(), 3).unwrap();
        zeroed(&mut net);
        let logits = net.forward(&Tensor::full(&[1, 3, 16, 16], 0.7)).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        let probs = softmax_channels(&logits).unwrap();
        assert!(probs.data().iter().all(|&p| (p - 1.0 / 12.0).abs() < 1e-7));
        let img = Image::filled(16, 8, [30, 60, 90]);
        assert_eq!(net.predict(&img).unwrap(), LabelMap::filled(16, 8, 0));
    }

    #[test]
    fn first_layer_is_linear_without_bias() {
        let net = Network::build(NetworkConfig::default(), 4).unwrap();
        let Layer::Conv(c) = &net.layers()[0] else { panic!("first layer is a conv") };
        let x = Tensor::from_fn(&[1, 3, 8, 8], |i| ((i * 13) % 17) as f32 / 17.0);
        let y = conv2d_forward(&x, &c.weights, &c.bias, c.stride, c.padding).unwrap();
        let y2 = conv2d_forward(&x.scaled(2.0), &c.weights, &c.bias, c.stride, c.padding).unwrap();
        for (a, b) in y2.data().iter().zip(y.data()) {
            assert!((a - 2.0 * b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }

    #[test]
    fn predict_is_argmax_and_shift_invariant() {
        let net = Network::build(NetworkConfig::default(), 11).unwrap();
        let img = Image::new(16, 16, (0..768).map(|i| (i * 37 % 251) as u8).collect()).unwrap();
        let batch = images_to_batch(&[&img], Normalization::UnitRange).unwrap();
        let logits = net.forward(&batch).unwrap();
        let pred = net.predict(&img).unwrap();
        assert_eq!(argmax_labels(&logits).unwrap()[0], pred);

        let probs = softmax_channels(&logits).unwrap();
        assert_eq!(argmax_labels(&probs).unwrap()[0], pred);

        // Adding a per-pixel constant to every class score.
        let plane = 256;
        let mut shifted = logits.clone();
        for (i, v) in shifted.data_mut().iter_mut().enumerate() {
            *v += ((i % plane) as f32 * 0.37).sin() * 2.0;
        }
        assert_eq!(argmax_labels(&shifted).unwrap()[0], pred);
    }

    #[test]
    fn zero_head_gives_ln12_loss() {
        let cfg = NetworkConfig {
            zero_init_head: true,
            ..NetworkConfig::default()
        };
        let net = Network::build(cfg, 5).unwrap();
        let batch = Tensor::full(&[1, 3, 8, 8], 0.5);
        let loss = net.loss(&batch, &[3; 64]).unwrap();
        assert!((loss - 12f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn batch_rejects_mixed_sizes() {
        let a = Image::filled(8, 8, [0, 0, 0]);
        let b = Image::filled(8, 16, [0, 0, 0]);
        assert!(images_to_batch(&[&a, &b], Normalization::UnitRange).is_err());
        assert!(images_to_batch(&[], Normalization::UnitRange).is_err());
    }
}
