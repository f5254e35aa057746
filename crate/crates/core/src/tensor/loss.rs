//! Softmax over class scores and the per-pixel cross-entropy loss against
//! one-hot targets.

use super::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Normalised class distribution at one position.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    values: Vec<f32>,
}

impl ProbVector {
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

/// Ground-truth class at one position, expandable to its one-hot vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHotTarget {
    class_index: usize,
    num_classes: usize,
}

impl OneHotTarget {
    pub fn new(class_index: usize, num_classes: usize) -> Result<Self> {
        if class_index >= num_classes {
            return Err(Error::Label(format!(
                "class {class_index} out of range for {num_classes} classes"
            )));
        }
        Ok(OneHotTarget {
            class_index,
            num_classes,
        })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn expand(&self) -> Vec<f32> {
        (0..self.num_classes)
            .map(|x| if x == self.class_index { 1.0 } else { 0.0 })
            .collect()
    }
}

pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax_into(logits: &[f32], out: &mut [f32]) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut total = 0.0f64;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = ((z - max) as f64).exp();
        *o = e as f32;
        total += e;
    }
    for o in out.iter_mut() {
        *o = (*o as f64 / total) as f32;
    }
}

/// Max-shifted softmax of a single score vector.
pub fn softmax(logits: &[f32]) -> Result<ProbVector> {
    if logits.len() < 2 {
        return Err(Error::Parameter(format!(
            "softmax needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("softmax input contains {bad}")));
    }
    let mut values = vec![0.0; logits.len()];
    softmax_into(logits, &mut values);
    Ok(ProbVector { values })
}

/// Softmax along the channel axis of an `[N, C, H, W]` tensor.
pub fn softmax_channels(logits: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = logits.dims4()?;
    if c < 2 {
        return Err(Error::Parameter(format!("softmax needs at least 2 classes, got {c}")));
    }
    if !logits.all_finite() {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let plane = h * w;
    let mut out = Tensor::zeros(logits.shape());
    let (src, dst) = (logits.data(), out.data_mut());
    let mut scores = vec![0.0f32; c];
    let mut probs = vec![0.0f32; c];
    for ni in 0..n {
        let base = ni * c * plane;
        for p in 0..plane {
            for (k, s) in scores.iter_mut().enumerate() {
                *s = src[base + k * plane + p];
            }
            softmax_into(&scores, &mut probs);
            for (k, &v) in probs.iter().enumerate() {
                dst[base + k * plane + p] = v;
            }
        }
    }
    Ok(out)
}

fn check_targets(shape: [usize; 4], targets: &[u8]) -> Result<()> {
    let [n, c, h, w] = shape;
    if targets.len() != n * h * w {
        return Err(Error::Dimension(format!(
            "{} targets for {n}x{h}x{w} positions",
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= c) {
        return Err(Error::Label(format!("target class {t} out of range for {c} classes")));
    }
    Ok(())
}

/// Mean over all `N·H·W` positions of `−ln P[target]`, given probabilities
/// laid out as `[N, C, H, W]` and targets as `[N, H, W]`.
pub fn cross_entropy(probs: &Tensor, targets: &[u8]) -> Result<f64> {
    let shape = probs.dims4()?;
    check_targets(shape, targets)?;
    let [_, c, h, w] = shape;
    let plane = h * w;
    let p = probs.data();
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (ni, pos) = (i / plane, i % plane);
            let v = p[(ni * c + t as usize) * plane + pos] as f64;
            -v.max(PROB_FLOOR).ln()
        })
        .sum();
    Ok(total / targets.len() as f64)
}

/// Softmax followed by mean cross-entropy, returning the loss and its
/// gradient with respect to the logits, `(P − P*) / M` for `M` positions.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[u8]) -> Result<(f64, Tensor)> {
    let shape = logits.dims4()?;
    check_targets(shape, targets)?;
    let probs = softmax_channels(logits)?;
    let loss = cross_entropy(&probs, targets)?;
    let [_, c, h, w] = shape;
    let plane = h * w;
    let scale = 1.0 / targets.len() as f32;
    let mut grad = probs;
    let g = grad.data_mut();
    for (i, &t) in targets.iter().enumerate() {
        let (ni, pos) = (i / plane, i % plane);
        g[(ni * c + t as usize) * plane + pos] -= 1.0;
    }
    for v in g.iter_mut() {
        *v *= scale;
    }
    Ok((loss, grad))
}
