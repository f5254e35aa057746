//! Parameter update rules: SGD with momentum and Adam.
//!
//! Both rules are elementwise over a `(params, grads, state)` triple of
//! equally shaped tensors. [`Optimizer`] bundles one state per parameter
//! tensor for the training loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f32,
    pub momentum: f32,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-2,
            momentum: 0.0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum {} not in [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Parameter(format!("{name} = {b} not in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: &[usize], config: AdamConfig) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            config,
        }
    }
}

/// `v ← momentum·v + g; θ ← θ − lr·v`
pub fn sgd_step(
    params: &mut Tensor,
    grads: &Tensor,
    velocity: &mut Tensor,
    config: &SgdConfig,
) -> Result<()> {
    params.same_shape(grads, "sgd_step grads")?;
    params.same_shape(velocity, "sgd_step velocity")?;
    let (lr, mu) = (config.learning_rate, config.momentum);
    for ((p, &g), v) in params
        .data_mut()
        .iter_mut()
        .zip(grads.data())
        .zip(velocity.data_mut())
    {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// One bias-corrected Adam update; increments `state.t` by one.
pub fn adam_step(params: &mut Tensor, grads: &Tensor, state: &mut AdamState) -> Result<()> {
    params.same_shape(grads, "adam_step grads")?;
    params.same_shape(&state.m, "adam_step first moment")?;
    params.same_shape(&state.v, "adam_step second moment")?;
    state.t += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = state.config;
    let t = state.t as i32;
    let c1 = 1.0 - (b1 as f64).powi(t);
    let c2 = 1.0 - (b2 as f64).powi(t);
    let (m, v) = (state.m.data_mut(), state.v.data_mut());
    for (i, (p, &g)) in params.data_mut().iter_mut().zip(grads.data()).enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] as f64 / c1;
        let v_hat = v[i] as f64 / c2;
        *p -= (lr as f64 * m_hat / (v_hat.sqrt() + eps as f64)) as f32;
    }
    Ok(())
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f32) -> f32 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt() as f32;
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OptimizerKind {
    Sgd(SgdConfig),
    Adam(AdamConfig),
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerKind::Sgd(c) => c.validate(),
            OptimizerKind::Adam(c) => c.validate(),
        }
    }
}

/// Optimizer choice plus the optional global gradient-norm clip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub max_grad_norm: Option<f32>,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f32) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam(AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            }),
            max_grad_norm: None,
        }
    }

    pub fn sgd(learning_rate: f32, momentum: f32) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd(SgdConfig {
                learning_rate,
                momentum,
            }),
            max_grad_norm: None,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(AdamConfig::default().learning_rate)
    }
}

enum Slots {
    Sgd(SgdConfig, Vec<Tensor>),
    Adam(Vec<AdamState>),
}

/// Per-parameter optimizer state for a fixed list of parameter shapes.
pub struct Optimizer {
    slots: Slots,
    max_grad_norm: Option<f32>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, shapes: &[&[usize]]) -> Result<Self> {
        config.kind.validate()?;
        let slots = match config.kind {
            OptimizerKind::Sgd(c) => {
                Slots::Sgd(c, shapes.iter().map(|s| Tensor::zeros(s)).collect())
            }
            OptimizerKind::Adam(c) => {
                Slots::Adam(shapes.iter().map(|s| AdamState::new(s, c)).collect())
            }
        };
        Ok(Optimizer {
            slots,
            max_grad_norm: config.max_grad_norm,
        })
    }

    /// Applies one update to every `(param, grad)` pair, in order.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &mut [Tensor]) -> Result<()> {
        if let Some(max) = self.max_grad_norm {
            clip_grad_norm(grads, max);
        }
        let count = match &self.slots {
            Slots::Sgd(_, v) => v.len(),
            Slots::Adam(s) => s.len(),
        };
        if params.len() != count || grads.len() != count {
            return Err(Error::Dimension(format!(
                "optimizer holds {count} slots, got {} params and {} grads",
                params.len(),
                grads.len()
            )));
        }
        match &mut self.slots {
            Slots::Sgd(config, velocities) => {
                for ((p, g), v) in params.iter_mut().zip(grads.iter()).zip(velocities) {
                    sgd_step(p, g, v, config)?;
                }
            }
            Slots::Adam(states) => {
                for ((p, g), s) in params.iter_mut().zip(grads.iter()).zip(states) {
                    adam_step(p, g, s)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f32) -> Tensor {
        Tensor::full(&[1], v)
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut p = Tensor::from_fn(&[4], |i| i as f32);
        let before = p.clone();
        let mut v = Tensor::zeros(&[4]);
        sgd_step(&mut p, &Tensor::zeros(&[4]), &mut v, &SgdConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_single_step() {
        let mut p = scalar(1.0);
        let mut v = scalar(0.0);
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.0,
        };
        sgd_step(&mut p, &scalar(0.5), &mut v, &cfg).unwrap();
        assert!((p.data()[0] - 0.95).abs() < 1e-7);
    }

    #[test]
    fn sgd_momentum_iterates() {
        let mut p = scalar(0.0);
        let mut v = scalar(0.0);
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
        };
        sgd_step(&mut p, &scalar(1.0), &mut v, &cfg).unwrap();
        assert!((p.data()[0] + 0.1).abs() < 1e-7);
        sgd_step(&mut p, &scalar(1.0), &mut v, &cfg).unwrap();
        assert!((p.data()[0] + 0.29).abs() < 1e-6);
    }

    #[test]
    fn sgd_shape_mismatch() {
        let mut p = Tensor::zeros(&[2]);
        let mut v = Tensor::zeros(&[2]);
        let r = sgd_step(&mut p, &Tensor::zeros(&[3]), &mut v, &SgdConfig::default());
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = Tensor::from_fn(&[3], |i| i as f32 - 1.0);
        let before = p.clone();
        let mut s = AdamState::new(&[3], AdamConfig::default());
        adam_step(&mut p, &Tensor::zeros(&[3]), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&[1], AdamConfig::default());
        adam_step(&mut p, &scalar(1.0), &mut s).unwrap();
        assert!((p.data()[0] + 0.001).abs() < 1e-8);

        let mut p = Tensor::zeros(&[3]);
        let mut s = AdamState::new(&[3], AdamConfig::default());
        let g = Tensor::new(vec![3], vec![-4.0, 0.02, 7.5]).unwrap();
        adam_step(&mut p, &g, &mut s).unwrap();
        for (d, gv) in p.data().iter().zip(g.data()) {
            assert!((d + 1e-3 * gv.signum()).abs() < 1e-7, "{d} for g = {gv}");
        }
    }

    #[test]
    fn adam_first_step_scale_invariant() {
        let g = Tensor::new(vec![2], vec![0.3, -0.05]).unwrap();
        let run = |grad: &Tensor| {
            let mut p = Tensor::zeros(&[2]);
            let mut s = AdamState::new(&[2], AdamConfig::default());
            adam_step(&mut p, grad, &mut s).unwrap();
            p
        };
        let (a, b) = (run(&g), run(&g.scaled(1000.0)));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-3 * y.abs());
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut grads = vec![Tensor::full(&[2], 3.0), Tensor::full(&[1], 4.0)];
        let before = clip_grad_norm(&mut grads, 1.0);
        assert!((before - 34f32.sqrt()).abs() < 1e-5);
        let after: f32 = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum();
        assert!((after.sqrt() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig {
            learning_rate: 0.0,
            momentum: 0.0
        }
        .validate()
        .is_err());
        assert!(SgdConfig {
            learning_rate: 0.1,
            momentum: 1.0
        }
        .validate()
        .is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn updates_are_elementwise(
            values in proptest::collection::vec((-5.0f32..5.0, -5.0f32..5.0), 2..12),
            rotate in 0usize..12,
        ) {
            let n = values.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rotate) % n).collect();
            let params = Tensor::new(vec![n], values.iter().map(|v| v.0).collect()).unwrap();
            let grads = Tensor::new(vec![n], values.iter().map(|v| v.1).collect()).unwrap();
            let permute = |t: &Tensor| {
                Tensor::new(vec![n], perm.iter().map(|&i| t.data()[i]).collect()).unwrap()
            };

            let mut p1 = params.clone();
            let mut s1 = AdamState::new(&[n], AdamConfig::default());
            adam_step(&mut p1, &grads, &mut s1).unwrap();
            adam_step(&mut p1, &grads, &mut s1).unwrap();
            let mut p2 = permute(&params);
            let mut s2 = AdamState::new(&[n], AdamConfig::default());
            adam_step(&mut p2, &permute(&grads), &mut s2).unwrap();
            adam_step(&mut p2, &permute(&grads), &mut s2).unwrap();
            prop_assert_eq!(permute(&p1), p2);

            let cfg = SgdConfig { learning_rate: 0.05, momentum: 0.5 };
            let mut q1 = params.clone();
            let mut v1 = Tensor::zeros(&[n]);
            sgd_step(&mut q1, &grads, &mut v1, &cfg).unwrap();
            let mut q2 = permute(&params);
            let mut v2 = Tensor::zeros(&[n]);
            sgd_step(&mut q2, &permute(&grads), &mut v2, &cfg).unwrap();
            prop_assert_eq!(permute(&q1), q2);
        }

        #[test]
        fn adam_is_deterministic(g in proptest::collection::vec(-10.0f32..10.0, 1..8)) {
            let n = g.len();
            let grads = Tensor::new(vec![n], g).unwrap();
            let run = || {
                let mut p = Tensor::full(&[n], 0.5);
                let mut s = AdamState::new(&[n], AdamConfig::default());
                for _ in 0..3 {
                    adam_step(&mut p, &grads, &mut s).unwrap();
                }
                (p, s)
            };
            let (a, sa) = run();
            let (b, sb) = run();
            prop_assert_eq!(a, b);
            prop_assert_eq!(&sa, &sb);
            prop_assert!(sa.v.data().iter().all(|&v| v >= 0.0));
        }
    }
}
