use super::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_ALPHA: f32 = 0.01;

fn check_alpha(alpha: f32) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("leaky ReLU slope {alpha} not in (0, 1)")));
    }
    Ok(())
}

/// `x` for `x ≥ 0`, `alpha·x` otherwise.
pub fn leaky_relu(input: &Tensor, alpha: f32) -> Result<Tensor> {
    check_alpha(alpha)?;
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= alpha;
        }
    }
    Ok(out)
}

/// Gradient of [`leaky_relu`]; the slope at exactly zero is taken as 1.
pub fn leaky_relu_backward(input: &Tensor, grad_output: &Tensor, alpha: f32) -> Result<Tensor> {
    check_alpha(alpha)?;
    input.same_shape(grad_output, "leaky_relu_backward")?;
    let mut grad = grad_output.clone();
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if x < 0.0 {
            *g *= alpha;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f32) -> Tensor {
        Tensor::full(&[1], v)
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(leaky_relu(&scalar(5.0), 0.01).unwrap().data(), &[5.0]);
        assert_eq!(leaky_relu(&scalar(0.0), 0.01).unwrap().data(), &[0.0]);
        let neg = leaky_relu(&scalar(-10.0), 0.01).unwrap().data()[0];
        assert!((neg + 0.1).abs() < 1e-7);
    }

    #[test]
    fn slope_at_zero_is_one() {
        let g = leaky_relu_backward(&scalar(0.0), &scalar(3.0), 0.2).unwrap();
        assert_eq!(g.data(), &[3.0]);
        let g = leaky_relu_backward(&scalar(-1.0), &scalar(3.0), 0.2).unwrap();
        assert!((g.data()[0] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(leaky_relu(&scalar(1.0), 0.0).is_err());
        assert!(leaky_relu(&scalar(1.0), 1.0).is_err());
        assert!(leaky_relu(&scalar(1.0), f32::NAN).is_err());
    }
}
