use super::Tensor;
use crate::error::{Error, Result};

fn check_factor(factor: usize) -> Result<()> {
    if factor < 1 {
        return Err(Error::Parameter("upsample factor must be at least 1".into()));
    }
    Ok(())
}

/// Nearest-neighbour upsampling: `out[n,c,y,x] = in[n,c,y/f,x/f]`.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Result<Tensor> {
    check_factor(factor)?;
    let [n, c, h, w] = input.dims4()?;
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let src = input.data();
    for (plane, dst) in out.data_mut().chunks_exact_mut(oh * ow).enumerate() {
        let sp = &src[plane * h * w..][..h * w];
        for y in 0..oh {
            let srow = &sp[(y / factor) * w..][..w];
            for (x, d) in dst[y * ow..][..ow].iter_mut().enumerate() {
                *d = srow[x / factor];
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`upsample_nearest`]: each input cell receives the sum of the
/// gradients of its `factor²` replicas.
pub fn upsample_nearest_backward(grad_output: &Tensor, factor: usize) -> Result<Tensor> {
    check_factor(factor)?;
    let [n, c, oh, ow] = grad_output.dims4()?;
    if oh % factor != 0 || ow % factor != 0 {
        return Err(Error::Geometry(format!(
            "gradient {oh}x{ow} is not a multiple of upsample factor {factor}"
        )));
    }
    let (h, w) = (oh / factor, ow / factor);
    let mut grad = Tensor::zeros(&[n, c, h, w]);
    let src = grad_output.data();
    for (plane, dst) in grad.data_mut().chunks_exact_mut(h * w).enumerate() {
        let sp = &src[plane * oh * ow..][..oh * ow];
        for y in 0..oh {
            let drow = &mut dst[(y / factor) * w..][..w];
            for (x, &g) in sp[y * ow..][..ow].iter().enumerate() {
                drow[x / factor] += g;
            }
        }
    }
    Ok(grad)
}
