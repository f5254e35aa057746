//! 2-D cross-correlation over `[N, C, H, W]` tensors.

use super::Tensor;
use crate::error::{Error, Result};

/// Gradients of [`conv2d_forward`] with respect to each of its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Output length along one spatial axis.
///
/// The windows must cover every real input row. When `(len + 2·padding − kernel)`
/// is not a multiple of `stride`, the leftover rows are allowed only if they
/// fall entirely in the trailing zero padding; otherwise real data would be
/// silently skipped and a geometry error is returned.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be at least 1".into()));
    }
    let padded = len + 2 * padding;
    if padded < kernel {
        return Err(Error::Geometry(format!(
            "kernel {kernel} larger than padded extent {padded}"
        )));
    }
    let span = padded - kernel;
    let remainder = span % stride;
    if remainder > padding {
        return Err(Error::Geometry(format!(
            "extent {len} with kernel {kernel}, stride {stride}, padding {padding} \
             leaves {remainder} input rows uncovered"
        )));
    }
    Ok(span / stride + 1)
}

struct Geometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn new(input: &Tensor, weights: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        let [n, cin, h, w] = input.dims4()?;
        let [cout, wcin, kh, kw] = weights.dims4()?;
        if wcin != cin {
            return Err(Error::Dimension(format!(
                "weights expect {wcin} input channels, input has {cin}"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Parameter(format!("kernel {kh}x{kw} must be odd-sized")));
        }
        let oh = conv_output_len(h, kh, stride, padding)?;
        let ow = conv_output_len(w, kw, stride, padding)?;
        Ok(Geometry {
            n,
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            oh,
            ow,
            stride,
            padding,
        })
    }

    /// Output indices along an axis whose tap `k` lands inside `[0, len)`.
    fn valid_range(&self, k: usize, len: usize, out_len: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        // in = out·s + k − p must satisfy 0 ≤ in < len
        let lo = if p > k { (p - k).div_ceil(s) } else { 0 };
        let hi = if len + p > k {
            ((len - 1 + p - k) / s + 1).min(out_len)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    fn input_index(&self, out: usize, k: usize) -> usize {
        out * self.stride + k - self.padding
    }
}

/// `out[n,co,y,x] = bias[co] + Σ input[n,ci,y·s−p+dy, x·s−p+dx] · weights[co,ci,dy,dx]`
/// with zeros outside the input.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = Geometry::new(input, weights, stride, padding)?;
    if bias.shape() != [g.cout] {
        return Err(Error::Dimension(format!(
            "bias shape {:?}, expected [{}]",
            bias.shape(),
            g.cout
        )));
    }
    let mut out = Tensor::zeros(&[g.n, g.cout, g.oh, g.ow]);
    let (x, wt, b) = (input.data(), weights.data(), bias.data());
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let o = out.data_mut();

    for n in 0..g.n {
        for co in 0..g.cout {
            let dst = &mut o[(n * g.cout + co) * plane_out..][..plane_out];
            dst.fill(b[co]);
            for ci in 0..g.cin {
                let src = &x[(n * g.cin + ci) * plane_in..][..plane_in];
                let kernel = &wt[(co * g.cin + ci) * g.kh * g.kw..][..g.kh * g.kw];
                for ky in 0..g.kh {
                    let (y0, y1) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..g.kw {
                        let wv = kernel[ky * g.kw + kx];
                        let (x0, x1) = g.valid_range(kx, g.w, g.ow);
                        for oy in y0..y1 {
                            let row = &src[g.input_index(oy, ky) * g.w..][..g.w];
                            let out_row = &mut dst[oy * g.ow..][..g.ow];
                            for ox in x0..x1 {
                                out_row[ox] += wv * row[g.input_index(ox, kx)];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact gradients of [`conv2d_forward`] given the upstream gradient.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_output: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads> {
    let g = Geometry::new(input, weights, stride, padding)?;
    if grad_output.shape() != [g.n, g.cout, g.oh, g.ow] {
        return Err(Error::Dimension(format!(
            "grad_output shape {:?}, expected {:?}",
            grad_output.shape(),
            [g.n, g.cout, g.oh, g.ow]
        )));
    }
    let mut grad_in = Tensor::zeros(input.shape());
    let mut grad_w = Tensor::zeros(weights.shape());
    let mut grad_b = Tensor::zeros(&[g.cout]);
    let (x, wt, go) = (input.data(), weights.data(), grad_output.data());
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let ksize = g.kh * g.kw;

    for n in 0..g.n {
        for co in 0..g.cout {
            let gplane = &go[(n * g.cout + co) * plane_out..][..plane_out];
            grad_b.data_mut()[co] += gplane.iter().map(|&v| v as f64).sum::<f64>() as f32;
            for ci in 0..g.cin {
                let src = &x[(n * g.cin + ci) * plane_in..][..plane_in];
                let gsrc = &mut grad_in.data_mut()[(n * g.cin + ci) * plane_in..][..plane_in];
                let kbase = (co * g.cin + ci) * ksize;
                for ky in 0..g.kh {
                    let (y0, y1) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..g.kw {
                        let (x0, x1) = g.valid_range(kx, g.w, g.ow);
                        let wv = wt[kbase + ky * g.kw + kx];
                        let mut acc = 0.0f32;
                        for oy in y0..y1 {
                            let iy = g.input_index(oy, ky);
                            let grow = &gplane[oy * g.ow..][..g.ow];
                            let row = &src[iy * g.w..][..g.w];
                            let grad_row = &mut gsrc[iy * g.w..][..g.w];
                            for ox in x0..x1 {
                                let ix = g.input_index(ox, kx);
                                acc += grow[ox] * row[ix];
                                grad_row[ix] += wv * grow[ox];
                            }
                        }
                        grad_w.data_mut()[kbase + ky * g.kw + kx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: grad_in,
        weights: grad_w,
        bias: grad_b,
    })
}
