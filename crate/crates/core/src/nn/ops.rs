//! Forward and backward kernels for each layer kind.

use super::Tensor;
use crate::error::{Error, Result};

/// `c = a·b + beta·c` for row-major `a: m×k` (or its transpose when
/// `trans_a`, stored `k×m`) and `b: k×n` (or `n×k` when `trans_b`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    trans_a: bool,
    b: &[f32],
    trans_b: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Output extent of a sliding window, rejecting non-integral results.
pub(crate) fn window_out(
    layer: &str,
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<usize> {
    let span = input + 2 * pad;
    if stride == 0 || kernel == 0 || span < kernel || (span - kernel) % stride != 0 {
        return Err(Error::shape(
            layer,
            format!(
                "window {kernel} stride {stride} pad {pad} does not tile an extent of {input}"
            ),
        ));
    }
    Ok((span - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(
        input: [usize; 3],
        kernel: [usize; 2],
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        let [c_in, h, w] = input;
        let [kh, kw] = kernel;
        Ok(Self {
            c_in,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            out_h: window_out("conv2d", h, kh, stride, pad)?,
            out_w: window_out("conv2d", w, kw, stride, pad)?,
        })
    }

    fn rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn im2col(&self, input: &[f32]) -> Vec<f32> {
        let cols = self.cols();
        let mut out = vec![0f32; self.rows() * cols];
        for c in 0..self.c_in {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut out[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let src_row = &input[(c * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[oy * self.out_w + ox] = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn col2im(&self, cols_data: &[f32]) -> Vec<f32> {
        let cols = self.cols();
        let mut out = vec![0f32; self.c_in * self.h * self.w];
        for c in 0..self.c_in {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols_data[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let base = (c * self.h + iy as usize) * self.w;
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                out[base + ix as usize] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn conv_check(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<([usize; 3], usize, [usize; 2])> {
    let chw = input.chw("conv2d")?;
    let [c_out, c_in, kh, kw] = match weight.shape()[..] {
        [a, b, c, d] => [a, b, c, d],
        _ => {
            return Err(Error::shape(
                "conv2d",
                format!("weights must be [C_out, C_in, kH, kW], got {:?}", weight.shape()),
            ))
        }
    };
    if c_in != chw[0] {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, weights expect {c_in}", chw[0]),
        ));
    }
    if bias.shape() != [c_out] {
        return Err(Error::shape(
            "conv2d",
            format!("bias must be [{c_out}], got {:?}", bias.shape()),
        ));
    }
    Ok((chw, c_out, [kh, kw]))
}

/// Cross-correlation plus bias. Returns the output and the im2col matrix
/// for reuse by the backward pass.
pub(crate) fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Vec<f32>, ConvGeometry)> {
    let (chw, c_out, kernel) = conv_check(input, weight, bias)?;
    let g = ConvGeometry::new(chw, kernel, stride, pad)?;
    let cols = g.im2col(input.data());
    let n = g.cols();
    let mut out = vec![0f32; c_out * n];
    for (row, &b) in out.chunks_exact_mut(n).zip(bias.data()) {
        row.fill(b);
    }
    gemm(c_out, g.rows(), n, weight.data(), false, &cols, false, 1.0, &mut out);
    Ok((Tensor::new(vec![c_out, g.out_h, g.out_w], out)?, cols, g))
}

/// 2-D convolution (cross-correlation) of a `[C_in, H, W]` input.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    conv2d_forward(input, weight, bias, stride, pad).map(|(t, _, _)| t)
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
pub(crate) fn conv2d_backward_cols(
    g: &ConvGeometry,
    cols: &[f32],
    weight: &[f32],
    grad_out: &[f32],
    grad_weight: &mut [f32],
    grad_bias: &mut [f32],
    need_input: bool,
) -> Option<Vec<f32>> {
    let c_out = grad_bias.len();
    let n = g.cols();
    let k = g.rows();
    gemm(c_out, n, k, grad_out, false, cols, true, 1.0, grad_weight);
    for (gb, row) in grad_bias.iter_mut().zip(grad_out.chunks_exact(n)) {
        *gb += row.iter().sum::<f32>();
    }
    need_input.then(|| {
        let mut dcols = vec![0f32; k * n];
        gemm(k, c_out, n, weight, true, grad_out, false, 0.0, &mut dcols);
        g.col2im(&dcols)
    })
}

/// Gradients of [`conv2d`]: `(d_input, d_weight, d_bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (out, cols, g) = conv2d_forward(input, weight, bias, stride, pad)?;
    if grad_out.shape() != out.shape() {
        return Err(Error::shape("conv2d", "upstream gradient shape mismatch"));
    }
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(bias.shape());
    let dx = conv2d_backward_cols(
        &g,
        &cols,
        weight.data(),
        grad_out.data(),
        dw.data_mut(),
        db.data_mut(),
        true,
    )
    .expect("input gradient requested");
    Ok((Tensor::new(input.shape().to_vec(), dx)?, dw, db))
}

/// Channelwise max pooling. Returns the output and, per output element, the
/// flat input index of its maximum (first occurrence on ties).
pub(crate) fn maxpool2d_forward(
    input: &Tensor,
    size: usize,
    stride: usize,
) -> Result<(Tensor, Vec<usize>)> {
    let [c, h, w] = input.chw("maxpool2d")?;
    let oh = window_out("maxpool2d", h, size, stride, 0)?;
    let ow = window_out("maxpool2d", w, size, stride, 0)?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = usize::MAX;
                let mut best_v = f32::NEG_INFINITY;
                for dy in 0..size {
                    let row = (ch * h + oy * stride + dy) * w + ox * stride;
                    for (dx, &v) in x[row..row + size].iter().enumerate() {
                        if best == usize::MAX || v > best_v {
                            best = row + dx;
                            best_v = v;
                        }
                    }
                }
                out.push(best_v);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out)?, arg))
}

pub fn maxpool2d(input: &Tensor, size: usize, stride: usize) -> Result<Tensor> {
    maxpool2d_forward(input, size, stride).map(|(t, _)| t)
}

pub(crate) fn maxpool2d_backward_arg(input_len: usize, argmax: &[usize], grad_out: &[f32]) -> Vec<f32> {
    let mut dx = vec![0f32; input_len];
    for (&i, &g) in argmax.iter().zip(grad_out) {
        dx[i] += g;
    }
    dx
}

/// Routes each upstream gradient to the position of its window maximum.
pub fn maxpool2d_backward(
    input: &Tensor,
    size: usize,
    stride: usize,
    grad_out: &Tensor,
) -> Result<Tensor> {
    let (out, arg) = maxpool2d_forward(input, size, stride)?;
    if out.shape() != grad_out.shape() {
        return Err(Error::shape("maxpool2d", "upstream gradient shape mismatch"));
    }
    Tensor::new(
        input.shape().to_vec(),
        maxpool2d_backward_arg(input.len(), &arg, grad_out.data()),
    )
}

pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    let data = input
        .data()
        .iter()
        .map(|&x| if x >= 0.0 { x } else { slope * x })
        .collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

pub fn leaky_relu_backward(input: &Tensor, slope: f32, grad_out: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x >= 0.0 { g } else { slope * g })
        .collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

/// `y = W·x + b` for `x: [N]`, `W: [M, N]`, `b: [M]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = match weight.shape()[..] {
        [m, n] => (m, n),
        _ => return Err(Error::shape("linear", format!("weights must be [M, N], got {:?}", weight.shape()))),
    };
    if input.len() != n || bias.shape() != [m] {
        return Err(Error::shape(
            "linear",
            format!(
                "input of {} values, weights {:?}, bias {:?} disagree",
                input.len(),
                weight.shape(),
                bias.shape()
            ),
        ));
    }
    let x = input.data();
    let out = weight
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f32>() + b)
        .collect();
    Tensor::new(vec![m], out)
}

/// Accumulates `dW += dy ⊗ x`, `db += dy`; returns `dx = Wᵀ·dy` when asked.
pub(crate) fn linear_backward_acc(
    x: &[f32],
    weight: &[f32],
    grad_out: &[f32],
    grad_weight: &mut [f32],
    grad_bias: &mut [f32],
    need_input: bool,
) -> Option<Vec<f32>> {
    let n = x.len();
    for ((gw_row, gb), &g) in grad_weight.chunks_exact_mut(n).zip(grad_bias.iter_mut()).zip(grad_out) {
        *gb += g;
        if g != 0.0 {
            for (gw, &xi) in gw_row.iter_mut().zip(x) {
                *gw += g * xi;
            }
        }
    }
    need_input.then(|| {
        let mut dx = vec![0f32; n];
        for (row, &g) in weight.chunks_exact(n).zip(grad_out) {
            if g != 0.0 {
                for (d, &w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
        dx
    })
}

/// Gradients of [`linear`]: `(d_input, d_weight, d_bias)`.
pub fn linear_backward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let y = linear(input, weight, bias)?;
    if y.shape() != grad_out.shape() {
        return Err(Error::shape("linear", "upstream gradient shape mismatch"));
    }
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(bias.shape());
    let dx = linear_backward_acc(input.data(), weight.data(), grad_out.data(), dw.data_mut(), db.data_mut(), true)
        .expect("input gradient requested");
    Ok((Tensor::new(input.shape().to_vec(), dx)?, dw, db))
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&x| sigmoid_scalar(x)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| g * y * (1.0 - y))
        .collect();
    Tensor::new(output.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn sigmoid_scalar(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn unit_kernel_is_identity() {
        let x = t(&[2, 3, 3], &(0..18).map(|v| v as f32).collect::<Vec<_>>());
        let w = t(&[2, 2, 1, 1], &[1.0, 0.0, 0.0, 1.0]);
        let b = Tensor::zeros(&[2]);
        assert_eq!(conv2d(&x, &w, &b, 1, 0).unwrap(), x);
    }

    #[test]
    fn conv_shape_arithmetic() {
        let x = Tensor::zeros(&[3, 64, 64]);
        let w = Tensor::zeros(&[16, 3, 3, 3]);
        let y = conv2d(&x, &w, &Tensor::zeros(&[16]), 1, 1).unwrap();
        assert_eq!(y.shape(), &[16, 64, 64]);
    }

    #[test]
    fn hand_convolution() {
        let x = t(&[1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let w = t(&[1, 1, 2, 2], &[1.0; 4]);
        let y = conv2d(&x, &w, &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y.data(), &[12., 16., 24., 28.]);
    }

    #[test]
    fn conv_rejects_non_integral_output() {
        let x = Tensor::zeros(&[1, 4, 4]);
        let w = Tensor::zeros(&[1, 1, 3, 3]);
        match conv2d(&x, &w, &Tensor::zeros(&[1]), 2, 0) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, "conv2d"),
            other => panic!("{other:?}"),
        }
        let w = Tensor::zeros(&[1, 2, 3, 3]);
        assert!(conv2d(&x, &w, &Tensor::zeros(&[1]), 1, 0).is_err());
    }

    #[test]
    fn pool_hand_max() {
        let x = t(&[1, 4, 4], &(1..=16).map(|v| v as f32).collect::<Vec<_>>());
        assert_eq!(maxpool2d(&x, 2, 2).unwrap().data(), &[6., 8., 14., 16.]);
        assert_eq!(maxpool2d(&x, 1, 1).unwrap(), x);
        let c = t(&[2, 4, 4], &[3.5; 32]);
        assert!(maxpool2d(&c, 2, 2).unwrap().data().iter().all(|&v| v == 3.5));
        assert!(maxpool2d(&Tensor::zeros(&[1, 5, 5]), 2, 2).is_err());
    }

    #[test]
    fn pool_ties_route_to_first() {
        let x = t(&[1, 2, 2], &[1.0; 4]);
        let g = maxpool2d_backward(&x, 2, 2, &t(&[1, 1, 1], &[5.0])).unwrap();
        assert_eq!(g.data(), &[5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn leaky_values() {
        let y = leaky_relu(&Tensor::from_vec(vec![5.0, -10.0, 0.0]), 0.1);
        assert_eq!(y.data(), &[5.0, -1.0, 0.0]);
    }

    #[test]
    fn linear_values() {
        let w = t(&[2, 2], &[1., 2., 3., 4.]);
        let y = linear(&Tensor::from_vec(vec![1.0, 1.0]), &w, &Tensor::from_vec(vec![0.5, -0.5])).unwrap();
        assert_eq!(y.data(), &[3.5, 6.5]);
        let eye = t(&[2, 2], &[1., 0., 0., 1.]);
        let x = Tensor::from_vec(vec![0.25, -4.0]);
        assert_eq!(linear(&x, &eye, &Tensor::zeros(&[2])).unwrap(), x);
        let b = Tensor::from_vec(vec![7.0, 8.0]);
        assert_eq!(linear(&x, &Tensor::zeros(&[2, 2]), &b).unwrap(), b);
        assert!(linear(&Tensor::from_vec(vec![1.0; 3]), &w, &b).is_err());
    }

    #[test]
    fn linear_square_loss_gradient() {
        // y = 1·3 + 0 → L = y², dL/dy = 6, dL/dw = 6·x = 18, dL/dx = 6·w = 6
        let x = Tensor::from_vec(vec![3.0]);
        let w = t(&[1, 1], &[1.0]);
        let b = Tensor::zeros(&[1]);
        let y = linear(&x, &w, &b).unwrap();
        let up = Tensor::from_vec(vec![2.0 * y.data()[0]]);
        let (dx, dw, db) = linear_backward(&x, &w, &b, &up).unwrap();
        assert_eq!(dx.data(), &[6.0]);
        assert_eq!(dw.data(), &[18.0]);
        assert_eq!(db.data(), &[6.0]);
    }
}
