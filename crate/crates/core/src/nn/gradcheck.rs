//! Central finite-difference gradient checking.
//!
//! Each checked coordinate is nudged by ±[`FD_EPSILON`] in f32, the scalar
//! objective is re-evaluated (accumulated in f64), and the slope is compared
//! with the analytic gradient using `|a − n| / max(1, |a|, |n|)`.

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::ops;
use super::{Network, Tensor};
use crate::error::Result;
use crate::rng;

pub const FD_EPSILON: f32 = 1e-3;
pub const FD_TOLERANCE: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Outcome of one gradient-check case across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheck {
    pub case: String,
    pub seeds: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= FD_TOLERANCE
    }

    pub(crate) fn merge(case: &str, errors: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut out = GradCheck {
            case: case.to_string(),
            seeds: 0,
            coordinates: 0,
            max_rel_error: 0.0,
        };
        for (n, e) in errors {
            out.seeds += 1;
            out.coordinates += n;
            out.max_rel_error = out.max_rel_error.max(e);
        }
        out
    }
}

/// Largest relative error between `analytic` and the central difference of
/// `objective` around `point`, over every coordinate.
pub fn max_fd_error(
    mut objective: impl FnMut(&[f32]) -> f64,
    point: &[f32],
    analytic: &[f32],
) -> f64 {
    assert_eq!(point.len(), analytic.len());
    let mut x = point.to_vec();
    let mut worst = 0f64;
    for i in 0..x.len() {
        let orig = x[i];
        let hi = orig + FD_EPSILON;
        let lo = orig - FD_EPSILON;
        x[i] = hi;
        let f_hi = objective(&x);
        x[i] = lo;
        let f_lo = objective(&x);
        x[i] = orig;
        let numeric = (f_hi - f_lo) / (hi as f64 - lo as f64);
        worst = worst.max(relative_error(analytic[i] as f64, numeric));
    }
    worst
}

fn random_vec(rng: &mut rng::Rng, n: usize, scale: f32) -> Vec<f32> {
    let d = Uniform::new_inclusive(-scale, scale).expect("finite");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Values bounded away from zero, so leaky kinks are never straddled.
fn away_from_zero(rng: &mut rng::Rng, n: usize) -> Vec<f32> {
    let mag = Uniform::new_inclusive(0.05f32, 1.0).expect("finite");
    (0..n)
        .map(|_| {
            let v = mag.sample(rng);
            if rand::Rng::random::<bool>(rng) {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Distinct values on a 0.01 lattice, so pooling argmaxes are stable.
fn distinct_values(rng: &mut rng::Rng, n: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..n).map(|i| i as f32 * 0.01 - 0.005 * n as f32).collect();
    v.shuffle(rng);
    v
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn t(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Conv2d gradients w.r.t. input, weights and bias. Returns (coordinates, error).
pub fn check_conv2d(seed: u64, stride: usize, pad: usize) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let c_in = 1 + (seed % 2) as usize;
    let c_out = 2 + (seed % 3) as usize;
    let k = 3;
    // extent chosen so that the window tiles exactly for the given stride
    let hw = k - 2 * pad + 2 * stride * (1 + (seed % 2) as usize);
    let (in_shape, w_shape) = ([c_in, hw, hw], [c_out, c_in, k, k]);
    let x = random_vec(&mut r, in_shape.iter().product(), 1.0);
    let w = random_vec(&mut r, w_shape.iter().product(), 0.5);
    let b = random_vec(&mut r, c_out, 0.5);
    let y = ops::conv2d(&t(&in_shape, x.clone()), &t(&w_shape, w.clone()), &t(&[c_out], b.clone()), stride, pad)?;
    let up = random_vec(&mut r, y.len(), 1.0);
    let out_shape = y.shape().to_vec();
    let (dx, dw, db) = ops::conv2d_backward(
        &t(&in_shape, x.clone()),
        &t(&w_shape, w.clone()),
        &t(&[c_out], b.clone()),
        stride,
        pad,
        &t(&out_shape, up.clone()),
    )?;
    let eval = |x: &[f32], w: &[f32], b: &[f32]| {
        let y = ops::conv2d(&t(&in_shape, x.to_vec()), &t(&w_shape, w.to_vec()), &t(&[c_out], b.to_vec()), stride, pad)
            .expect("shapes fixed");
        dot(y.data(), &up)
    };
    let e = max_fd_error(|p| eval(p, &w, &b), &x, dx.data())
        .max(max_fd_error(|p| eval(&x, p, &b), &w, dw.data()))
        .max(max_fd_error(|p| eval(&x, &w, p), &b, db.data()));
    Ok((x.len() + w.len() + b.len(), e))
}

pub fn check_maxpool2d(seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let c = 1 + (seed % 3) as usize;
    let shape = [c, 4, 6];
    let x = distinct_values(&mut r, shape.iter().product());
    let y = ops::maxpool2d(&t(&shape, x.clone()), 2, 2)?;
    let up = random_vec(&mut r, y.len(), 1.0);
    let dx = ops::maxpool2d_backward(&t(&shape, x.clone()), 2, 2, &t(y.shape(), up.clone()))?;
    let e = max_fd_error(
        |p| dot(ops::maxpool2d(&t(&shape, p.to_vec()), 2, 2).expect("fixed").data(), &up),
        &x,
        dx.data(),
    );
    Ok((x.len(), e))
}

pub fn check_leaky_relu(seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let n = 8 + (seed % 9) as usize;
    let slope = 0.1;
    let x = away_from_zero(&mut r, n);
    let up = random_vec(&mut r, n, 1.0);
    let dx = ops::leaky_relu_backward(&t(&[n], x.clone()), slope, &t(&[n], up.clone()));
    let e = max_fd_error(|p| dot(ops::leaky_relu(&t(&[n], p.to_vec()), slope).data(), &up), &x, dx.data());
    Ok((n, e))
}

pub fn check_linear(seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let (m, n) = (2 + (seed % 4) as usize, 3 + (seed % 5) as usize);
    let x = random_vec(&mut r, n, 1.0);
    let w = random_vec(&mut r, m * n, 1.0);
    let b = random_vec(&mut r, m, 1.0);
    let up = random_vec(&mut r, m, 1.0);
    let (dx, dw, db) = ops::linear_backward(&t(&[n], x.clone()), &t(&[m, n], w.clone()), &t(&[m], b.clone()), &t(&[m], up.clone()))?;
    let eval = |x: &[f32], w: &[f32], b: &[f32]| {
        dot(
            ops::linear(&t(&[n], x.to_vec()), &t(&[m, n], w.to_vec()), &t(&[m], b.to_vec()))
                .expect("fixed")
                .data(),
            &up,
        )
    };
    let e = max_fd_error(|p| eval(p, &w, &b), &x, dx.data())
        .max(max_fd_error(|p| eval(&x, p, &b), &w, dw.data()))
        .max(max_fd_error(|p| eval(&x, &w, p), &b, db.data()));
    Ok((x.len() + w.len() + b.len(), e))
}

pub fn check_sigmoid(seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let n = 5 + (seed % 7) as usize;
    let x = random_vec(&mut r, n, 4.0);
    let up = random_vec(&mut r, n, 1.0);
    let y = ops::sigmoid(&t(&[n], x.clone()));
    let dx = ops::sigmoid_backward(&y, &t(&[n], up.clone()));
    let e = max_fd_error(|p| dot(ops::sigmoid(&t(&[n], p.to_vec())).data(), &up), &x, dx.data());
    Ok((n, e))
}

/// Whole-network check of parameter and input gradients for the objective
/// `Σ r_i · y_i` with a random projection `r`. Covers flatten and the way
/// layers chain their caches.
pub fn check_network(net: &mut Network, seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::rng(seed);
    let in_len: usize = net.input_shape().iter().product();
    let x = random_vec(&mut r, in_len, 1.0);
    let up = random_vec(&mut r, net.output_len(), 1.0);
    let in_shape = net.input_shape().to_vec();
    net.zero_grad();
    net.forward(t(&in_shape, x.clone()))?;
    let dx = net.backward(Tensor::from_vec(up.clone()))?;
    let grads = net.flat_grads();
    let params = net.flat_params();
    let mut probe = net.clone();
    let e_params = max_fd_error(
        |p| {
            probe.set_flat_params(p).expect("same length");
            dot(probe.predict(t(&in_shape, x.clone())).expect("fixed").data(), &up)
        },
        &params,
        &grads,
    );
    let e_input = max_fd_error(|p| dot(net.predict(t(&in_shape, p.to_vec())).expect("fixed").data(), &up), &x, dx.data());
    Ok((params.len() + x.len(), e_params.max(e_input)))
}

/// Runs every layer-kind case for seeds `0..seeds`.
pub fn layer_suite(seeds: u64) -> Result<Vec<GradCheck>> {
    use super::LayerSpec;
    let run = |case: &str, f: &dyn Fn(u64) -> Result<(usize, f64)>| -> Result<GradCheck> {
        let errs = (0..seeds).map(f).collect::<Result<Vec<_>>>()?;
        Ok(GradCheck::merge(case, errs))
    };
    let flat_net = |seed: u64| -> Result<(usize, f64)> {
        let specs = [
            LayerSpec::conv(3, 3, 1, 1),
            LayerSpec::pool(2),
            LayerSpec::Flatten,
            LayerSpec::linear(4),
            LayerSpec::Sigmoid,
        ];
        let mut net = Network::build(&[2, 4, 4], &specs, seed)?;
        check_network(&mut net, seed ^ 0x5eed)
    };
    Ok(vec![
        run("conv2d", &|s| check_conv2d(s, 1, 1))?,
        run("conv2d_strided", &|s| check_conv2d(s, 2, 0))?,
        run("maxpool2d", &check_maxpool2d)?,
        run("leaky_relu", &check_leaky_relu)?,
        run("linear", &check_linear)?,
        run("sigmoid", &check_sigmoid)?,
        run("flatten_network", &flat_net)?,
    ])
}
