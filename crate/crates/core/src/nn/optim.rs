use super::Network;
use crate::error::{Error, Result};

/// One SGD step with momentum and L2 weight decay:
/// `v ← momentum·v + g + weight_decay·w`, `w ← w − lr·v`.
pub fn sgd_step(
    params: &mut [f32],
    grads: &[f32],
    velocity: &mut [f32],
    lr: f32,
    momentum: f32,
    weight_decay: f32,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(
            "sgd",
            format!(
                "params {}, grads {}, velocity {} disagree",
                params.len(),
                grads.len(),
                velocity.len()
            ),
        ));
    }
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g + weight_decay * *w;
        *w -= lr * *v;
    }
    Ok(())
}

/// SGD optimizer acting on every parameter of a [`Network`].
#[derive(Debug, Clone, Copy)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
}

impl Sgd {
    /// Applies the accumulated gradients scaled by `grad_scale` (e.g. 1/batch).
    pub fn step(&self, net: &mut Network, grad_scale: f32) -> Result<()> {
        for p in net.params_mut() {
            if grad_scale != 1.0 {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= grad_scale);
            }
            sgd_step(
                p.value.data_mut(),
                p.grad.data(),
                p.velocity.data_mut(),
                self.lr,
                self.momentum,
                self.weight_decay,
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step() {
        let mut w = [1.0f32];
        let mut v = [0.0f32];
        sgd_step(&mut w, &[0.5], &mut v, 0.1, 0.0, 0.0).unwrap();
        assert!((w[0] - 0.95).abs() < 1e-7);
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut w = [1.0f32, -2.0];
        sgd_step(&mut w, &[3.0, 4.0], &mut [0.0; 2], 0.0, 0.9, 0.1).unwrap();
        assert_eq!(w, [1.0, -2.0]);
    }

    #[test]
    fn momentum_recursion() {
        let mut w = [1.0f32];
        let mut v = [0.0f32];
        sgd_step(&mut w, &[1.0], &mut v, 0.1, 0.9, 0.0).unwrap();
        sgd_step(&mut w, &[1.0], &mut v, 0.1, 0.9, 0.0).unwrap();
        // 1 − 0.1·1 − 0.1·1.9
        assert!((w[0] - 0.71).abs() < 1e-6);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(sgd_step(&mut [0.0; 2], &[0.0], &mut [0.0; 2], 0.1, 0.0, 0.0).is_err());
    }
}
