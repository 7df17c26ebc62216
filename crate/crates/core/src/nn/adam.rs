use super::Tensor;
use crate::{Error, Result};

/// Adam hyperparameters; defaults are `lr = 1e-4, β1 = 0.9, β2 = 0.999, ε = 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Tensor,
    v: Tensor,
}

impl AdamState {
    pub fn new(shape: &[usize], config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Tensor {
        &self.m
    }

    pub fn second_moment(&self) -> &Tensor {
        &self.v
    }
}

/// Bias-corrected Adam update of `param` in place.
///
/// An all-zero gradient leaves both the parameter and the state untouched.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if !param.same_shape(grad) || !param.same_shape(&state.m) {
        return Err(Error::arg(format!(
            "adam_step: param {:?}, grad {:?}, state {:?} disagree",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    if grad.data().iter().all(|&g| g == 0.0) {
        return Ok(());
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((p, &g), mi), vi) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
        *mi = beta1 * *mi + (1.0 - beta1) * g;
        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = scalar(0.25);
        let mut st = AdamState::new(&[1], AdamConfig::default());
        adam_step(&mut p, &scalar(0.0), &mut st).unwrap();
        assert_eq!(p.data(), &[0.25]);
        // also after the moments are populated
        adam_step(&mut p, &scalar(1.0), &mut st).unwrap();
        let (before, snapshot) = (p.clone(), st.clone());
        adam_step(&mut p, &scalar(0.0), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st, snapshot);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(1.0);
        let mut st = AdamState::new(&[1], AdamConfig::default());
        adam_step(&mut p, &scalar(0.5), &mut st).unwrap();
        let expected = 1.0 - 1e-4 * 0.5 / (0.5 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-18);
        assert!((p.data()[0] - (1.0 - 1e-4)).abs() < 1e-11);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut p = Tensor::new(vec![2], vec![0.3, -0.2]).unwrap();
        let mut st = AdamState::new(&[2], cfg);
        let g1 = [0.5, -1.5];
        let g2 = [-0.25, 2.0];
        adam_step(&mut p, &Tensor::new(vec![2], g1.to_vec()).unwrap(), &mut st).unwrap();
        adam_step(&mut p, &Tensor::new(vec![2], g2.to_vec()).unwrap(), &mut st).unwrap();
        for (i, start) in [0.3, -0.2].into_iter().enumerate() {
            let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 0.01, 1e-8);
            let m1 = (1.0 - b1) * g1[i];
            let v1 = (1.0 - b2) * g1[i] * g1[i];
            let p1 = start - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
            let m2 = b1 * m1 + (1.0 - b1) * g2[i];
            let v2 = b2 * v1 + (1.0 - b2) * g2[i] * g2[i];
            let p2 = p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
            assert_eq!(p.data()[i], p2);
        }
        assert_eq!(st.step(), 2);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&[2], AdamConfig::default());
        assert!(adam_step(&mut p, &scalar(1.0), &mut st).is_err());
    }
}
