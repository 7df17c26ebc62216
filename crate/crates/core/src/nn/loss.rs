use super::Tensor;
use crate::{Error, Result};

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Passes `dy` where `x > 0`; the subgradient at exactly zero is 0.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if !x.same_shape(dy) {
        return Err(Error::arg(format!(
            "relu_backward: shapes {:?} and {:?} differ",
            x.shape(),
            dy.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_parts(x.shape().to_vec(), data))
}

/// Mean absolute error and its gradient `sign(pred - target) / N` (`sign(0) = 0`).
pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if !pred.same_shape(target) {
        return Err(Error::arg(format!(
            "l1_loss: shapes {:?} and {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() {
        return Err(Error::arg("l1_loss: empty input"));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            total += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((total / n, Tensor::from_parts(pred.shape().to_vec(), grad)))
}
