use rand::Rng;

use super::{gemm, Tensor};
use crate::{Error, Result};

/// Dense layer `y = x · Wᵀ + b` with `W: [out, in]`, `b: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

impl LinearParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::arg(format!(
                "inconsistent linear shapes: weight {:?}, bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weight, bias })
    }

    /// Uniform `±1/√in` initialization for weights and bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[out_dim, in_dim], bound, rng),
            bias: Tensor::uniform(&[out_dim], bound, rng),
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }
}

fn batch_of(x: &Tensor, width: usize, what: &str) -> Result<usize> {
    match x.shape() {
        [batch, w] if *w == width => Ok(*batch),
        other => Err(Error::arg(format!(
            "{what}: expected [batch, {width}], got {other:?}"
        ))),
    }
}

pub fn linear_forward(p: &LinearParams, x: &Tensor) -> Result<Tensor> {
    let (inp, out) = (p.in_dim(), p.out_dim());
    let batch = batch_of(x, inp, "linear input")?;
    let mut y = Vec::with_capacity(batch * out);
    for _ in 0..batch {
        y.extend_from_slice(p.bias.data());
    }
    // y += x · Wᵀ; Wᵀ is read through swapped strides
    gemm(batch, inp, out, x.data(), (inp, 1), p.weight.data(), (1, inp), 1.0, &mut y);
    Ok(Tensor::from_parts(vec![batch, out], y))
}

pub fn linear_backward(p: &LinearParams, x: &Tensor, dy: &Tensor) -> Result<LinearGrads> {
    let (inp, out) = (p.in_dim(), p.out_dim());
    let batch = batch_of(x, inp, "linear input")?;
    if batch_of(dy, out, "linear output gradient")? != batch {
        return Err(Error::arg("linear: batch sizes of x and dy differ"));
    }
    let mut dx = vec![0.0; batch * inp];
    gemm(batch, out, inp, dy.data(), (out, 1), p.weight.data(), (inp, 1), 0.0, &mut dx);
    let mut dw = vec![0.0; out * inp];
    gemm(out, batch, inp, dy.data(), (1, out), x.data(), (inp, 1), 0.0, &mut dw);
    let mut db = vec![0.0; out];
    for row in dy.data().chunks_exact(out) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    Ok(LinearGrads {
        dx: Tensor::from_parts(vec![batch, inp], dx),
        dw: Tensor::from_parts(vec![out, inp], dw),
        db: Tensor::from_parts(vec![out], db),
    })
}
