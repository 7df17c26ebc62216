use rand::Rng;

use super::{gemm, Tensor};
use crate::{Error, Result};

/// 3×3 convolution weights `[out_ch, in_ch, 3, 3]` and bias `[out_ch]`.
///
/// Stride 1, zero padding 1, cross-correlation (the kernel is not flipped).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3Params {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

impl Conv3x3Params {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        match weight.shape() {
            [o, _, 3, 3] if bias.shape() == [*o] => Ok(Self { weight, bias }),
            _ => Err(Error::arg(format!(
                "conv weight must be [out, in, 3, 3] with bias [out]; got {:?} and {:?}",
                weight.shape(),
                bias.shape()
            ))),
        }
    }

    /// Uniform `±1/√(in·9)` initialization.
    pub fn init<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((in_ch * 9).max(1) as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[out_ch, in_ch, 3, 3], bound, rng),
            bias: Tensor::uniform(&[out_ch], bound, rng),
        }
    }

    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_ch, in_ch, 3, 3]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }
}

fn chw(x: &Tensor, channels: usize, what: &str) -> Result<(usize, usize)> {
    match x.shape() {
        [c, h, w] if *c == channels && *h > 0 && *w > 0 => Ok((*h, *w)),
        other => Err(Error::arg(format!(
            "{what}: expected [{channels}, H, W] with H, W ≥ 1, got {other:?}"
        ))),
    }
}

/// Rows `c·9 + ky·3 + kx`, columns `y·W + x`.
pub(crate) fn im2col(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; c * 9 * hw];
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    cols
}

pub(crate) fn col2im(cols: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut x = vec![0.0; c * hw];
    for ch in 0..c {
        let plane = &mut x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    let (d, s) = match kx {
                        0 => (&mut dst[..w - 1], &src[1..]),
                        1 => (&mut dst[..], &src[..]),
                        _ => (&mut dst[1..], &src[..w - 1]),
                    };
                    for (a, b) in d.iter_mut().zip(s) {
                        *a += b;
                    }
                }
            }
        }
    }
    x
}

pub fn conv3x3_forward(p: &Conv3x3Params, x: &Tensor) -> Result<Tensor> {
    let (c, o) = (p.in_channels(), p.out_channels());
    let (h, w) = chw(x, c, "conv3x3 input")?;
    let hw = h * w;
    let cols = im2col(x.data(), c, h, w);
    let mut y = Vec::with_capacity(o * hw);
    for &b in p.bias.data() {
        y.extend(std::iter::repeat(b).take(hw));
    }
    gemm(o, c * 9, hw, p.weight.data(), (c * 9, 1), &cols, (hw, 1), 1.0, &mut y);
    Ok(Tensor::from_parts(vec![o, h, w], y))
}

pub fn conv3x3_backward(p: &Conv3x3Params, x: &Tensor, dy: &Tensor) -> Result<ConvGrads> {
    let (c, o) = (p.in_channels(), p.out_channels());
    let (h, w) = chw(x, c, "conv3x3 input")?;
    if dy.shape() != [o, h, w] {
        return Err(Error::arg(format!(
            "conv3x3 output gradient: expected [{o}, {h}, {w}], got {:?}",
            dy.shape()
        )));
    }
    let hw = h * w;
    let cols = im2col(x.data(), c, h, w);
    let mut dw = vec![0.0; o * c * 9];
    gemm(o, hw, c * 9, dy.data(), (hw, 1), &cols, (1, hw), 0.0, &mut dw);
    let mut dcols = vec![0.0; c * 9 * hw];
    gemm(c * 9, o, hw, p.weight.data(), (1, c * 9), dy.data(), (hw, 1), 0.0, &mut dcols);
    let dx = col2im(&dcols, c, h, w);
    let db = dy.data().chunks_exact(hw).map(|plane| plane.iter().sum()).collect();
    Ok(ConvGrads {
        dx: Tensor::from_parts(vec![c, h, w], dx),
        dw: Tensor::from_parts(vec![o, c, 3, 3], dw),
        db: Tensor::from_parts(vec![o], db),
    })
}
