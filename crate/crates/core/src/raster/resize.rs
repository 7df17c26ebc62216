//! Separable cubic-convolution resampling (Keys kernel, `a = -0.5`).
//!
//! Pixel centers are aligned with the half-pixel convention
//! `src = (dst + 0.5) * in / out - 0.5`; taps that fall outside the image are
//! clamped to the nearest edge pixel. No antialiasing prefilter is applied when
//! shrinking.

use super::ImageGrid;
use crate::{Error, Result};

const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn keys_kernel(x: f64) -> f64 {
    let t = x.abs();
    if t <= 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((KEYS_A * t - 5.0 * KEYS_A) * t + 8.0 * KEYS_A) * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Four clamped taps and weights for one output coordinate.
#[derive(Clone, Copy)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn axis_taps(input: usize, output: usize) -> Vec<Taps> {
    let ratio = input as f64 / output as f64;
    let last = input as isize - 1;
    (0..output)
        .map(|dst| {
            let src = (dst as f64 + 0.5) * ratio - 0.5;
            let base = src.floor() as isize;
            let mut taps = Taps {
                index: [0; 4],
                weight: [0.0; 4],
            };
            for k in 0..4 {
                let pos = base - 1 + k as isize;
                taps.index[k] = pos.clamp(0, last) as usize;
                taps.weight[k] = keys_kernel(src - pos as f64);
            }
            taps
        })
        .collect()
}

/// Resizes `img` to `out_h × out_w`; the result is clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageGrid, out_h: usize, out_w: usize) -> Result<ImageGrid> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::arg(format!("output size {out_h}x{out_w} must be positive")));
    }
    if img.height() == 0 || img.width() == 0 {
        return Err(Error::arg("cannot resize an empty image"));
    }
    let (in_h, in_w) = (img.height(), img.width());
    let cols = axis_taps(in_w, out_w);
    let rows = axis_taps(in_h, out_h);

    // horizontal pass: in_h × out_w
    let mut horiz = vec![0.0; in_h * out_w];
    for r in 0..in_h {
        let src = &img.values()[r * in_w..(r + 1) * in_w];
        let dst = &mut horiz[r * out_w..(r + 1) * out_w];
        for (d, t) in dst.iter_mut().zip(&cols) {
            *d = (0..4).map(|k| t.weight[k] * src[t.index[k]]).sum();
        }
    }

    let mut out = vec![0.0; out_h * out_w];
    for (r, t) in rows.iter().enumerate() {
        let dst = &mut out[r * out_w..(r + 1) * out_w];
        for k in 0..4 {
            let w = t.weight[k];
            if w == 0.0 {
                continue;
            }
            let src = &horiz[t.index[k] * out_w..(t.index[k] + 1) * out_w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    ImageGrid::with_depth(out_h, out_w, out, img.source_bit_depth())
}
