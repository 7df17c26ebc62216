//! Small residual CNN producing a `D × H × W` feature map.
//!
//! `stem conv (1 → D)` followed by residual blocks
//! `h ← h + conv₂(relu(conv₁(h)))`; spatial size is preserved throughout.
//! Intensities enter the stem mapped from `[0, 1]` to `[−1, 1]`.

use rand::Rng;

use super::{conv3x3_backward, conv3x3_forward, relu, relu_backward, Conv3x3Params, Tensor};
use crate::raster::ImageGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv3x3Params,
    pub conv2: Conv3x3Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub stem: Conv3x3Params,
    pub blocks: Vec<ResBlock>,
}

impl EncoderParams {
    pub fn new(stem: Conv3x3Params, blocks: Vec<ResBlock>) -> Result<Self> {
        if stem.in_channels() != 1 {
            return Err(Error::arg("encoder stem must take one input channel"));
        }
        let depth = stem.out_channels();
        for (i, b) in blocks.iter().enumerate() {
            for conv in [&b.conv1, &b.conv2] {
                if conv.in_channels() != depth || conv.out_channels() != depth {
                    return Err(Error::arg(format!(
                        "residual block {i} must map {depth} channels to {depth}"
                    )));
                }
            }
        }
        Ok(Self { stem, blocks })
    }

    pub fn init<R: Rng + ?Sized>(depth: usize, blocks: usize, rng: &mut R) -> Self {
        let stem = Conv3x3Params::init(1, depth, rng);
        let blocks = (0..blocks)
            .map(|_| ResBlock {
                conv1: Conv3x3Params::init(depth, depth, rng),
                conv2: Conv3x3Params::init(depth, depth, rng),
            })
            .collect();
        Self { stem, blocks }
    }

    pub fn zeros(depth: usize, blocks: usize) -> Self {
        Self {
            stem: Conv3x3Params::zeros(1, depth),
            blocks: (0..blocks)
                .map(|_| ResBlock {
                    conv1: Conv3x3Params::zeros(depth, depth),
                    conv2: Conv3x3Params::zeros(depth, depth),
                })
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.stem.out_channels()
    }

    /// Parameter tensors in a fixed order: stem weight/bias, then per block
    /// conv1 weight/bias, conv2 weight/bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.stem.weight, &self.stem.bias];
        for b in &self.blocks {
            out.extend([&b.conv1.weight, &b.conv1.bias, &b.conv2.weight, &b.conv2.bias]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.stem.weight, &mut self.stem.bias];
        for b in &mut self.blocks {
            out.extend([
                &mut b.conv1.weight,
                &mut b.conv1.bias,
                &mut b.conv2.weight,
                &mut b.conv2.bias,
            ]);
        }
        out
    }

    /// Names matching [`EncoderParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec!["stem.weight".to_string(), "stem.bias".to_string()];
        for i in 0..self.blocks.len() {
            for part in ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"] {
                out.push(format!("blocks.{i}.{part}"));
            }
        }
        out
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    input: Tensor,
    /// Per block: (block input, conv₁ pre-activation).
    blocks: Vec<(Tensor, Tensor)>,
}

impl EncoderCache {
    /// Pre-activations of every ReLU, in network order.
    pub fn relu_inputs(&self) -> impl Iterator<Item = &Tensor> {
        self.blocks.iter().map(|(_, pre)| pre)
    }
}

fn image_tensor(img: &ImageGrid) -> Tensor {
    let centered = img.values().iter().map(|v| 2.0 * v - 1.0).collect();
    Tensor::from_parts(vec![1, img.height(), img.width()], centered)
}

pub fn encoder_forward(p: &EncoderParams, img: &ImageGrid) -> Result<Tensor> {
    encoder_forward_cached(p, img).map(|(features, _)| features)
}

pub fn encoder_forward_cached(p: &EncoderParams, img: &ImageGrid) -> Result<(Tensor, EncoderCache)> {
    let input = image_tensor(img);
    let mut h = conv3x3_forward(&p.stem, &input)?;
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let pre = conv3x3_forward(&b.conv1, &h)?;
        let r = conv3x3_forward(&b.conv2, &relu(&pre))?;
        let mut next = h.clone();
        next.add_assign(&r);
        blocks.push((h, pre));
        h = next;
    }
    Ok((h, EncoderCache { input, blocks }))
}

/// Gradients for every tensor in [`EncoderParams::tensors`] order.
pub fn encoder_backward(p: &EncoderParams, cache: &EncoderCache, dfeat: &Tensor) -> Result<Vec<Tensor>> {
    if cache.blocks.len() != p.blocks.len() {
        return Err(Error::arg("encoder cache does not match parameters"));
    }
    let mut grads_rev: Vec<[Tensor; 4]> = Vec::with_capacity(p.blocks.len());
    let mut dh = dfeat.clone();
    for (b, (h_in, pre)) in p.blocks.iter().zip(&cache.blocks).rev() {
        let act = relu(pre);
        let g2 = conv3x3_backward(&b.conv2, &act, &dh)?;
        let dpre = relu_backward(pre, &g2.dx)?;
        let g1 = conv3x3_backward(&b.conv1, h_in, &dpre)?;
        // skip path plus the residual branch
        dh.add_assign(&g1.dx);
        grads_rev.push([g1.dw, g1.db, g2.dw, g2.db]);
    }
    let gs = conv3x3_backward(&p.stem, &cache.input, &dh)?;
    let mut out = vec![gs.dw, gs.db];
    for g in grads_rev.into_iter().rev() {
        out.extend(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{conv3x3_forward, grad_check_piecewise, PatternHasher};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageGrid {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, |_, _| rng.gen()).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let p = EncoderParams::zeros(4, 2);
        let f = encoder_forward(&p, &random_image(5, 6, 1)).unwrap();
        assert_eq!(f.shape(), &[4, 5, 6]);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_blocks_equals_stem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = EncoderParams::init(3, 0, &mut rng);
        let img = random_image(4, 4, 3);
        let stem = conv3x3_forward(&p.stem, &image_tensor(&img)).unwrap();
        assert_eq!(encoder_forward(&p, &img).unwrap(), stem);
    }

    #[test]
    fn spatial_size_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = EncoderParams::init(5, 2, &mut rng);
        for (h, w) in [(1, 1), (1, 7), (3, 2), (9, 4)] {
            let f = encoder_forward(&p, &random_image(h, w, 5)).unwrap();
            assert_eq!(f.shape(), &[5, h, w]);
        }
    }

    #[test]
    fn rejects_inconsistent_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stem = Conv3x3Params::init(1, 4, &mut rng);
        let bad = ResBlock {
            conv1: Conv3x3Params::init(4, 3, &mut rng),
            conv2: Conv3x3Params::init(3, 4, &mut rng),
        };
        assert!(EncoderParams::new(stem, vec![bad]).is_err());
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = EncoderParams::init(3, 2, &mut rng);
        let img = random_image(4, 4, 8);
        let probe = Tensor::uniform(&[3, 4, 4], 1.0, &mut rng);

        let flat: Vec<f64> = p.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
        let rebuild = |theta: &[f64]| {
            let mut q = p.clone();
            let mut at = 0;
            for t in q.tensors_mut() {
                let n = t.len();
                t.data_mut().copy_from_slice(&theta[at..at + n]);
                at += n;
            }
            q
        };
        let objective = |theta: &[f64]| {
            let q = rebuild(theta);
            let (f, cache) = encoder_forward_cached(&q, &img).unwrap();
            let mut sig = PatternHasher::default();
            for pre in cache.relu_inputs() {
                sig.push_signs(pre.data());
            }
            let v = f.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>();
            (v, std::hash::Hasher::finish(&sig))
        };
        let (_, cache) = encoder_forward_cached(&p, &img).unwrap();
        let grads = encoder_backward(&p, &cache, &probe).unwrap();
        let analytic: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
        let report = grad_check_piecewise(objective, &flat, &analytic, 1e-3).unwrap();
        assert_eq!(report.unresolved, 0);
        assert!(report.max_rel_err < 1e-4, "{report:?}");
    }
}
