use rand::Rng;

use crate::nn::{linear_backward, linear_forward, relu, relu_backward, LinearParams, Tensor};
use crate::{Error, Result};

/// Number of dense layers in the decoder.
pub const MLP_LAYERS: usize = 5;

/// Hidden width used by the reference configuration.
pub const DEFAULT_HIDDEN: usize = 256;

/// Implicit decoder `f(z, relcoord, cell)`: five dense layers, ReLU after the
/// first four, linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LinearParams>,
}

impl MlpParams {
    pub fn new(layers: Vec<LinearParams>) -> Result<Self> {
        if layers.len() != MLP_LAYERS {
            return Err(Error::arg(format!("decoder needs {MLP_LAYERS} layers, got {}", layers.len())));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::arg(format!(
                    "layer {k} outputs {} but layer {} takes {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        if layers[MLP_LAYERS - 1].out_dim() != 1 {
            return Err(Error::arg("decoder output must be scalar"));
        }
        Ok(Self { layers })
    }

    fn widths_for(in_dim: usize, hidden: usize) -> [(usize, usize); MLP_LAYERS] {
        [(in_dim, hidden), (hidden, hidden), (hidden, hidden), (hidden, hidden), (hidden, 1)]
    }

    pub fn init<R: Rng + ?Sized>(in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let layers = Self::widths_for(in_dim, hidden)
            .iter()
            .map(|&(i, o)| LinearParams::init(i, o, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        let layers = Self::widths_for(in_dim, hidden)
            .iter()
            .map(|&(i, o)| LinearParams::zeros(i, o))
            .collect();
        Self { layers }
    }

    /// Input width `9D + 4` for an encoder of depth `D`.
    pub fn input_width(depth: usize) -> usize {
        9 * depth + 4
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].out_dim()
    }

    /// `[in, h1, h2, h3, h4, 1]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(LinearParams::out_dim))
            .collect()
    }

    pub fn layers(&self) -> &[LinearParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LinearParams] {
        &mut self.layers
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|k| [format!("layers.{k}.weight"), format!("layers.{k}.bias")])
            .collect()
    }
}

/// Decodes one query from latent `z`, scaled relative coordinate and cell.
pub fn mlp_decode(p: &MlpParams, z: &[f64], relcoord: [f64; 2], cell: [f64; 2]) -> Result<f64> {
    if z.len() + 4 != p.in_dim() {
        return Err(Error::arg(format!(
            "decoder takes {} inputs, latent of length {} gives {}",
            p.in_dim(),
            z.len(),
            z.len() + 4
        )));
    }
    let mut row = Vec::with_capacity(p.in_dim());
    row.extend_from_slice(z);
    row.extend_from_slice(&relcoord);
    row.extend_from_slice(&cell);
    let (out, _) = mlp_forward(p, Tensor::from_parts(vec![1, p.in_dim()], row))?;
    Ok(out.data()[0])
}

/// Activations retained for [`mlp_backward`].
#[derive(Debug, Clone)]
pub(crate) struct MlpCache {
    /// Input to every layer.
    inputs: Vec<Tensor>,
    /// Pre-activations of the four hidden layers.
    pub(crate) pre: Vec<Tensor>,
}

/// Batched forward over rows of `x: [N, in]`, returning `[N, 1]`.
pub(crate) fn mlp_forward(p: &MlpParams, x: Tensor) -> Result<(Tensor, MlpCache)> {
    let mut inputs = Vec::with_capacity(MLP_LAYERS);
    let mut pre = Vec::with_capacity(MLP_LAYERS - 1);
    let mut a = x;
    let last = p.layers.len() - 1;
    for (k, layer) in p.layers.iter().enumerate() {
        let z = linear_forward(layer, &a)?;
        inputs.push(a);
        if k == last {
            return Ok((z, MlpCache { inputs, pre }));
        }
        a = relu(&z);
        pre.push(z);
    }
    unreachable!("decoder has at least one layer")
}

/// Parameter gradients in [`MlpParams::tensors`] order and the input gradient.
pub(crate) fn mlp_backward(p: &MlpParams, cache: &MlpCache, dout: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
    let mut grads = Vec::with_capacity(2 * MLP_LAYERS);
    let mut d = dout.clone();
    for k in (0..p.layers.len()).rev() {
        let g = linear_backward(&p.layers[k], &cache.inputs[k], &d)?;
        grads.push(g.db);
        grads.push(g.dw);
        d = if k > 0 { relu_backward(&cache.pre[k - 1], &g.dx)? } else { g.dx };
    }
    grads.reverse();
    Ok((grads, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(w: Vec<f64>, out: usize, inp: usize, b: Vec<f64>) -> LinearParams {
        LinearParams::new(Tensor::new(vec![out, inp], w).unwrap(), Tensor::new(vec![out], b).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_weights_return_final_bias() {
        let mut p = MlpParams::zeros(MlpParams::input_width(2), 8);
        p.layers_mut()[4].bias.data_mut()[0] = 0.37;
        let z = vec![3.0; 18];
        assert_eq!(mlp_decode(&p, &z, [0.4, -1.2], [0.1, 0.1]).unwrap(), 0.37);
        assert_eq!(mlp_decode(&p, &vec![-9.0; 18], [0.0, 0.0], [2.0, 2.0]).unwrap(), 0.37);
    }

    #[test]
    fn hand_traced_toy_network() {
        // widths 5 → 2 → 2 → 2 → 2 → 1 with a single latent channel
        let p = MlpParams::new(vec![
            layer(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0], 2, 5, vec![0.0, -1.0]),
            layer(vec![1.0, -1.0, 0.5, 0.5], 2, 2, vec![0.0, 0.0]),
            layer(vec![2.0, 0.0, 0.0, -1.0], 2, 2, vec![0.5, 0.0]),
            layer(vec![1.0, 1.0, -1.0, 0.0], 2, 2, vec![0.0, 0.25]),
            layer(vec![1.0, -2.0], 1, 2, vec![0.125]),
        ])
        .unwrap();
        // x = [z, rel0, rel1, cell0, cell1] = [2, 3, -0.5, 0.1, 0.1]
        // h1 = relu([2, 3 - 0.5 - 1]) = [2, 1.5]
        // h2 = relu([2 - 1.5, 1 + 0.75]) = [0.5, 1.75]
        // h3 = relu([1 + 0.5, -1.75]) = [1.5, 0]
        // h4 = relu([1.5, -1.5 + 0.25]) = [1.5, 0]
        // y = 1.5 + 0.125
        let y = mlp_decode(&p, &[2.0], [3.0, -0.5], [0.1, 0.1]).unwrap();
        assert_eq!(y, 1.625);
    }

    #[test]
    fn missing_cell_is_rejected() {
        let p = MlpParams::zeros(MlpParams::input_width(1), 4);
        assert!(mlp_decode(&p, &[0.0; 10], [0.0, 0.0], [0.1, 0.1]).is_err());
        assert!(MlpParams::new(p.layers()[..4].to_vec()).is_err());
    }

    #[test]
    fn widths_follow_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MlpParams::init(MlpParams::input_width(16), DEFAULT_HIDDEN, &mut rng);
        assert_eq!(p.widths(), vec![148, 256, 256, 256, 256, 1]);
        assert_eq!(p.tensors().len(), 10);
        assert_eq!(p.tensor_names()[9], "layers.4.bias");
    }

    #[test]
    fn batched_gradient_matches_finite_differences() {
        use crate::nn::{grad_check_piecewise, PatternHasher};
        use std::hash::Hasher;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = MlpParams::init(6, 5, &mut rng);
        let x = Tensor::uniform(&[7, 6], 1.0, &mut rng);
        let probe = Tensor::uniform(&[7, 1], 1.0, &mut rng);
        let flat: Vec<f64> = p.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
        let objective = |theta: &[f64]| {
            let mut q = p.clone();
            let mut at = 0;
            for t in q.tensors_mut() {
                let n = t.len();
                t.data_mut().copy_from_slice(&theta[at..at + n]);
                at += n;
            }
            let (y, cache) = mlp_forward(&q, x.clone()).unwrap();
            let mut sig = PatternHasher::default();
            for z in &cache.pre {
                sig.push_signs(z.data());
            }
            let v = y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>();
            (v, sig.finish())
        };
        let (_, cache) = mlp_forward(&p, x.clone()).unwrap();
        let (grads, _) = mlp_backward(&p, &cache, &probe).unwrap();
        let analytic: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
        let report = grad_check_piecewise(objective, &flat, &analytic, 1e-3).unwrap();
        assert_eq!(report.unresolved, 0);
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }
}
