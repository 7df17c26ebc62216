use std::hash::Hasher;

use rand::Rng;

use super::latent::{ensemble_weights, unfold3x3_backward, FeatureMapLatent, QueryPoint};
use super::mlp::{mlp_backward, mlp_forward, MlpCache, MlpParams};
use super::TrainingBatch;
use crate::nn::{
    adam_step, encoder_backward, encoder_forward, encoder_forward_cached, AdamState, EncoderCache,
    EncoderParams, PatternHasher, Tensor,
};
use crate::raster::ImageGrid;
use crate::{Error, Result};

/// Queries decoded per MLP batch during inference.
const PREDICT_CHUNK: usize = 2048;

/// Encoder plus implicit decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LiifModel {
    pub encoder: EncoderParams,
    pub mlp: MlpParams,
}

impl LiifModel {
    pub fn new(encoder: EncoderParams, mlp: MlpParams) -> Result<Self> {
        let want = MlpParams::input_width(encoder.depth());
        if mlp.in_dim() != want {
            return Err(Error::arg(format!(
                "decoder takes {} inputs but encoder depth {} needs {want}",
                mlp.in_dim(),
                encoder.depth()
            )));
        }
        Ok(Self { encoder, mlp })
    }

    pub fn init<R: Rng + ?Sized>(depth: usize, blocks: usize, hidden: usize, rng: &mut R) -> Self {
        let encoder = EncoderParams::init(depth, blocks, rng);
        let mlp = MlpParams::init(MlpParams::input_width(depth), hidden, rng);
        Self { encoder, mlp }
    }

    /// Encoder tensors followed by decoder tensors.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.encoder.tensors();
        out.extend(self.mlp.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.mlp.tensors_mut());
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.encoder.tensor_names().into_iter().map(|n| format!("encoder.{n}")).collect();
        out.extend(self.mlp.tensor_names().into_iter().map(|n| format!("mlp.{n}")));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::arg(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&theta[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn latent(&self, img: &ImageGrid) -> Result<FeatureMapLatent> {
        FeatureMapLatent::from_features(&encoder_forward(&self.encoder, img)?)
    }

    /// Unclamped ensemble predictions at arbitrary queries.
    pub fn query(&self, img: &ImageGrid, queries: &[QueryPoint]) -> Result<Vec<f64>> {
        let fm = self.latent(img)?;
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(PREDICT_CHUNK) {
            let plan = DecodePlan::build(&fm, chunk);
            let (y, _) = mlp_forward(&self.mlp, plan.rows)?;
            out.extend(blend(&plan.weights, y.data()));
        }
        Ok(out)
    }

    pub fn predict(&self, img: &ImageGrid, out_h: usize, out_w: usize) -> Result<ImageGrid> {
        predict_sr(&self.encoder, &self.mlp, img, out_h, out_w)
    }
}

/// Decoder inputs for a set of queries: four rows per query.
struct DecodePlan {
    rows: Tensor,
    weights: Vec<[f64; 4]>,
    /// Flattened grid position `r·W + c` of each row's latent.
    sites: Vec<usize>,
}

impl DecodePlan {
    fn build(fm: &FeatureMapLatent, queries: &[QueryPoint]) -> Self {
        let d9 = fm.latent_dim();
        let width = d9 + 4;
        let (h, w) = (fm.height() as f64, fm.width() as f64);
        let mut rows = Vec::with_capacity(4 * queries.len() * width);
        let mut weights = Vec::with_capacity(queries.len());
        let mut sites = Vec::with_capacity(4 * queries.len());
        for q in queries {
            let idx = fm.corner_indices(q.x);
            let centers = idx.map(|(r, c)| fm.center(r, c));
            weights.push(ensemble_weights(q.x, &centers).0);
            for (&(r, c), p) in idx.iter().zip(&centers) {
                rows.extend_from_slice(fm.latent(r, c));
                rows.push((q.x[0] - p[0]) * h);
                rows.push((q.x[1] - p[1]) * w);
                rows.push(q.cell[0] * h);
                rows.push(q.cell[1] * w);
                sites.push(r * fm.width() + c);
            }
        }
        Self {
            rows: Tensor::from_parts(vec![4 * queries.len(), width], rows),
            weights,
            sites,
        }
    }
}

fn blend<'a>(weights: &'a [[f64; 4]], decoded: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    weights
        .iter()
        .zip(decoded.chunks_exact(4))
        .map(|(w, y)| w.iter().zip(y).map(|(a, b)| a * b).sum())
}

/// Super-resolves `img` to `out_h × out_w`, querying every output pixel
/// center and clamping to `[0, 1]`.
pub fn predict_sr(
    encoder: &EncoderParams,
    mlp: &MlpParams,
    img: &ImageGrid,
    out_h: usize,
    out_w: usize,
) -> Result<ImageGrid> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::arg("predict_sr: output size must be positive"));
    }
    if img.height() == 0 || img.width() == 0 {
        return Err(Error::arg("predict_sr: empty input image"));
    }
    let model = LiifModel::new(encoder.clone(), mlp.clone())?;
    let values = model.query(img, &QueryPoint::pixel_grid(out_h, out_w)?)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("predict_sr produced a non-finite value"));
    }
    ImageGrid::from_clamped(out_h, out_w, values)
}

struct SampleForward {
    enc: EncoderCache,
    fm_shape: (usize, usize, usize),
    plan_weights: Vec<[f64; 4]>,
    sites: Vec<usize>,
    mlp: MlpCache,
    residuals: Vec<f64>,
}

fn forward_sample(model: &LiifModel, sample: &TrainingBatch) -> Result<SampleForward> {
    if sample.queries.len() != sample.targets.len() {
        return Err(Error::arg("training batch has mismatched query and target counts"));
    }
    let (feats, enc) = encoder_forward_cached(&model.encoder, &sample.lr_patch)?;
    let fm = FeatureMapLatent::from_features(&feats)?;
    let plan = DecodePlan::build(&fm, &sample.queries);
    let (y, mlp) = mlp_forward(&model.mlp, plan.rows)?;
    let residuals = blend(&plan.weights, y.data())
        .zip(&sample.targets)
        .map(|(p, t)| p - t)
        .collect();
    Ok(SampleForward {
        enc,
        fm_shape: (fm.latent_dim(), fm.height(), fm.width()),
        plan_weights: plan.weights,
        sites: plan.sites,
        mlp,
        residuals,
    })
}

fn total_queries(batch: &[TrainingBatch]) -> Result<usize> {
    let n: usize = batch.iter().map(|s| s.queries.len()).sum();
    if n == 0 {
        return Err(Error::arg("training batch has no queries"));
    }
    Ok(n)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute error over every query in the batch.
pub fn batch_loss(model: &LiifModel, batch: &[TrainingBatch]) -> Result<f64> {
    batch_loss_signature(model, batch).map(|(loss, _)| loss)
}

/// Loss together with a hash of every ReLU and absolute-value branch taken.
/// Within a region of constant signature the loss is smooth in the parameters.
pub fn batch_loss_signature(model: &LiifModel, batch: &[TrainingBatch]) -> Result<(f64, u64)> {
    let n = total_queries(batch)?;
    let mut sig = PatternHasher::default();
    let mut total = 0.0;
    for sample in batch {
        let f = forward_sample(model, sample)?;
        for pre in f.enc.relu_inputs() {
            sig.push_signs(pre.data());
        }
        for pre in &f.mlp.pre {
            sig.push_signs(pre.data());
        }
        sig.push_signs(&f.residuals);
        total += f.residuals.iter().map(|r| r.abs()).sum::<f64>();
    }
    Ok((total / n as f64, sig.finish()))
}

/// Loss and its gradient for every tensor in [`LiifModel::tensors`] order.
pub fn batch_loss_and_grad(model: &LiifModel, batch: &[TrainingBatch]) -> Result<(f64, Vec<Tensor>)> {
    let n = total_queries(batch)? as f64;
    let mut grads: Vec<Tensor> = model.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
    let n_enc = model.encoder.tensors().len();
    let mut total = 0.0;
    for sample in batch {
        let f = forward_sample(model, sample)?;
        total += f.residuals.iter().map(|r| r.abs()).sum::<f64>();

        let mut dout = Vec::with_capacity(4 * f.residuals.len());
        for (w, r) in f.plan_weights.iter().zip(&f.residuals) {
            let g = sign(*r) / n;
            dout.extend(w.iter().map(|wt| wt * g));
        }
        let dout = Tensor::from_parts(vec![dout.len(), 1], dout);
        let (mlp_grads, dx) = mlp_backward(&model.mlp, &f.mlp, &dout)?;

        let (d9, h, w) = f.fm_shape;
        let hw = h * w;
        let width = d9 + 4;
        let mut du = vec![0.0; d9 * hw];
        for (row, &site) in dx.data().chunks_exact(width).zip(&f.sites) {
            for (k, g) in row[..d9].iter().enumerate() {
                du[k * hw + site] += g;
            }
        }
        let dfeat = unfold3x3_backward(&Tensor::from_parts(vec![d9, h, w], du))?;
        let enc_grads = encoder_backward(&model.encoder, &f.enc, &dfeat)?;

        for (acc, g) in grads.iter_mut().zip(enc_grads.iter().chain(&mlp_grads)) {
            acc.add_assign(g);
        }
        debug_assert_eq!(enc_grads.len(), n_enc);
    }
    Ok((total / n, grads))
}

/// One optimizer update over `batch`; returns the pre-update loss.
///
/// `states` holds one Adam state per tensor in [`LiifModel::tensors`] order.
pub fn train_step(model: &mut LiifModel, batch: &[TrainingBatch], states: &mut [AdamState]) -> Result<f64> {
    let (loss, grads) = batch_loss_and_grad(model, batch)?;
    if !loss.is_finite() {
        return Err(Error::numeric(format!("training loss is {loss}")));
    }
    if grads.iter().any(|g| !g.all_finite()) {
        return Err(Error::numeric("training gradient is not finite"));
    }
    let mut params = model.tensors_mut();
    if states.len() != params.len() {
        return Err(Error::arg(format!(
            "expected {} optimizer states, got {}",
            params.len(),
            states.len()
        )));
    }
    for ((p, g), s) in params.iter_mut().zip(&grads).zip(states.iter_mut()) {
        adam_step(p, g, s)?;
    }
    Ok(loss)
}
