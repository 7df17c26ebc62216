use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::model::LiifModel;
use crate::nn::persist::{load_tensors, save_tensors};
use crate::nn::{EncoderParams, Tensor};
use crate::{Error, Result};

pub const BUNDLE_FORMAT: &str = "liif-bundle/1";
pub const HEADER_FILE: &str = "model.json";

/// Coordinate convention shared by training and inference.
pub const COORD_CONVENTION: &str = "center=-1+(2i+1)/n; rel=(x-p)*(H,W); cell=(2/out_h,2/out_w)*(H,W)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format: String,
    pub depth: usize,
    pub blocks: usize,
    pub mlp_widths: Vec<usize>,
    pub coord_convention: String,
    pub encoder_manifest: String,
    pub mlp_manifest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl BundleHeader {
    pub fn describe(model: &LiifModel) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_string(),
            depth: model.encoder.depth(),
            blocks: model.encoder.blocks.len(),
            mlp_widths: model.mlp.widths(),
            coord_convention: COORD_CONVENTION.to_string(),
            encoder_manifest: "encoder.json".to_string(),
            mlp_manifest: "mlp.json".to_string(),
            provenance: None,
        }
    }
}

fn named<'a>(names: Vec<String>, tensors: Vec<&'a Tensor>) -> Vec<(String, &'a Tensor)> {
    names.into_iter().zip(tensors).collect()
}

/// Writes the header plus encoder and decoder manifests into `dir`.
pub fn save_bundle(model: &LiifModel, dir: impl AsRef<Path>, provenance: Option<&str>) -> Result<BundleHeader> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut header = BundleHeader::describe(model);
    header.provenance = provenance.map(str::to_string);
    save_tensors(&named(model.encoder.tensor_names(), model.encoder.tensors()), dir, "encoder")?;
    save_tensors(&named(model.mlp.tensor_names(), model.mlp.tensors()), dir, "mlp")?;
    fs::write(dir.join(HEADER_FILE), serde_json::to_vec_pretty(&header)?)?;
    Ok(header)
}

fn fill(targets: Vec<&mut Tensor>, names: &[String], loaded: Vec<(String, Tensor)>) -> Result<()> {
    if loaded.len() != targets.len() {
        return Err(Error::format(format!(
            "manifest lists {} tensors, model has {}",
            loaded.len(),
            targets.len()
        )));
    }
    for ((dst, want), (name, src)) in targets.into_iter().zip(names).zip(loaded) {
        if &name != want || !dst.same_shape(&src) {
            return Err(Error::format(format!(
                "tensor {name} {:?} does not match expected {want} {:?}",
                src.shape(),
                dst.shape()
            )));
        }
        *dst = src;
    }
    Ok(())
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(LiifModel, BundleHeader)> {
    let dir = dir.as_ref();
    let header: BundleHeader = serde_json::from_slice(&fs::read(dir.join(HEADER_FILE))?)?;
    if header.format != BUNDLE_FORMAT {
        return Err(Error::format(format!("unknown bundle format {:?}", header.format)));
    }
    if header.coord_convention != COORD_CONVENTION {
        return Err(Error::format("bundle uses a different coordinate convention"));
    }
    let widths = &header.mlp_widths;
    if widths.len() != 6 || widths[0] != MlpParams::input_width(header.depth) || widths[5] != 1 {
        return Err(Error::format(format!("bad decoder widths {widths:?}")));
    }
    let mut model = LiifModel {
        encoder: EncoderParams::zeros(header.depth, header.blocks),
        mlp: MlpParams::zeros(widths[0], widths[1]),
    };
    let enc_names = model.encoder.tensor_names();
    fill(model.encoder.tensors_mut(), &enc_names, load_tensors(dir.join(&header.encoder_manifest))?)?;
    let mlp_names = model.mlp.tensor_names();
    fill(model.mlp.tensors_mut(), &mlp_names, load_tensors(dir.join(&header.mlp_manifest))?)?;
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_preserves_f32_weights() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let model = LiifModel::init(3, 1, 8, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&model, dir.path(), Some("seed=11")).unwrap();
        let (back, header) = load_bundle(dir.path()).unwrap();
        assert_eq!(header.depth, 3);
        assert_eq!(header.provenance.as_deref(), Some("seed=11"));
        for (a, b) in model.tensors().iter().zip(back.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        // a second save of the narrowed model is byte-identical
        let dir2 = tempfile::tempdir().unwrap();
        save_bundle(&back, dir2.path(), Some("seed=11")).unwrap();
        for f in ["encoder.bin", "mlp.bin", "model.json"] {
            let first = fs::read(dir.path().join(f)).unwrap();
            let again = fs::read(dir2.path().join(f)).unwrap();
            assert_eq!(first, again, "{f}");
        }
    }

    #[test]
    fn convention_mismatch_is_rejected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let model = LiifModel::init(2, 0, 4, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&model, dir.path(), None).unwrap();
        let path = dir.path().join(HEADER_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("center=", "corner=");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Format(_))));
    }
}
