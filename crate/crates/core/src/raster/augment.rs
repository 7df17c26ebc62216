use super::ImageGrid;
use crate::{Error, Result};

/// Geometric and photometric augmentation applied to training rasters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub hflip: bool,
    pub vflip: bool,
    /// Number of quarter turns, `0..=3`.
    pub rot90_steps: u8,
    pub brightness_scale: f64,
    pub contrast_scale: f64,
}

impl AugmentSpec {
    pub const IDENTITY: AugmentSpec = AugmentSpec {
        hflip: false,
        vflip: false,
        rot90_steps: 0,
        brightness_scale: 1.0,
        contrast_scale: 1.0,
    };

    pub fn geometric(hflip: bool, vflip: bool, rot90_steps: u8) -> Self {
        Self {
            hflip,
            vflip,
            rot90_steps,
            ..Self::IDENTITY
        }
    }
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Applies hflip → vflip → quarter turns, then contrast about the image
/// mean, then brightness; each photometric stage clamps to `[0, 1]`.
///
/// One quarter turn maps `[[a, b], [c, d]]` to `[[c, a], [d, b]]`.
pub fn augment_sr(img: &ImageGrid, spec: &AugmentSpec) -> Result<ImageGrid> {
    if spec.rot90_steps > 3 {
        return Err(Error::arg(format!("rot90_steps {} not in 0..=3", spec.rot90_steps)));
    }
    if !(spec.brightness_scale > 0.0) || !(spec.contrast_scale > 0.0) {
        return Err(Error::arg("brightness and contrast scales must be positive"));
    }
    let (mut h, mut w) = (img.height(), img.width());
    let mut values = img.values().to_vec();
    if spec.hflip {
        for row in values.chunks_exact_mut(w) {
            row.reverse();
        }
    }
    if spec.vflip {
        let flipped: Vec<f64> = values.chunks_exact(w).rev().flatten().copied().collect();
        values = flipped;
    }
    for _ in 0..spec.rot90_steps {
        let mut rotated = vec![0.0; values.len()];
        // new image is w × h; out[i][j] = in[h - 1 - j][i]
        for i in 0..w {
            for j in 0..h {
                rotated[i * h + j] = values[(h - 1 - j) * w + i];
            }
        }
        values = rotated;
        std::mem::swap(&mut h, &mut w);
    }
    if spec.contrast_scale != 1.0 && !values.is_empty() {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in &mut values {
            *v = (spec.contrast_scale * (*v - mean) + mean).clamp(0.0, 1.0);
        }
    }
    if spec.brightness_scale != 1.0 {
        for v in &mut values {
            *v = (spec.brightness_scale * *v).clamp(0.0, 1.0);
        }
    }
    ImageGrid::with_depth(h, w, values, img.source_bit_depth())
}
