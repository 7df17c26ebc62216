use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::latent::{pixel_center_coords, QueryPoint};
use crate::raster::{augment_sr, bicubic_resize, AugmentSpec, ImageGrid};
use crate::{Error, Result};

/// How training pairs are cut from high-resolution rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Side of the low-resolution input patch.
    pub lr_size: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Supervised pixels per pair; `None` means `lr_size²`.
    pub sample_count: Option<usize>,
    pub augment: bool,
    /// Brightness and contrast factors are drawn from `1 ± photometric_jitter`.
    pub photometric_jitter: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            lr_size: 48,
            scale_min: 1.0,
            scale_max: 4.0,
            sample_count: None,
            augment: true,
            photometric_jitter: 0.1,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_size == 0 {
            return Err(Error::arg("lr_size must be positive"));
        }
        if !(self.scale_min >= 1.0 && self.scale_max >= self.scale_min && self.scale_max.is_finite()) {
            return Err(Error::arg(format!(
                "scale range [{}, {}] must satisfy 1 ≤ min ≤ max",
                self.scale_min, self.scale_max
            )));
        }
        if !(0.0..1.0).contains(&self.photometric_jitter) {
            return Err(Error::arg("photometric_jitter must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Smallest high-resolution side that fits every crop.
    pub fn min_hr_side(&self) -> usize {
        (self.lr_size as f64 * self.scale_max).floor() as usize
    }

    fn samples(&self) -> usize {
        self.sample_count.unwrap_or(self.lr_size * self.lr_size)
    }
}

/// One low-resolution patch with supervised high-resolution samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub lr_patch: ImageGrid,
    pub queries: Vec<QueryPoint>,
    pub targets: Vec<f64>,
    pub scale: f64,
}

fn random_augment<R: Rng + ?Sized>(cfg: &SamplingConfig, rng: &mut R) -> AugmentSpec {
    let j = cfg.photometric_jitter;
    AugmentSpec {
        hflip: rng.gen(),
        vflip: rng.gen(),
        rot90_steps: rng.gen_range(0..4),
        brightness_scale: if j > 0.0 { rng.gen_range(1.0 - j..1.0 + j) } else { 1.0 },
        contrast_scale: if j > 0.0 { rng.gen_range(1.0 - j..1.0 + j) } else { 1.0 },
    }
}

/// Draws a pair with the reference configuration.
pub fn sample_training_pair<R: Rng + ?Sized>(hr: &ImageGrid, rng: &mut R) -> Result<TrainingBatch> {
    sample_training_pair_with(hr, &SamplingConfig::default(), None, rng)
}

/// Augments `hr`, crops a `⌊lr·s⌋` square at a random position, downsamples it
/// to `lr × lr`, and samples target pixels from the crop without replacement.
///
/// `forced_scale` replaces the uniform draw of `s`.
pub fn sample_training_pair_with<R: Rng + ?Sized>(
    hr: &ImageGrid,
    cfg: &SamplingConfig,
    forced_scale: Option<f64>,
    rng: &mut R,
) -> Result<TrainingBatch> {
    cfg.validate()?;
    let need = cfg.min_hr_side();
    if hr.height() < need || hr.width() < need {
        return Err(Error::arg(format!(
            "training image {}x{} is smaller than {need}x{need}",
            hr.height(),
            hr.width()
        )));
    }
    let s = match forced_scale {
        Some(s) if s >= cfg.scale_min && s <= cfg.scale_max => s,
        Some(s) => {
            return Err(Error::arg(format!(
                "scale {s} outside [{}, {}]",
                cfg.scale_min, cfg.scale_max
            )))
        }
        None if cfg.scale_max > cfg.scale_min => rng.gen_range(cfg.scale_min..=cfg.scale_max),
        None => cfg.scale_min,
    };
    let source = if cfg.augment {
        augment_sr(hr, &random_augment(cfg, rng))?
    } else {
        hr.clone()
    };
    let crop_side = (cfg.lr_size as f64 * s).floor() as usize;
    let r0 = rng.gen_range(0..=source.height() - crop_side);
    let c0 = rng.gen_range(0..=source.width() - crop_side);
    let crop = source.crop(r0, c0, crop_side, crop_side)?;
    let lr_patch = bicubic_resize(&crop, cfg.lr_size, cfg.lr_size)?;

    let total = crop_side * crop_side;
    let count = cfg.samples().min(total);
    let mut picks = sample(rng, total, count).into_vec();
    picks.sort_unstable();
    let centers = pixel_center_coords(crop_side)?;
    let cell = [2.0 / crop_side as f64; 2];
    let queries = picks
        .iter()
        .map(|&k| QueryPoint {
            x: [centers[k / crop_side], centers[k % crop_side]],
            cell,
        })
        .collect();
    let targets = picks.iter().map(|&k| crop.values()[k]).collect();
    Ok(TrainingBatch {
        lr_patch,
        queries,
        targets,
        scale: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured(side: usize) -> ImageGrid {
        ImageGrid::from_fn(side, side, |r, c| ((r * 7 + c * 3) % 17) as f64 / 16.0).unwrap()
    }

    #[test]
    fn scale_two_samples_every_lr_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_training_pair_with(&textured(192), &SamplingConfig::default(), Some(2.0), &mut rng)
            .unwrap();
        assert_eq!((b.lr_patch.height(), b.lr_patch.width()), (48, 48));
        assert_eq!(b.queries.len(), 2304);
        assert_eq!(b.targets.len(), 2304);
        assert!(b.queries.iter().all(|q| q.cell == [2.0 / 96.0; 2]));
    }

    #[test]
    fn scale_one_lr_equals_crop() {
        let cfg = SamplingConfig {
            augment: false,
            ..SamplingConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = sample_training_pair_with(&textured(192), &cfg, Some(1.0), &mut rng).unwrap();
        assert_eq!(b.targets, b.lr_patch.values());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let hr = textured(200);
        let a = sample_training_pair(&hr, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_training_pair(&hr, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!((1.0..=4.0).contains(&a.scale));
    }

    #[test]
    fn too_small_is_argument_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_training_pair(&textured(191), &mut rng),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn targets_are_crop_pixels_at_their_centers() {
        let cfg = SamplingConfig {
            lr_size: 8,
            augment: false,
            sample_count: Some(20),
            ..SamplingConfig::default()
        };
        // value encodes the absolute pixel position
        let hr = ImageGrid::from_fn(40, 40, |r, c| (r * 40 + c) as f64 / 1600.0).unwrap();
        let b = sample_training_pair_with(&hr, &cfg, Some(3.0), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let side = 24.0;
        let offsets: Vec<(i64, i64)> = b
            .queries
            .iter()
            .zip(&b.targets)
            .map(|(q, t)| {
                let k = (t * 1600.0).round() as i64;
                let r = ((q.x[0] + 1.0) * side / 2.0 - 0.5).round() as i64;
                let c = ((q.x[1] + 1.0) * side / 2.0 - 0.5).round() as i64;
                assert!((0..24).contains(&r) && (0..24).contains(&c));
                (k / 40 - r, k % 40 - c)
            })
            .collect();
        // every target sits at the same crop origin
        assert!(offsets.iter().all(|&o| o == offsets[0]));
    }
}
