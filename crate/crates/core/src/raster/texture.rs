use rand::Rng;

use super::ImageGrid;
use crate::{Error, Result};

/// Parameters of a random sum-of-Gaussians texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub blobs: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            blobs: 24,
            sigma_min: 1.0,
            sigma_max: 6.0,
        }
    }
}

/// Sum of isotropic Gaussians with random centers, widths and signed
/// amplitudes, min-max normalized to `[0, 1]`.
pub fn gaussian_texture<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    spec: &TextureSpec,
    rng: &mut R,
) -> Result<ImageGrid> {
    if height == 0 || width == 0 {
        return Err(Error::arg("texture size must be positive"));
    }
    if !(spec.sigma_min > 0.0 && spec.sigma_max >= spec.sigma_min) {
        return Err(Error::arg("texture sigma range must be positive and ordered"));
    }
    let blobs: Vec<(f64, f64, f64, f64)> = (0..spec.blobs)
        .map(|_| {
            let cy = rng.gen_range(0.0..height as f64);
            let cx = rng.gen_range(0.0..width as f64);
            let sigma = if spec.sigma_max > spec.sigma_min {
                rng.gen_range(spec.sigma_min..spec.sigma_max)
            } else {
                spec.sigma_min
            };
            let amp = rng.gen_range(-1.0..1.0);
            (cy, cx, 0.5 / (sigma * sigma), amp)
        })
        .collect();
    let mut values = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            values.push(
                blobs
                    .iter()
                    .map(|&(cy, cx, k, a)| a * (-k * ((y - cy).powi(2) + (x - cx).powi(2))).exp())
                    .sum::<f64>(),
            );
        }
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut values {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
    }
    ImageGrid::from_clamped(height, width, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spans_unit_interval_and_is_seeded() {
        let spec = TextureSpec::default();
        let a = gaussian_texture(20, 30, &spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = gaussian_texture(20, 30, &spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let lo = a.values().iter().cloned().fold(1.0, f64::min);
        let hi = a.values().iter().cloned().fold(0.0, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn no_blobs_is_flat() {
        let spec = TextureSpec { blobs: 0, ..TextureSpec::default() };
        let img = gaussian_texture(4, 4, &spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.5));
    }
}
