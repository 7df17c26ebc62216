//! Single-channel rasters with unit-interval intensities.
//!
//! Everything here is a pure function of its inputs: resampling, tiling and
//! augmentation return new [`ImageGrid`] values and never mutate shared state.

mod augment;
mod pgm;
mod resize;
mod texture;
mod tile;

pub use augment::{augment_sr, AugmentSpec};
pub use pgm::{decode_pgm, encode_pgm16, load_pgm16, save_pgm16};
pub use resize::{bicubic_resize, keys_kernel};
pub use texture::{gaussian_texture, TextureSpec};
pub use tile::{patch_offsets, tile_overlapping, write_patch_csv, Patch};

use crate::{Error, Result};

/// Bit depth of the file an image was decoded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Row-major grayscale raster. Every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
    source_bit_depth: BitDepth,
}

impl ImageGrid {
    /// Builds an image, validating the length and the unit-interval invariant.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_depth(height, width, values, BitDepth::Sixteen)
    }

    pub fn with_depth(
        height: usize,
        width: usize,
        values: Vec<f64>,
        source_bit_depth: BitDepth,
    ) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::arg(format!(
                "image of {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::arg(format!("value {v} at index {i} is outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
            source_bit_depth,
        })
    }

    /// Clamps each value into `[0, 1]` (NaN maps to 0) before building the image.
    pub fn from_clamped(height: usize, width: usize, mut values: Vec<f64>) -> Result<Self> {
        for v in &mut values {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, values)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Samples `f(row, col)` at every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn source_bit_depth(&self) -> BitDepth {
        self.source_bit_depth
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Copies the `height × width` window whose top-left pixel is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::arg(format!(
                "crop {height}x{width} at ({row}, {col}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(height * width);
        for r in row..row + height {
            let start = r * self.width + col;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Self {
            height,
            width,
            values,
            source_bit_depth: self.source_bit_depth,
        })
    }

    /// Mean absolute difference against another image of the same shape.
    pub fn mean_abs_diff(&self, other: &ImageGrid) -> Result<f64> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::arg(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        if self.values.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(total / self.values.len() as f64)
    }
}
