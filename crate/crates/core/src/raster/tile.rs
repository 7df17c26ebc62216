use std::io::Write;

use super::ImageGrid;
use crate::{Error, Result};

/// A square (or rectangular) window cut from a larger raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub image: ImageGrid,
    pub offset_x: usize,
    pub offset_y: usize,
    pub parent_width: usize,
    pub parent_height: usize,
}

/// Offsets `0, stride, 2·stride, …` plus a final clamped offset at
/// `dim - patch` when the regular grid leaves the far edge uncovered.
pub(crate) fn axis_offsets(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut offsets = Vec::new();
    let mut off = 0;
    while off + patch <= dim {
        offsets.push(off);
        off += stride;
    }
    if let Some(&last) = offsets.last() {
        if last + patch < dim {
            offsets.push(dim - patch);
        }
    }
    offsets
}

pub(crate) fn stride_for(patch_size: usize, overlap_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::arg(format!(
            "overlap fraction {overlap_fraction} must lie in [0, 1)"
        )));
    }
    if patch_size == 0 {
        return Err(Error::arg("patch size must be positive"));
    }
    Ok(((patch_size as f64 * (1.0 - overlap_fraction)).round() as usize).max(1))
}

/// Top-left `(offset_x, offset_y)` of every window [`tile_overlapping`] cuts
/// from a `height × width` raster, in the same order.
pub fn patch_offsets(
    height: usize,
    width: usize,
    patch_size: usize,
    overlap_fraction: f64,
) -> Result<Vec<(usize, usize)>> {
    let stride = stride_for(patch_size, overlap_fraction)?;
    if patch_size > height || patch_size > width {
        return Err(Error::arg(format!(
            "patch size {patch_size} exceeds image {height}x{width}"
        )));
    }
    let ys = axis_offsets(height, patch_size, stride);
    let xs = axis_offsets(width, patch_size, stride);
    Ok(ys.iter().flat_map(|&oy| xs.iter().map(move |&ox| (ox, oy))).collect())
}

/// Cuts `img` into overlapping `patch_size²` windows, row-major by offset.
pub fn tile_overlapping(
    img: &ImageGrid,
    patch_size: usize,
    overlap_fraction: f64,
) -> Result<Vec<Patch>> {
    patch_offsets(img.height(), img.width(), patch_size, overlap_fraction)?
        .into_iter()
        .enumerate()
        .map(|(id, (ox, oy))| {
            Ok(Patch {
                id,
                image: img.crop(oy, ox, patch_size, patch_size)?,
                offset_x: ox,
                offset_y: oy,
                parent_width: img.width(),
                parent_height: img.height(),
            })
        })
        .collect()
}

/// Writes `patch_id,offset_x,offset_y,width,height` rows.
pub fn write_patch_csv<W: Write>(patches: &[Patch], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["patch_id", "offset_x", "offset_y", "width", "height"])?;
    for p in patches {
        w.write_record([
            p.id.to_string(),
            p.offset_x.to_string(),
            p.offset_y.to_string(),
            p.image.width().to_string(),
            p.image.height().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
