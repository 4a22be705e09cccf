//! Colour conversion, superpixel over-segmentation, pooling and binarization.

mod lab;
mod otsu;
mod slic;

pub use lab::{rgb_to_lab, to_lab, LabImage};
pub use otsu::{binarize, otsu};
pub use slic::{slic_segment, SuperpixelGrid, SLIC_ITERATIONS};

use crate::error::{check_len, Result};
use crate::raster::Raster;

/// Mean of each superpixel's pixel values.
pub fn pool(map: &Raster, grid: &SuperpixelGrid) -> Result<Vec<f64>> {
    map.ensure_dimensions(grid.width(), grid.height())?;
    // Accumulating offsets from each superpixel's first pixel keeps
    // superpixel-constant input exact.
    let mut pivot = vec![f64::NAN; grid.len()];
    let mut acc = vec![0.0; grid.len()];
    for (&label, &v) in grid.labels().iter().zip(map.data()) {
        let l = label as usize;
        if pivot[l].is_nan() {
            pivot[l] = v;
        }
        acc[l] += v - pivot[l];
    }
    Ok(pivot
        .iter()
        .zip(&acc)
        .zip(grid.sizes())
        .map(|((&p, &a), &size)| (p + a / size as f64).clamp(0.0, 1.0))
        .collect())
}

/// Paints every pixel with its superpixel's value.
pub fn unpool(values: &[f64], grid: &SuperpixelGrid) -> Result<Raster> {
    check_len(grid.len(), values.len())?;
    let data = grid
        .labels()
        .iter()
        .map(|&l| values[l as usize].clamp(0.0, 1.0))
        .collect();
    Raster::new(grid.width(), grid.height(), data)
}
