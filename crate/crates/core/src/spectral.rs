//! Normalized-difference band indices (NDVI and friends).

use crate::error::{Error, Result};
use crate::exec::{for_each_row_block, Workers};
use crate::raster::{RasterData, RasterGrid};

/// Nodata value written into index rasters; outside the valid [-1, 1] range.
pub const INDEX_NODATA: f32 = -9999.0;

/// Single f32 band of normalized-difference values with [`INDEX_NODATA`] holes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRaster {
    grid: RasterGrid,
}

impl IndexRaster {
    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn into_grid(self) -> RasterGrid {
        self.grid
    }

    pub fn values(&self) -> &[f32] {
        match self.grid.data() {
            RasterData::F32(v) => v,
            _ => unreachable!("index rasters are f32"),
        }
    }

    /// `None` where nodata.
    pub fn get(&self, idx: usize) -> Option<f32> {
        let v = self.values()[idx];
        (v != INDEX_NODATA).then_some(v)
    }
}

/// `(a - b) / (a + b)` for one pixel, evaluated in f64.
///
/// `None` for a zero denominator, non-finite input, or a result outside
/// [-1, 1] (possible only with negative inputs).
#[inline]
pub fn normalized_difference_value(a: f64, b: f64) -> Option<f32> {
    let sum = a + b;
    if sum == 0.0 || !sum.is_finite() {
        return None;
    }
    let v = (a - b) / sum;
    (-1.0..=1.0).contains(&v).then_some(v as f32)
}

/// Per-pixel `(a - b) / (a + b)` of `a_band` of `a` and `b_band` of `b`.
///
/// NDVI is `normalized_difference(scene, nir, scene, red)`. Band indices are 0-based.
pub fn normalized_difference(a: &RasterGrid, a_band: usize, b: &RasterGrid, b_band: usize) -> Result<IndexRaster> {
    normalized_difference_with(a, a_band, b, b_band, Workers::default())
}

pub fn normalized_difference_with(
    a: &RasterGrid,
    a_band: usize,
    b: &RasterGrid,
    b_band: usize,
    workers: Workers,
) -> Result<IndexRaster> {
    a.check_same_geometry(b, "normalized difference")?;
    for (g, band, which) in [(a, a_band, "first"), (b, b_band, "second")] {
        if band >= g.band_count() {
            return Err(Error::Validation(format!(
                "{which} band index {band} out of range for {} band(s)",
                g.band_count()
            )));
        }
    }
    let width = a.width();
    let mut out = vec![INDEX_NODATA; a.pixel_count()];
    for_each_row_block(&mut out, width, workers, |row0, block| {
        let base = row0 * width;
        for (i, o) in block.iter_mut().enumerate() {
            let idx = base + i;
            let va = a.value_at(a_band, idx);
            let vb = b.value_at(b_band, idx);
            if a.is_nodata_value(va) || b.is_nodata_value(vb) {
                continue;
            }
            if let Some(v) = normalized_difference_value(va, vb) {
                *o = v;
            }
        }
    });
    let name = format!("nd({},{})", a.band_names()[a_band], b.band_names()[b_band]);
    let grid = a.derive(1, Some(INDEX_NODATA as f64), vec![name], RasterData::F32(out))?;
    Ok(IndexRaster { grid })
}

/// NDVI of a multiband scene given 0-based NIR and red band indices.
pub fn ndvi(scene: &RasterGrid, nir: usize, red: usize) -> Result<IndexRaster> {
    normalized_difference(scene, nir, scene, red)
}
