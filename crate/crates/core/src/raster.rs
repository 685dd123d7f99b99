//! Georeferenced multiband rasters, categorical class maps and region polygons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_row_block, Workers};

/// Pixel sample type of a [`RasterGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    U16,
    U8,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U16 => 2,
            DType::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::U16 => "u16",
            DType::U8 => "u8",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "f32" => Some(DType::F32),
            "u16" => Some(DType::U16),
            "u8" => Some(DType::U8),
            _ => None,
        }
    }

    fn holds(self, v: f64) -> bool {
        match self {
            DType::F32 => v.is_finite() && (v as f32) as f64 == v,
            DType::U16 => v.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&v),
            DType::U8 => v.fract() == 0.0 && (0.0..=u8::MAX as f64).contains(&v),
        }
    }
}

/// Band-sequential pixel storage: all of band 0 row-major, then band 1, ...
#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    F32(Vec<f32>),
    U16(Vec<u16>),
    U8(Vec<u8>),
}

impl RasterData {
    pub fn dtype(&self) -> DType {
        match self {
            RasterData::F32(_) => DType::F32,
            RasterData::U16(_) => DType::U16,
            RasterData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::F32(v) => v.len(),
            RasterData::U16(v) => v.len(),
            RasterData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            RasterData::F32(v) => v[i] as f64,
            RasterData::U16(v) => v[i] as f64,
            RasterData::U8(v) => v[i] as f64,
        }
    }

    /// Copies `out.len()` samples starting at `start` into `out` as f64.
    #[inline]
    pub fn copy_f64(&self, start: usize, out: &mut [f64]) {
        let end = start + out.len();
        match self {
            RasterData::F32(v) => out.iter_mut().zip(&v[start..end]).for_each(|(o, &s)| *o = s as f64),
            RasterData::U16(v) => out.iter_mut().zip(&v[start..end]).for_each(|(o, &s)| *o = s as f64),
            RasterData::U8(v) => out.iter_mut().zip(&v[start..end]).for_each(|(o, &s)| *o = s as f64),
        }
    }
}

/// Affine pixel-to-map transform in GDAL coefficient order.
///
/// `x = origin_x + col * pixel_width + row * row_rot`
/// `y = origin_y + col * col_rot + row * pixel_height`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub pixel_width: f64,
    pub row_rot: f64,
    pub origin_y: f64,
    pub col_rot: f64,
    pub pixel_height: f64,
}

impl GeoTransform {
    /// North-up transform with no rotation.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_width: f64, pixel_height: f64) -> Self {
        GeoTransform {
            origin_x,
            pixel_width,
            row_rot: 0.0,
            origin_y,
            col_rot: 0.0,
            pixel_height,
        }
    }

    pub fn from_array(c: [f64; 6]) -> Self {
        GeoTransform {
            origin_x: c[0],
            pixel_width: c[1],
            row_rot: c[2],
            origin_y: c[3],
            col_rot: c[4],
            pixel_height: c[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [
            self.origin_x,
            self.pixel_width,
            self.row_rot,
            self.origin_y,
            self.col_rot,
            self.pixel_height,
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.pixel_width * self.pixel_height - self.row_rot * self.col_rot
    }

    pub fn is_rotated(&self) -> bool {
        self.row_rot != 0.0 || self.col_rot != 0.0
    }

    /// Ground area of one pixel in the CRS's squared units.
    pub fn pixel_area(&self) -> f64 {
        self.determinant().abs()
    }

    /// Map coordinates of fractional pixel position `(px, py)`.
    #[inline]
    pub fn apply(&self, px: f64, py: f64) -> (f64, f64) {
        (
            self.origin_x + px * self.pixel_width + py * self.row_rot,
            self.origin_y + px * self.col_rot + py * self.pixel_height,
        )
    }

    /// Fractional pixel position of map point `(x, y)`.
    pub fn invert(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Config(format!(
                "geotransform {:?} is not invertible",
                self.to_array()
            )));
        }
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        let px = (dx * self.pixel_height - dy * self.row_rot) / det;
        let py = (dy * self.pixel_width - dx * self.col_rot) / det;
        Ok((px, py))
    }
}

/// Multiband georeferenced raster. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    band_count: usize,
    nodata: Option<f64>,
    geotransform: GeoTransform,
    crs_id: String,
    band_names: Vec<String>,
    data: RasterData,
}

impl RasterGrid {
    pub fn new(
        width: usize,
        height: usize,
        band_count: usize,
        geotransform: GeoTransform,
        crs_id: impl Into<String>,
        data: RasterData,
    ) -> Result<Self> {
        let band_names = (1..=band_count).map(|b| format!("B{b}")).collect();
        Self::with_metadata(width, height, band_count, None, geotransform, crs_id, band_names, data)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_metadata(
        width: usize,
        height: usize,
        band_count: usize,
        nodata: Option<f64>,
        geotransform: GeoTransform,
        crs_id: impl Into<String>,
        band_names: Vec<String>,
        data: RasterData,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "raster size {width}x{height} must be positive"
            )));
        }
        if band_count == 0 {
            return Err(Error::Validation("raster needs at least one band".into()));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(band_count))
            .ok_or_else(|| Error::Validation("raster dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "raster data has {} samples, expected {width}x{height}x{band_count} = {expected}",
                data.len()
            )));
        }
        let gt = geotransform;
        if gt.pixel_width == 0.0 || gt.pixel_height == 0.0 {
            return Err(Error::Validation("pixel width and height must be non-zero".into()));
        }
        if gt.to_array().iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("geotransform coefficients must be finite".into()));
        }
        if band_names.len() != band_count {
            return Err(Error::Validation(format!(
                "{} band names for {band_count} bands",
                band_names.len()
            )));
        }
        if let Some(nd) = nodata {
            if !data.dtype().holds(nd) {
                return Err(Error::Validation(format!(
                    "nodata {nd} not representable as {}",
                    data.dtype().name()
                )));
            }
        }
        Ok(RasterGrid {
            width,
            height,
            band_count,
            nodata,
            geotransform,
            crs_id: crs_id.into(),
            band_names,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    pub fn geotransform(&self) -> &GeoTransform {
        &self.geotransform
    }

    pub fn crs_id(&self) -> &str {
        &self.crs_id
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn data(&self) -> &RasterData {
        &self.data
    }

    pub fn into_data(self) -> RasterData {
        self.data
    }

    /// Same grid with new pixel data of possibly different type and band count.
    pub fn derive(
        &self,
        band_count: usize,
        nodata: Option<f64>,
        band_names: Vec<String>,
        data: RasterData,
    ) -> Result<Self> {
        Self::with_metadata(
            self.width,
            self.height,
            band_count,
            nodata,
            self.geotransform,
            self.crs_id.clone(),
            band_names,
            data,
        )
    }

    #[inline]
    pub fn value(&self, band: usize, col: usize, row: usize) -> f64 {
        self.data.get(band * self.pixel_count() + row * self.width + col)
    }

    /// Sample at flat pixel index `idx` (row-major) of `band`.
    #[inline]
    pub fn value_at(&self, band: usize, idx: usize) -> f64 {
        self.data.get(band * self.pixel_count() + idx)
    }

    #[inline]
    pub fn is_nodata_value(&self, v: f64) -> bool {
        matches!(self.nodata, Some(nd) if v == nd) || v.is_nan()
    }

    /// A pixel is nodata when any of its bands holds the nodata value.
    pub fn is_nodata_pixel(&self, idx: usize) -> bool {
        (0..self.band_count).any(|b| self.is_nodata_value(self.value_at(b, idx)))
    }

    /// Band vector of pixel `idx`.
    pub fn pixel(&self, idx: usize) -> Vec<f64> {
        (0..self.band_count).map(|b| self.value_at(b, idx)).collect()
    }

    /// True when width, height, geotransform and CRS all agree.
    pub fn same_geometry(&self, other: &RasterGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.geotransform == other.geotransform
            && self.crs_id == other.crs_id
    }

    pub fn check_same_geometry(&self, other: &RasterGrid, what: &str) -> Result<()> {
        if self.crs_id != other.crs_id {
            return Err(Error::Validation(format!(
                "{what}: CRS mismatch ({} vs {})",
                self.crs_id, other.crs_id
            )));
        }
        if !self.same_geometry(other) {
            return Err(Error::Validation(format!(
                "{what}: raster geometry differs ({}x{} {:?} vs {}x{} {:?})",
                self.width,
                self.height,
                self.geotransform.to_array(),
                other.width,
                other.height,
                other.geotransform.to_array()
            )));
        }
        Ok(())
    }

    /// Map coordinates of the center of pixel `(col, row)`.
    pub fn pixel_to_map(&self, col: i64, row: i64) -> Result<(f64, f64)> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return Err(Error::Index {
                col,
                row,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.geotransform.apply(col as f64 + 0.5, row as f64 + 0.5))
    }

    /// Pixel containing map point `(x, y)`, or `None` when it lies outside the raster.
    pub fn map_to_pixel(&self, x: f64, y: f64) -> Result<Option<(usize, usize)>> {
        let (px, py) = self.geotransform.invert(x, y)?;
        let (col, row) = (px.floor(), py.floor());
        if !(col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64) {
            return Ok(None);
        }
        Ok(Some((col as usize, row as usize)))
    }
}

/// Ordered `(class_id, name)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LegendEntry>", into = "Vec<LegendEntry>")]
pub struct ClassLegend {
    entries: Vec<LegendEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub id: u8,
    pub name: String,
}

pub const WATER: u8 = 1;
pub const TREES: u8 = 2;
pub const CROPS: u8 = 3;
pub const BUILT_AREA: u8 = 4;
pub const BARE_GROUND: u8 = 5;
pub const RANGELAND: u8 = 6;

impl ClassLegend {
    pub fn new(entries: Vec<(u8, String)>) -> Result<Self> {
        let entries: Vec<LegendEntry> = entries.into_iter().map(|(id, name)| LegendEntry { id, name }).collect();
        Self::try_from(entries)
    }

    /// Water, Trees, Crops, Built Area, Bare Ground, Rangeland with ids 1 to 6.
    pub fn canonical() -> Self {
        let names = ["Water", "Trees", "Crops", "Built Area", "Bare Ground", "Rangeland"];
        ClassLegend {
            entries: names
                .iter()
                .enumerate()
                .map(|(i, n)| LegendEntry {
                    id: i as u8 + 1,
                    name: (*n).to_string(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LegendEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn contains(&self, id: u8) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    /// Position of `id` in legend order.
    pub fn index_of(&self, id: u8) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.name.as_str())
    }

    /// Resolves a class given by numeric id or by (case-insensitive) name.
    pub fn resolve(&self, key: &str) -> Option<u8> {
        let key = key.trim();
        if let Ok(id) = key.parse::<u8>() {
            return self.contains(id).then_some(id);
        }
        self.entries
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(key))
            .map(|e| e.id)
    }

    /// Lookup table from pixel value to legend position.
    pub(crate) fn position_table(&self) -> [Option<usize>; 256] {
        let mut table = [None; 256];
        for (i, e) in self.entries.iter().enumerate() {
            table[e.id as usize] = Some(i);
        }
        table
    }
}

impl TryFrom<Vec<LegendEntry>> for ClassLegend {
    type Error = Error;

    fn try_from(entries: Vec<LegendEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("legend has no classes".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.name.trim().is_empty() {
                return Err(Error::Validation(format!("legend class {} has an empty name", e.id)));
            }
            if e.name.contains(',') {
                return Err(Error::Validation(format!("legend name {:?} contains a comma", e.name)));
            }
            for prev in &entries[..i] {
                if prev.id == e.id {
                    return Err(Error::Validation(format!("duplicate legend id {}", e.id)));
                }
                if prev.name == e.name {
                    return Err(Error::Validation(format!("duplicate legend name {:?}", e.name)));
                }
            }
        }
        Ok(ClassLegend { entries })
    }
}

impl From<ClassLegend> for Vec<LegendEntry> {
    fn from(l: ClassLegend) -> Self {
        l.entries
    }
}

/// Nodata value used for class maps produced by this crate.
pub const CLASS_NODATA: u8 = 0;

/// Single-band u8 categorical raster with its legend.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    grid: RasterGrid,
    legend: ClassLegend,
}

impl ClassMap {
    pub fn new(grid: RasterGrid, legend: ClassLegend) -> Result<Self> {
        if grid.band_count() != 1 || grid.dtype() != DType::U8 {
            return Err(Error::Validation(format!(
                "class map must be a single u8 band, got {} band(s) of {}",
                grid.band_count(),
                grid.dtype().name()
            )));
        }
        let nodata = grid.nodata().map(|v| v as u8);
        if let Some(nd) = nodata {
            if legend.contains(nd) {
                return Err(Error::Validation(format!(
                    "legend uses the nodata value {nd} as a class id"
                )));
            }
        }
        let table = legend.position_table();
        let RasterData::U8(values) = grid.data() else {
            unreachable!()
        };
        if let Some(i) = values
            .iter()
            .position(|&v| Some(v) != nodata && table[v as usize].is_none())
        {
            return Err(Error::Validation(format!(
                "pixel ({}, {}) has value {} which is not in the legend",
                i % grid.width(),
                i / grid.width(),
                values[i]
            )));
        }
        Ok(ClassMap { grid, legend })
    }

    /// Builds a class map from row-major class ids on `template`'s geometry,
    /// with [`CLASS_NODATA`] as nodata.
    pub fn from_values(template: &RasterGrid, values: Vec<u8>, legend: ClassLegend) -> Result<Self> {
        let grid = template.derive(
            1,
            Some(CLASS_NODATA as f64),
            vec!["class".to_string()],
            RasterData::U8(values),
        )?;
        ClassMap::new(grid, legend)
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn legend(&self) -> &ClassLegend {
        &self.legend
    }

    pub fn into_grid(self) -> RasterGrid {
        self.grid
    }

    pub fn values(&self) -> &[u8] {
        match self.grid.data() {
            RasterData::U8(v) => v,
            _ => unreachable!("class maps are u8"),
        }
    }

    pub fn nodata(&self) -> Option<u8> {
        self.grid.nodata().map(|v| v as u8)
    }

    /// Class id at flat index, `None` for nodata.
    #[inline]
    pub fn class_at(&self, idx: usize) -> Option<u8> {
        let v = self.values()[idx];
        (Some(v) != self.nodata()).then_some(v)
    }

    /// Pixel count per legend entry, in legend order.
    pub fn histogram(&self) -> Vec<u64> {
        let table = self.legend.position_table();
        let nd = self.nodata();
        let mut counts = vec![0u64; self.legend.len()];
        for &v in self.values() {
            if Some(v) != nd {
                if let Some(i) = table[v as usize] {
                    counts[i] += 1;
                }
            }
        }
        counts
    }

    pub fn nodata_count(&self) -> u64 {
        match self.nodata() {
            Some(nd) => self.values().iter().filter(|&&v| v == nd).count() as u64,
            None => 0,
        }
    }
}

/// A named region: outer ring first, then holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPolygon {
    pub region_id: String,
    pub name: String,
    pub rings: Vec<Vec<[f64; 2]>>,
}

impl RegionPolygon {
    pub fn new(region_id: impl Into<String>, name: impl Into<String>, rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let poly = RegionPolygon {
            region_id: region_id.into(),
            name: name.into(),
            rings,
        };
        poly.validate()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(
        region_id: impl Into<String>,
        name: impl Into<String>,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    ) -> Self {
        RegionPolygon {
            region_id: region_id.into(),
            name: name.into(),
            rings: vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rings.is_empty() {
            return Err(Error::Validation(format!("region {:?} has no rings", self.region_id)));
        }
        for (i, ring) in self.rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Validation(format!(
                    "region {:?} ring {i} has {} vertices, need at least 4",
                    self.region_id,
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::Validation(format!(
                    "region {:?} ring {i} is not closed",
                    self.region_id
                )));
            }
            if ring.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!(
                    "region {:?} ring {i} has non-finite coordinates",
                    self.region_id
                )));
            }
        }
        Ok(())
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.rings.iter().flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }

    /// Even-odd containment. Edges are half-open in y and a point on a
    /// left-facing boundary counts as inside, one on a right-facing boundary
    /// as outside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > y) != (b[1] > y) {
                let xi = edge_x_at(a, b, y);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

#[inline]
fn edge_x_at(a: [f64; 2], b: [f64; 2], y: f64) -> f64 {
    a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
}

/// Pixels whose centers fall inside `poly` (row-major, `width * height`).
pub fn rasterize_polygon(poly: &RegionPolygon, geometry_of: &RasterGrid) -> Result<Vec<bool>> {
    rasterize_polygon_with(poly, geometry_of, Workers::Sequential)
}

pub fn rasterize_polygon_with(poly: &RegionPolygon, geometry_of: &RasterGrid, workers: Workers) -> Result<Vec<bool>> {
    poly.validate()?;
    let width = geometry_of.width();
    let gt = *geometry_of.geotransform();
    let mut mask = vec![false; geometry_of.pixel_count()];
    if gt.is_rotated() || gt.pixel_width < 0.0 {
        for_each_row_block(&mut mask, width, workers, |row0, block| {
            for (i, m) in block.iter_mut().enumerate() {
                let (col, row) = (i % width, row0 + i / width);
                let (x, y) = gt.apply(col as f64 + 0.5, row as f64 + 0.5);
                *m = poly.contains(x, y);
            }
        });
        return Ok(mask);
    }

    let edges: Vec<([f64; 2], [f64; 2])> = poly.edges().collect();
    let center_x = |col: usize| gt.origin_x + (col as f64 + 0.5) * gt.pixel_width;
    // First column whose center is >= x.
    let first_at_or_after = |x: f64| -> usize {
        let est = ((x - gt.origin_x) / gt.pixel_width - 0.5).ceil();
        let mut c = if est.is_nan() || est <= 0.0 {
            0
        } else if est >= width as f64 {
            width
        } else {
            est as usize
        };
        while c > 0 && center_x(c - 1) >= x {
            c -= 1;
        }
        while c < width && center_x(c) < x {
            c += 1;
        }
        c
    };

    for_each_row_block(&mut mask, width, workers, |row0, block| {
        let mut crossings: Vec<f64> = Vec::new();
        for (r, row_mask) in block.chunks_mut(width).enumerate() {
            let row = row0 + r;
            let y = gt.origin_y + (row as f64 + 0.5) * gt.pixel_height;
            crossings.clear();
            for &(a, b) in &edges {
                if (a[1] > y) != (b[1] > y) {
                    crossings.push(edge_x_at(a, b, y));
                }
            }
            crossings.sort_by(|p, q| p.total_cmp(q));
            for span in crossings.chunks_exact(2) {
                let start = first_at_or_after(span[0]);
                let end = first_at_or_after(span[1]);
                for m in &mut row_mask[start..end.max(start)] {
                    *m = !*m;
                }
            }
        }
    });
    Ok(mask)
}
