//! Synthetic multispectral scenes and yearly class-map series with known truth.
//!
//! A layout is a background class plus rectangles painted in order (later
//! rectangles overwrite earlier ones). Each pixel's bands are drawn from its
//! class's diagonal Gaussian using [`SplitMix64`], pixel by pixel in row-major
//! order and band by band within a pixel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    ClassLegend, ClassMap, GeoTransform, RasterData, RasterGrid, RegionPolygon, BARE_GROUND, BUILT_AREA, CROPS,
};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub class_id: u8,
    pub mean: Vec<f64>,
    /// Per-band standard deviation.
    pub sigma: Vec<f64>,
}

/// Pixel-space rectangle: columns `col..col+width`, rows `row..row+height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub class_id: u8,
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

fn default_pixel_size() -> f64 {
    10.0
}

fn default_origin() -> [f64; 2] {
    [500_000.0, 2_600_000.0]
}

fn default_crs() -> String {
    "EPSG:32640".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub signatures: Vec<ClassSignature>,
    pub background_class: u8,
    #[serde(default)]
    pub rectangles: Vec<Rect>,
    pub seed: u64,
    #[serde(default = "default_pixel_size")]
    pub pixel_size: f64,
    /// Map coordinates of the upper-left corner.
    #[serde(default = "default_origin")]
    pub origin: [f64; 2],
    #[serde(default = "default_crs")]
    pub crs_id: String,
    #[serde(default)]
    pub legend: Option<ClassLegend>,
}

impl SceneSpec {
    pub fn legend(&self) -> ClassLegend {
        self.legend.clone().unwrap_or_else(ClassLegend::canonical)
    }

    pub fn geotransform(&self) -> GeoTransform {
        GeoTransform::north_up(self.origin[0], self.origin[1], self.pixel_size, -self.pixel_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(Error::Validation(
                "scene needs positive width, height and band count".into(),
            ));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::Validation("pixel_size must be positive".into()));
        }
        let legend = self.legend();
        for s in &self.signatures {
            if s.mean.len() != self.bands || s.sigma.len() != self.bands {
                return Err(Error::Validation(format!(
                    "signature of class {} has {}/{} values for {} bands",
                    s.class_id,
                    s.mean.len(),
                    s.sigma.len(),
                    self.bands
                )));
            }
            if s.sigma.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || s.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "signature of class {} is not finite and non-negative",
                    s.class_id
                )));
            }
            if !legend.contains(s.class_id) {
                return Err(Error::Validation(format!(
                    "signature class {} is not in the legend",
                    s.class_id
                )));
            }
        }
        let painted = std::iter::once(self.background_class).chain(self.rectangles.iter().map(|r| r.class_id));
        for c in painted {
            if !self.signatures.iter().any(|s| s.class_id == c) {
                return Err(Error::Validation(format!("class {c} is painted but has no signature")));
            }
        }
        for (i, r) in self.rectangles.iter().enumerate() {
            if r.width == 0 || r.height == 0 || r.col + r.width > self.width || r.row + r.height > self.height {
                return Err(Error::Validation(format!(
                    "rectangle {i} {r:?} is empty or leaves the extent"
                )));
            }
        }
        Ok(())
    }

    fn template(&self) -> Result<RasterGrid> {
        RasterGrid::new(
            self.width,
            self.height,
            1,
            self.geotransform(),
            self.crs_id.clone(),
            RasterData::U8(vec![0; self.width * self.height]),
        )
    }
}

/// Paints rectangles over the background; rectangles of `grow.0` are widened
/// by `grow.1` pixels on every side and clipped to the extent.
/// Returns the labels and the indices of rectangles that were clipped.
fn paint(spec: &SceneSpec, grow: Option<(u8, usize)>) -> (Vec<u8>, Vec<usize>) {
    let (w, h) = (spec.width, spec.height);
    let mut labels = vec![spec.background_class; w * h];
    let mut clipped = Vec::new();
    for (i, r) in spec.rectangles.iter().enumerate() {
        let m = match grow {
            Some((class, m)) if class == r.class_id => m,
            _ => 0,
        };
        let c0 = r.col.saturating_sub(m);
        let r0 = r.row.saturating_sub(m);
        let c1 = (r.col + r.width + m).min(w);
        let r1 = (r.row + r.height + m).min(h);
        if m > r.col || m > r.row || r.col + r.width + m > w || r.row + r.height + m > h {
            clipped.push(i);
        }
        for row in r0..r1 {
            labels[row * w + c0..row * w + c1].fill(r.class_id);
        }
    }
    (labels, clipped)
}

/// Ground-truth class map of the layout, without imagery.
pub fn ground_truth(spec: &SceneSpec) -> Result<ClassMap> {
    spec.validate()?;
    let (labels, _) = paint(spec, None);
    ClassMap::from_values(&spec.template()?, labels, spec.legend())
}

/// Multiband f32 scene and its ground-truth map.
pub fn generate_scene(spec: &SceneSpec) -> Result<(RasterGrid, ClassMap)> {
    spec.validate()?;
    let (labels, _) = paint(spec, None);
    let n = spec.width * spec.height;
    let mut sig_of = [usize::MAX; 256];
    for (i, s) in spec.signatures.iter().enumerate() {
        sig_of[s.class_id as usize] = i;
    }
    let mut data = vec![0f32; n * spec.bands];
    let mut rng = SplitMix64::new(spec.seed);
    for (idx, &label) in labels.iter().enumerate() {
        let sig = &spec.signatures[sig_of[label as usize]];
        for b in 0..spec.bands {
            let z = rng.normal();
            data[b * n + idx] = (sig.mean[b] + sig.sigma[b] * z) as f32;
        }
    }
    let template = spec.template()?;
    let scene = RasterGrid::with_metadata(
        spec.width,
        spec.height,
        spec.bands,
        None,
        spec.geotransform(),
        spec.crs_id.clone(),
        (1..=spec.bands).map(|b| format!("B{b}")).collect(),
        RasterData::F32(data),
    )?;
    let truth = ClassMap::from_values(&template, labels, spec.legend())?;
    Ok((scene, truth))
}

/// Six canonical classes in equal vertical stripes. Class `c` has mean 0.1 in
/// every band plus 0.06 in band `(c - 1) % bands`, with the same `sigma` everywhere.
pub fn stripe_scene_spec(width: usize, height: usize, bands: usize, sigma: f64, seed: u64) -> SceneSpec {
    let legend = ClassLegend::canonical();
    let ids: Vec<u8> = legend.ids().collect();
    let k = ids.len();
    let signatures = ids
        .iter()
        .map(|&c| ClassSignature {
            class_id: c,
            mean: (0..bands)
                .map(|b| {
                    if b == (c as usize - 1) % bands.max(1) {
                        0.16
                    } else {
                        0.1
                    }
                })
                .collect(),
            sigma: vec![sigma; bands],
        })
        .collect();
    let rectangles = ids
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| {
            let c0 = width * i / k;
            let c1 = width * (i + 1) / k;
            (c1 > c0).then_some(Rect {
                class_id: c,
                col: c0,
                row: 0,
                width: c1 - c0,
                height,
            })
        })
        .collect();
    SceneSpec {
        width,
        height,
        bands,
        signatures,
        background_class: ids[0],
        rectangles,
        seed,
        pixel_size: default_pixel_size(),
        origin: default_origin(),
        crs_id: default_crs(),
        legend: None,
    }
}

pub const GOVERNORATES: [&str; 10] = [
    "Muscat",
    "Al Batinah North",
    "Dhofar",
    "Ad Dakhiliyah",
    "Ash Sharqiyah South",
    "Ash Sharqiyah North",
    "Ad Dhahirah",
    "Al Buraimi",
    "Al Wusta",
    "Musandam",
];

/// Ten regions as a 5x2 grid of 40x50-pixel tiles, each with a small crops
/// plot and a centered built-up square whose side differs per region (Al Wusta
/// smallest). Built-up squares grow one pixel per side per year.
#[derive(Debug, Clone, PartialEq)]
pub struct GovernorateFixture {
    pub spec: SceneSpec,
    pub regions: Vec<RegionPolygon>,
    pub rule: GrowthRule,
    pub years: Vec<i32>,
}

pub fn governorate_fixture(seed: u64) -> GovernorateFixture {
    const TILE_W: usize = 40;
    const TILE_H: usize = 50;
    const SIDES: [usize; 10] = [20, 16, 14, 12, 10, 9, 8, 6, 2, 4];
    let base = stripe_scene_spec(5 * TILE_W, 2 * TILE_H, 6, 0.01, seed);
    let gt = base.geotransform();
    let mut rectangles = Vec::new();
    let mut regions = Vec::new();
    for (i, (name, side)) in GOVERNORATES.iter().zip(SIDES).enumerate() {
        let (c0, r0) = ((i % 5) * TILE_W, (i / 5) * TILE_H);
        rectangles.push(Rect {
            class_id: CROPS,
            col: c0 + 1,
            row: r0 + 1,
            width: 6,
            height: 6,
        });
        rectangles.push(Rect {
            class_id: BUILT_AREA,
            col: c0 + TILE_W / 2 - side / 2,
            row: r0 + TILE_H / 2 - side / 2,
            width: side,
            height: side,
        });
        let (x0, y0) = gt.apply(c0 as f64, r0 as f64);
        let (x1, y1) = gt.apply((c0 + TILE_W) as f64, (r0 + TILE_H) as f64);
        let id = name.to_ascii_lowercase().replace(' ', "_");
        regions.push(RegionPolygon::rectangle(id, *name, x0, y1, x1, y0));
    }
    GovernorateFixture {
        spec: SceneSpec {
            background_class: BARE_GROUND,
            rectangles,
            ..base
        },
        regions,
        rule: GrowthRule {
            class_id: BUILT_AREA,
            margin_per_year: 1,
        },
        years: (2017..=2021).collect(),
    }
}

/// Rectangles of `class_id` grow by `margin_per_year` pixels per side each year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthRule {
    pub class_id: u8,
    pub margin_per_year: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSeries {
    pub maps: Vec<(i32, ClassMap)>,
    /// `(year, rectangle index)` for every growth clipped at the raster edge.
    pub clipped: Vec<(i32, usize)>,
}

/// One ground-truth map per year; the `k`-th year's focus rectangles are
/// widened by `k * margin_per_year`.
pub fn generate_growth_series(base: &SceneSpec, years: &[i32], rule: GrowthRule) -> Result<GrowthSeries> {
    base.validate()?;
    if years.is_empty() {
        return Err(Error::Validation("growth series needs at least one year".into()));
    }
    if years.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "growth series years must be strictly increasing".into(),
        ));
    }
    let template = base.template()?;
    let mut series = GrowthSeries {
        maps: Vec::with_capacity(years.len()),
        clipped: Vec::new(),
    };
    for (k, &year) in years.iter().enumerate() {
        let (labels, clipped) = paint(base, Some((rule.class_id, k * rule.margin_per_year)));
        series.clipped.extend(clipped.into_iter().map(|i| (year, i)));
        series
            .maps
            .push((year, ClassMap::from_values(&template, labels, base.legend())?));
    }
    Ok(series)
}
