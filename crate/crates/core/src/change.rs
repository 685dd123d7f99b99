//! Post-classification change detection and per-region class areas.

use crate::error::{Error, Result};
use crate::exec::{map_items, Workers};
use crate::raster::{rasterize_polygon, ClassLegend, ClassMap, RegionPolygon};

const M2_PER_KM2: f64 = 1e6;

fn check_pair(a: &ClassMap, b: &ClassMap, what: &str) -> Result<()> {
    a.grid().check_same_geometry(b.grid(), what)?;
    if a.legend() != b.legend() {
        return Err(Error::Validation(format!("{what}: legends differ")));
    }
    Ok(())
}

/// Pixel counts of class transitions between two epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub classes: ClassLegend,
    /// Row-major K x K, rows = earlier class, columns = later class.
    pub counts: Vec<u64>,
    /// Ground area of one pixel in m².
    pub pixel_area: f64,
    /// Pixels nodata in at least one of the two maps.
    pub excluded: u64,
}

impl TransitionMatrix {
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.k() + to]
    }

    pub fn count_ids(&self, from: u8, to: u8) -> Option<u64> {
        Some(self.count(self.classes.index_of(from)?, self.classes.index_of(to)?))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.k()).map(|i| self.count(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.k()).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let k = self.k();
        (0..k).map(|c| (0..k).map(|r| self.count(r, c)).sum()).collect()
    }

    pub fn area_km2(&self, from: usize, to: usize) -> f64 {
        self.count(from, to) as f64 * self.pixel_area / M2_PER_KM2
    }
}

pub fn transition_matrix(earlier: &ClassMap, later: &ClassMap) -> Result<TransitionMatrix> {
    check_pair(earlier, later, "transition matrix")?;
    let legend = earlier.legend();
    let k = legend.len();
    let table = legend.position_table();
    let mut counts = vec![0u64; k * k];
    let mut excluded = 0;
    for idx in 0..earlier.grid().pixel_count() {
        match (earlier.class_at(idx), later.class_at(idx)) {
            (Some(a), Some(b)) => {
                let (ia, ib) = (table[a as usize].unwrap(), table[b as usize].unwrap());
                counts[ia * k + ib] += 1;
            }
            _ => excluded += 1,
        }
    }
    Ok(TransitionMatrix {
        classes: legend.clone(),
        counts,
        pixel_area: earlier.grid().geotransform().pixel_area(),
        excluded,
    })
}

/// Pixel count times pixel area, in km².
pub fn pixels_to_km2(count: u64, pixel_area_m2: f64) -> f64 {
    count as f64 * pixel_area_m2 / M2_PER_KM2
}

/// Area of `class_id` in km², assuming map units are metres.
pub fn class_area(map: &ClassMap, class_id: u8) -> f64 {
    if map.nodata() == Some(class_id) {
        return 0.0;
    }
    let count = map.values().iter().filter(|&&v| v == class_id).count();
    pixels_to_km2(count as u64, map.grid().geotransform().pixel_area())
}

/// One `(region, year, class)` cell of a zonal area table.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalRow {
    pub region_id: String,
    pub region_name: String,
    pub year: i32,
    pub class_id: u8,
    pub pixel_count: u64,
    pub area_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZonalAreaTable {
    pub rows: Vec<ZonalRow>,
    /// Ids of regions that cover no pixel centre.
    pub empty_regions: Vec<String>,
}

impl ZonalAreaTable {
    pub fn get(&self, region_id: &str, year: i32, class_id: u8) -> Option<&ZonalRow> {
        self.rows
            .iter()
            .find(|r| r.region_id == region_id && r.year == year && r.class_id == class_id)
    }
}

/// Per-class pixel counts of `map` under `mask`, in legend order.
fn masked_histogram(map: &ClassMap, mask: &[bool]) -> Vec<u64> {
    let table = map.legend().position_table();
    let nodata = map.nodata();
    let mut counts = vec![0u64; map.legend().len()];
    for (&v, _) in map.values().iter().zip(mask).filter(|(_, &m)| m) {
        if Some(v) == nodata {
            continue;
        }
        if let Some(p) = table[v as usize] {
            counts[p] += 1;
        }
    }
    counts
}

fn region_masks(geometry: &ClassMap, regions: &[RegionPolygon], workers: Workers) -> Result<Vec<Vec<bool>>> {
    map_items(regions, workers, |r| rasterize_polygon(r, geometry.grid()))
        .into_iter()
        .collect()
}

/// Class areas inside each region. Overlapping regions each count the shared pixels.
pub fn zonal_class_area(map: &ClassMap, regions: &[RegionPolygon], year: i32) -> Result<ZonalAreaTable> {
    zonal_class_area_with(map, regions, year, Workers::default())
}

pub fn zonal_class_area_with(
    map: &ClassMap,
    regions: &[RegionPolygon],
    year: i32,
    workers: Workers,
) -> Result<ZonalAreaTable> {
    let masks = region_masks(map, regions, workers)?;
    let pixel_area = map.grid().geotransform().pixel_area();
    let mut table = ZonalAreaTable::default();
    let hists = map_items(&masks, workers, |m| masked_histogram(map, m));
    for ((region, mask), hist) in regions.iter().zip(&masks).zip(hists) {
        if !mask.iter().any(|&m| m) {
            table.empty_regions.push(region.region_id.clone());
        }
        for (entry, count) in map.legend().entries().iter().zip(hist) {
            table.rows.push(ZonalRow {
                region_id: region.region_id.clone(),
                region_name: region.name.clone(),
                year,
                class_id: entry.id,
                pixel_count: count,
                area_km2: pixels_to_km2(count, pixel_area),
            });
        }
    }
    Ok(table)
}

/// Signed relative change from a baseline, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PercentChange {
    Defined(f64),
    /// Baseline was zero.
    Undefined,
}

impl PercentChange {
    pub fn value(self) -> Option<f64> {
        match self {
            PercentChange::Defined(v) => Some(v),
            PercentChange::Undefined => None,
        }
    }
}

impl std::fmt::Display for PercentChange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PercentChange::Defined(v) => write!(f, "{v:.2}"),
            PercentChange::Undefined => f.write_str("n/a"),
        }
    }
}

/// `100 * (end - start) / start`.
pub fn percent_change(start: f64, end: f64) -> PercentChange {
    if start == 0.0 {
        PercentChange::Undefined
    } else {
        PercentChange::Defined(100.0 * (end - start) / start)
    }
}

/// One region's trajectory for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRow {
    pub region_id: String,
    pub region_name: String,
    pub class_id: u8,
    pub class_name: String,
    pub pixel_counts: Vec<u64>,
    /// Area per year, same order as [`ChangeReport::years`].
    pub areas_km2: Vec<f64>,
    pub delta_km2: f64,
    pub pct_change: PercentChange,
    /// First-year area.
    pub baseline_km2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    pub years: Vec<i32>,
    pub rows: Vec<ChangeRow>,
}

/// Per-region area trajectories of `focus_classes` across a yearly map series.
///
/// Rows are ordered region-major, then by focus class order.
pub fn change_series(
    maps: &[(i32, ClassMap)],
    regions: &[RegionPolygon],
    focus_classes: &[u8],
) -> Result<ChangeReport> {
    change_series_with(maps, regions, focus_classes, Workers::default())
}

pub fn change_series_with(
    maps: &[(i32, ClassMap)],
    regions: &[RegionPolygon],
    focus_classes: &[u8],
    workers: Workers,
) -> Result<ChangeReport> {
    if maps.len() < 2 {
        return Err(Error::Validation(format!(
            "change series needs at least 2 maps, got {}",
            maps.len()
        )));
    }
    for w in maps.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Validation(format!("year {} appears twice", w[0].0)));
        }
        if w[1].0 < w[0].0 {
            return Err(Error::Validation(format!(
                "years out of order: {} after {}",
                w[1].0, w[0].0
            )));
        }
        check_pair(&w[0].1, &w[1].1, "change series")?;
    }
    let first = &maps[0].1;
    let legend = first.legend();
    let focus: Vec<usize> = focus_classes
        .iter()
        .map(|&c| {
            legend
                .index_of(c)
                .ok_or_else(|| Error::Validation(format!("focus class {c} is not in the legend")))
        })
        .collect::<Result<_>>()?;

    let masks = region_masks(first, regions, workers)?;
    let pixel_area = first.grid().geotransform().pixel_area();
    // hists[region][year][legend position]
    let hists: Vec<Vec<Vec<u64>>> = map_items(&masks, workers, |mask| {
        maps.iter().map(|(_, m)| masked_histogram(m, mask)).collect()
    });

    let mut rows = Vec::with_capacity(regions.len() * focus.len());
    for (region, per_year) in regions.iter().zip(&hists) {
        for (&class_id, &p) in focus_classes.iter().zip(&focus) {
            let pixel_counts: Vec<u64> = per_year.iter().map(|h| h[p]).collect();
            let areas_km2: Vec<f64> = pixel_counts.iter().map(|&c| pixels_to_km2(c, pixel_area)).collect();
            let baseline = areas_km2[0];
            let last = *areas_km2.last().unwrap();
            rows.push(ChangeRow {
                region_id: region.region_id.clone(),
                region_name: region.name.clone(),
                class_id,
                class_name: legend.name_of(class_id).unwrap_or_default().to_string(),
                delta_km2: last - baseline,
                pct_change: percent_change(baseline, last),
                baseline_km2: baseline,
                pixel_counts,
                areas_km2,
            });
        }
    }
    Ok(ChangeReport {
        years: maps.iter().map(|(y, _)| *y).collect(),
        rows,
    })
}
