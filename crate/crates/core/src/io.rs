//! On-disk formats.
//!
//! A raster is a pair of files sharing a base path: `<base>.lrh` holds a
//! canonical JSON header and `<base>.lrd` the raw little-endian samples,
//! band-sequential and row-major within each band, with no padding.
//!
//! Labeled samples are a headed CSV (`x,y,class_id`) without quoting.
//! Regions and legends are JSON arrays.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::LabeledSample;
use crate::error::{Error, Result};
use crate::raster::{ClassLegend, ClassMap, DType, GeoTransform, RasterData, RasterGrid, RegionPolygon};

pub const HEADER_EXT: &str = "lrh";
pub const DATA_EXT: &str = "lrd";
pub const SAMPLES_HEADER: &str = "x,y,class_id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub band_count: usize,
    pub dtype: String,
    pub nodata: Option<f64>,
    pub geotransform: [f64; 6],
    pub crs_id: String,
    pub band_names: Vec<String>,
}

impl RasterHeader {
    pub fn of(grid: &RasterGrid) -> Self {
        RasterHeader {
            width: grid.width(),
            height: grid.height(),
            band_count: grid.band_count(),
            dtype: grid.dtype().name().to_string(),
            nodata: grid.nodata(),
            geotransform: grid.geotransform().to_array(),
            crs_id: grid.crs_id().to_string(),
            band_names: grid.band_names().to_vec(),
        }
    }
}

/// Pretty JSON with keys sorted at every level, LF line ends and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key.
    let value = serde_json::to_value(value).map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
    let mut s =
        serde_json::to_string_pretty(&value).map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_canonical_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = to_canonical_json(value)?;
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// `(header, data)` paths for a raster base path. A trailing `.lrh`/`.lrd` is ignored.
pub fn raster_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some(HEADER_EXT) | Some(DATA_EXT) => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with_ext = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with_ext(HEADER_EXT), with_ext(DATA_EXT))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| Error::format(path, "not valid UTF-8"))
}

pub fn encode_data(data: &RasterData) -> Vec<u8> {
    match data {
        RasterData::U8(v) => v.clone(),
        RasterData::U16(v) => v.iter().flat_map(|s| s.to_le_bytes()).collect(),
        RasterData::F32(v) => v.iter().flat_map(|s| s.to_le_bytes()).collect(),
    }
}

pub fn decode_data(dtype: DType, bytes: &[u8]) -> RasterData {
    match dtype {
        DType::U8 => RasterData::U8(bytes.to_vec()),
        DType::U16 => RasterData::U16(
            bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        DType::F32 => RasterData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    }
}

pub fn write_raster(grid: &RasterGrid, path: &Path) -> Result<()> {
    let (header_path, data_path) = raster_paths(path);
    write_canonical_json(&RasterHeader::of(grid), &header_path)?;
    write_file(&data_path, &encode_data(grid.data()))
}

pub fn read_raster(path: &Path) -> Result<RasterGrid> {
    let (header_path, data_path) = raster_paths(path);
    let text = read_to_string(&header_path)?;
    let header: RasterHeader = serde_json::from_str(&text).map_err(|e| Error::format(&header_path, e.to_string()))?;
    let dtype = DType::from_name(&header.dtype)
        .ok_or_else(|| Error::format(&header_path, format!("unknown dtype {:?}", header.dtype)))?;
    if header.band_names.len() != header.band_count {
        return Err(Error::format(
            &header_path,
            format!("{} band names for {} bands", header.band_names.len(), header.band_count),
        ));
    }
    let expected = (header.width as u64)
        .checked_mul(header.height as u64)
        .and_then(|n| n.checked_mul(header.band_count as u64))
        .and_then(|n| n.checked_mul(dtype.size() as u64))
        .ok_or_else(|| Error::format(&header_path, "raster dimensions overflow"))?;
    let actual = fs::metadata(&data_path).map_err(|e| Error::io(&data_path, e))?.len();
    if actual != expected {
        return Err(Error::Corruption {
            path: data_path,
            expected,
            actual,
        });
    }
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Corruption {
            path: data_path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    RasterGrid::with_metadata(
        header.width,
        header.height,
        header.band_count,
        header.nodata,
        GeoTransform::from_array(header.geotransform),
        header.crs_id,
        header.band_names,
        decode_data(dtype, &bytes),
    )
    .map_err(|e| Error::format(&header_path, e.to_string()))
}

pub fn write_class_map(map: &ClassMap, path: &Path) -> Result<()> {
    write_raster(map.grid(), path)
}

pub fn read_class_map(path: &Path, legend: &ClassLegend) -> Result<ClassMap> {
    ClassMap::new(read_raster(path)?, legend.clone())
}

pub fn parse_samples(text: &str, legend: &ClassLegend, path: &Path) -> Result<Vec<LabeledSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == SAMPLES_HEADER => {}
        _ => return Err(Error::format(path, format!("expected header line {SAMPLES_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                path,
                format!("line {lineno}: expected 3 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, format!("line {lineno}: {what} {s:?} is not a finite number")))
        };
        let x = num(fields[0], "x")?;
        let y = num(fields[1], "y")?;
        let id: i64 = fields[2].trim().parse().map_err(|_| {
            Error::format(
                path,
                format!("line {lineno}: class_id {:?} is not an integer", fields[2]),
            )
        })?;
        let class_id = u8::try_from(id).ok().filter(|&c| legend.contains(c)).ok_or_else(|| {
            Error::Validation(format!(
                "{} line {lineno}: class id {id} is not in the legend",
                path.display()
            ))
        })?;
        out.push(LabeledSample { x, y, class_id });
    }
    Ok(out)
}

pub fn read_samples(path: &Path, legend: &ClassLegend) -> Result<Vec<LabeledSample>> {
    let text = read_to_string(path)?;
    parse_samples(&text, legend, path)
}

pub fn format_samples(samples: &[LabeledSample]) -> String {
    let mut s = String::with_capacity(24 * (samples.len() + 1));
    s.push_str(SAMPLES_HEADER);
    s.push('\n');
    for p in samples {
        s.push_str(&format!("{},{},{}\n", p.x, p.y, p.class_id));
    }
    s
}

pub fn write_samples(samples: &[LabeledSample], path: &Path) -> Result<()> {
    write_file(path, format_samples(samples).as_bytes())
}

pub fn read_regions(path: &Path) -> Result<Vec<RegionPolygon>> {
    let regions: Vec<RegionPolygon> = read_json(path)?;
    for r in &regions {
        r.validate()?;
    }
    Ok(regions)
}

pub fn write_regions(regions: &[RegionPolygon], path: &Path) -> Result<()> {
    write_canonical_json(&regions, path)
}

pub fn read_legend(path: &Path) -> Result<ClassLegend> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        if e.is_data() {
            Error::Validation(format!("{}: {e}", path.display()))
        } else {
            Error::format(path, e.to_string())
        }
    })
}
