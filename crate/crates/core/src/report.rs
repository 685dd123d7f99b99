//! CSV renderings of accuracy, transition, zonal and change results, plus the
//! charts built from a change report.

use crate::accuracy::ConfusionMatrix;
use crate::change::{ChangeReport, ChangeRow, PercentChange, TransitionMatrix, ZonalAreaTable};
use crate::chart::{ChartSpec, Series, SortOrder};
use crate::error::{Error, Result};
use crate::raster::ClassLegend;

pub const ACCURACY_HEADER: &str = "class,reference_total,classified_total,number_correct,producer_pct,user_pct";

fn opt_pct(p: Option<u64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

/// Per-class accuracy table with integer percentages rounded half up, then
/// `overall_accuracy` and `kappa` footer rows carrying the exact fraction.
pub fn accuracy_table_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from(ACCURACY_HEADER);
    out.push('\n');
    for c in cm.class_summaries() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.name,
            c.reference_total,
            c.classified_total,
            c.correct,
            opt_pct(c.producer_pct()),
            opt_pct(c.user_pct())
        ));
    }
    let fmt = |r: Result<f64>| r.map_or_else(|_| "n/a".to_string(), |v| format!("{v:.6}"));
    out.push_str(&format!("overall_accuracy,{},,,,\n", fmt(cm.overall_accuracy())));
    out.push_str(&format!("kappa,{},,,,\n", fmt(cm.kappa())));
    out
}

/// Long-format transition table: one line per (from, to) pair.
pub fn transition_csv(tm: &TransitionMatrix) -> String {
    let mut out = String::from("from,to,pixel_count,area_km2\n");
    let entries = tm.classes.entries();
    for (i, from) in entries.iter().enumerate() {
        for (j, to) in entries.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                from.name,
                to.name,
                tm.count(i, j),
                tm.area_km2(i, j)
            ));
        }
    }
    out
}

pub fn zonal_csv(table: &ZonalAreaTable, legend: &ClassLegend) -> String {
    let mut out = String::from("region_id,region,year,class,pixel_count,area_km2\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6}\n",
            r.region_id,
            r.region_name,
            r.year,
            legend.name_of(r.class_id).unwrap_or("?"),
            r.pixel_count,
            r.area_km2
        ));
    }
    out
}

/// `region,class,<year>...,delta_km2,pct_change,baseline_km2`.
pub fn change_report_csv(report: &ChangeReport) -> String {
    let mut out = String::from("region,class");
    for y in &report.years {
        out.push_str(&format!(",{y}"));
    }
    out.push_str(",delta_km2,pct_change,baseline_km2\n");
    for r in &report.rows {
        out.push_str(&format!("{},{}", r.region_name, r.class_name));
        for a in &r.areas_km2 {
            out.push_str(&format!(",{a:.6}"));
        }
        out.push_str(&format!(",{:.6},{},{:.6}\n", r.delta_km2, r.pct_change, r.baseline_km2));
    }
    out
}

/// Reads back a [`change_report_csv`] table. Pixel counts are not stored and come back empty.
pub fn parse_change_report_csv(text: &str) -> Result<ChangeReport> {
    let bad = |msg: String| Error::Validation(format!("change report: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .collect();
    let n = header.len();
    if n < 6
        || header[0] != "region"
        || header[1] != "class"
        || header[n - 3..] != ["delta_km2", "pct_change", "baseline_km2"]
    {
        return Err(bad("unexpected header".into()));
    }
    let years = header[2..n - 3]
        .iter()
        .map(|y| y.parse::<i32>().map_err(|_| bad(format!("bad year column {y:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != n {
            return Err(bad(format!("row {} has {} fields, expected {n}", i + 1, f.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("row {}: {s:?} is not a number", i + 1)))
        };
        let areas_km2 = f[2..n - 3].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let pct_change = match f[n - 2] {
            "n/a" => PercentChange::Undefined,
            s => PercentChange::Defined(num(s)?),
        };
        rows.push(ChangeRow {
            region_id: f[0].to_string(),
            region_name: f[0].to_string(),
            class_id: 0,
            class_name: f[1].to_string(),
            pixel_counts: Vec::new(),
            delta_km2: num(f[n - 3])?,
            pct_change,
            baseline_km2: num(f[n - 1])?,
            areas_km2,
        });
    }
    Ok(ChangeReport { years, rows })
}

/// For every class in the report: a first-vs-last-year area chart and a
/// percentage-change chart, in order of first appearance.
pub fn change_charts(report: &ChangeReport, sort: SortOrder) -> Result<Vec<(String, ChartSpec)>> {
    let (Some(first), Some(last)) = (report.years.first(), report.years.last()) else {
        return Err(Error::Validation("change report has no years".into()));
    };
    let mut classes: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !classes.contains(&r.class_name.as_str()) {
            classes.push(&r.class_name);
        }
    }
    let mut charts = Vec::new();
    for class in classes {
        let rows: Vec<&ChangeRow> = report.rows.iter().filter(|r| r.class_name == class).collect();
        let categories: Vec<String> = rows.iter().map(|r| r.region_name.clone()).collect();
        let slug: String = class
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        charts.push((
            format!("{slug}_area.svg"),
            ChartSpec {
                title: format!("{class} Area"),
                categories: categories.clone(),
                series: vec![
                    Series {
                        label: first.to_string(),
                        values: rows.iter().map(|r| Some(r.areas_km2[0])).collect(),
                    },
                    Series {
                        label: last.to_string(),
                        values: rows.iter().map(|r| r.areas_km2.last().copied()).collect(),
                    },
                ],
                unit: "km²".into(),
                sort,
            },
        ));
        charts.push((
            format!("{slug}_pct_change.svg"),
            ChartSpec {
                title: format!("Percentage Change in {class} Area, {first}-{last}"),
                categories,
                series: vec![Series {
                    label: format!("{first}-{last}"),
                    values: rows.iter().map(|r| r.pct_change.value()).collect(),
                }],
                unit: "%".into(),
                sort,
            },
        ));
    }
    Ok(charts)
}
