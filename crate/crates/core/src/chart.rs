//! Deterministic SVG bar charts for per-region area and change summaries.
//!
//! Output bytes depend only on the [`ChartSpec`]: fixed 960x540 canvas, named
//! font families, and every coordinate printed with two decimals.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CANVAS_WIDTH: f64 = 960.0;
pub const CANVAS_HEIGHT: f64 = 540.0;
pub const PLOT_LEFT: f64 = 90.0;
pub const PLOT_TOP: f64 = 70.0;
pub const PLOT_WIDTH: f64 = 840.0;
pub const PLOT_HEIGHT: f64 = 330.0;
const TICKS: usize = 5;
const FONT: &str = "DejaVu Sans, Arial, Helvetica, sans-serif";
const COLORS: [&str; 2] = ["#4e79a7", "#f28e2b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortOrder {
    /// Categories in the given order.
    #[default]
    Input,
    /// By the first series, smallest first; n/a last.
    Ascending,
    /// By the first series, largest first; n/a last.
    Descending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `None` renders as an n/a bar.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub title: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
    pub unit: String,
    pub sort: SortOrder,
}

impl ChartSpec {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Validation("chart has no categories".into()));
        }
        if self.series.is_empty() || self.series.len() > 2 {
            return Err(Error::Validation(format!(
                "chart needs one or two series, got {}",
                self.series.len()
            )));
        }
        for s in &self.series {
            if s.values.len() != self.categories.len() {
                return Err(Error::Validation(format!(
                    "series {:?} has {} values for {} categories",
                    s.label,
                    s.values.len(),
                    self.categories.len()
                )));
            }
            if s.values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "series {:?} has a non-finite value",
                    s.label
                )));
            }
        }
        Ok(())
    }

    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.categories.len()).collect();
        let key = |i: &usize| self.series[0].values[*i];
        let cmp = |a: &usize, b: &usize, desc: bool| match (key(a), key(b)) {
            (Some(x), Some(y)) => {
                if desc {
                    y.total_cmp(&x)
                } else {
                    x.total_cmp(&y)
                }
            }
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        match self.sort {
            SortOrder::Input => {}
            SortOrder::Ascending => idx.sort_by(|a, b| cmp(a, b, false)),
            SortOrder::Descending => idx.sort_by(|a, b| cmp(a, b, true)),
        }
        idx
    }

    /// `(low, high)` of the value axis; always includes zero.
    pub fn value_range(&self) -> (f64, f64) {
        let vals = self.series.iter().flat_map(|s| s.values.iter().flatten().copied());
        let (lo, hi) = vals.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi == lo {
            (lo, lo + 1.0)
        } else {
            (lo, hi)
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders `spec` as a standalone SVG document.
pub fn render_bar_chart(spec: &ChartSpec) -> Result<String> {
    spec.validate()?;
    let (lo, hi) = spec.value_range();
    let span = hi - lo;
    let y_of = |v: f64| PLOT_TOP + PLOT_HEIGHT * (hi - v) / span;
    let zero_y = y_of(0.0);
    let order = spec.order();
    let n = order.len() as f64;
    let slot = PLOT_WIDTH / n;
    let bar_w = slot * 0.8 / spec.series.len() as f64;
    let has_na = spec.series.iter().any(|s| s.values.iter().any(Option::is_none));

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_WIDTH:.0}" height="{CANVAS_HEIGHT:.0}" viewBox="0 0 {CANVAS_WIDTH:.0} {CANVAS_HEIGHT:.0}" font-family="{FONT}">"#
    );
    let _ = writeln!(
        w,
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#888888" stroke-width="2"/></pattern></defs>"##
    );
    let _ = writeln!(
        w,
        r##"<rect x="0" y="0" width="{CANVAS_WIDTH:.0}" height="{CANVAS_HEIGHT:.0}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="36.00" font-size="20" text-anchor="middle">{}</text>"#,
        CANVAS_WIDTH / 2.0,
        escape(&spec.title)
    );

    // value axis
    for t in 0..=TICKS {
        let v = lo + span * t as f64 / TICKS as f64;
        let y = y_of(v);
        let _ = writeln!(
            w,
            r##"<line class="grid" x1="{PLOT_LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            PLOT_LEFT + PLOT_WIDTH
        );
        let _ = writeln!(
            w,
            r#"<text class="tick" x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{v:.2}</text>"#,
            PLOT_LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="24.00" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 24.00 {:.2})">{}</text>"#,
        PLOT_TOP + PLOT_HEIGHT / 2.0,
        PLOT_TOP + PLOT_HEIGHT / 2.0,
        escape(&spec.unit)
    );

    for (slot_i, &cat) in order.iter().enumerate() {
        let x0 = PLOT_LEFT + slot * slot_i as f64 + slot * 0.1;
        for (si, series) in spec.series.iter().enumerate() {
            let x = x0 + bar_w * si as f64;
            match series.values[cat] {
                Some(v) => {
                    let (top, h) = if v >= 0.0 {
                        (y_of(v), zero_y - y_of(v))
                    } else {
                        (zero_y, y_of(v) - zero_y)
                    };
                    let _ = writeln!(
                        w,
                        r#"<rect class="bar" data-series="{si}" data-category="{}" x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}"/>"#,
                        escape(&spec.categories[cat]),
                        COLORS[si]
                    );
                }
                None => {
                    let _ = writeln!(
                        w,
                        r##"<rect class="na" data-series="{si}" data-category="{}" x="{x:.2}" y="{PLOT_TOP:.2}" width="{bar_w:.2}" height="{PLOT_HEIGHT:.2}" fill="url(#hatch)" stroke="#888888"/>"##,
                        escape(&spec.categories[cat])
                    );
                }
            }
        }
        let lx = PLOT_LEFT + slot * (slot_i as f64 + 0.5);
        let ly = PLOT_TOP + PLOT_HEIGHT + 16.0;
        let _ = writeln!(
            w,
            r#"<text class="category" x="{lx:.2}" y="{ly:.2}" font-size="12" text-anchor="end" transform="rotate(-35 {lx:.2} {ly:.2})">{}</text>"#,
            escape(&spec.categories[cat])
        );
    }
    let _ = writeln!(
        w,
        r##"<line class="axis" x1="{PLOT_LEFT:.2}" y1="{zero_y:.2}" x2="{:.2}" y2="{zero_y:.2}" stroke="#000000"/>"##,
        PLOT_LEFT + PLOT_WIDTH
    );
    let _ = writeln!(
        w,
        r##"<line class="axis" x1="{PLOT_LEFT:.2}" y1="{PLOT_TOP:.2}" x2="{PLOT_LEFT:.2}" y2="{:.2}" stroke="#000000"/>"##,
        PLOT_TOP + PLOT_HEIGHT
    );

    if spec.series.len() > 1 {
        for (si, series) in spec.series.iter().enumerate() {
            let y = 52.0;
            let x = PLOT_LEFT + PLOT_WIDTH - 220.0 + 120.0 * si as f64;
            let _ = writeln!(
                w,
                r#"<rect x="{x:.2}" y="{:.2}" width="12.00" height="12.00" fill="{}"/>"#,
                y - 10.0,
                COLORS[si]
            );
            let _ = writeln!(
                w,
                r#"<text x="{:.2}" y="{y:.2}" font-size="12">{}</text>"#,
                x + 16.0,
                escape(&series.label)
            );
        }
    }
    if has_na {
        let _ = writeln!(
            w,
            r#"<text class="footnote" x="{PLOT_LEFT:.2}" y="{:.2}" font-size="11">Hatched bars: n/a (zero baseline, change undefined)</text>"#,
            CANVAS_HEIGHT - 12.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_bar_chart(spec: &ChartSpec, path: &Path) -> Result<()> {
    let svg = render_bar_chart(spec)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(values: Vec<Option<f64>>) -> ChartSpec {
        ChartSpec {
            title: "Built Area".into(),
            categories: (0..values.len()).map(|i| format!("R{i}")).collect(),
            series: vec![Series {
                label: "2021".into(),
                values,
            }],
            unit: "km²".into(),
            sort: SortOrder::Input,
        }
    }

    fn bar_heights(svg: &str) -> Vec<f64> {
        svg.lines()
            .filter(|l| l.contains(r#"class="bar""#))
            .map(|l| {
                let h = l.split("height=\"").nth(1).unwrap();
                h[..h.find('"').unwrap()].parse().unwrap()
            })
            .collect()
    }

    #[test]
    fn single_bar_spans_axis() {
        let svg = render_bar_chart(&spec(vec![Some(1.0)])).unwrap();
        assert_eq!(bar_heights(&svg), vec![PLOT_HEIGHT]);
        assert!(svg.contains(">1.00</text>"));
        assert!(svg.contains(">0.00</text>"));
    }

    #[test]
    fn zero_categories_rejected() {
        assert!(matches!(render_bar_chart(&spec(vec![])), Err(Error::Validation(_))));
        let mut s = spec(vec![Some(1.0)]);
        s.series[0].values.push(Some(2.0));
        assert!(render_bar_chart(&s).is_err());
        assert!(render_bar_chart(&spec(vec![Some(f64::INFINITY)])).is_err());
    }

    #[test]
    fn na_is_hatched_with_footnote() {
        let svg = render_bar_chart(&spec(vec![Some(2.0), None])).unwrap();
        assert!(svg.contains(r#"class="na""#));
        assert!(svg.contains("url(#hatch)"));
        assert!(svg.contains("n/a"));
        let no_na = render_bar_chart(&spec(vec![Some(2.0)])).unwrap();
        assert!(!no_na.contains("footnote"));
    }

    #[test]
    fn negative_values_hang_below_zero() {
        let svg = render_bar_chart(&spec(vec![Some(-1.0), Some(3.0)])).unwrap();
        assert_eq!(bar_heights(&svg), vec![PLOT_HEIGHT / 4.0, PLOT_HEIGHT * 3.0 / 4.0]);
    }

    #[test]
    fn sorting_puts_na_last() {
        let mut s = spec(vec![Some(2.0), None, Some(5.0), Some(1.0)]);
        s.sort = SortOrder::Descending;
        assert_eq!(s.order(), vec![2, 0, 3, 1]);
        s.sort = SortOrder::Ascending;
        assert_eq!(s.order(), vec![3, 0, 2, 1]);
    }

    #[test]
    fn text_is_escaped() {
        let mut s = spec(vec![Some(1.0)]);
        s.title = "A & <B>".into();
        assert!(render_bar_chart(&s).unwrap().contains("A &amp; &lt;B&gt;"));
    }
}
