//! Report artifacts: CSV tables, JSON with 17-significant-digit reals, and
//! small hand-written SVG plots.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::kv::fmt_real;

/// Comma-separated table with a header row and LF line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_real(v)).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Pretty JSON whose floats are printed as `{:.16e}`.
struct RealFormatter(PrettyFormatter<'static>);

impl Formatter for RealFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_real(v).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as indented JSON; non-finite reals become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RealFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("json: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Horizontal band `[lo, hi]` drawn under the series.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !(lo <= hi) {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (w, h, m) = (WIDTH, HEIGHT, MARGIN);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let px = m + f * (w - 2.0 * m);
        let py = h - m - f * (h - 2.0 * m);
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.3e}</text>"#, h - m + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{yv:.3}</text>"#, m - 6.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
}

impl LinePlot {
    pub fn render_svg(&self) -> String {
        let xr = range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let yr = range(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1))
                .chain(self.bands.iter().flat_map(|b| [b.lo, b.hi])),
        );
        let (w, h, m) = (WIDTH, HEIGHT, MARGIN);
        let sx = |x: f64| m + (x - xr.0) / (xr.1 - xr.0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - yr.0) / (yr.1 - yr.0) * (h - 2.0 * m);
        let mut out = String::new();
        frame(&mut out, &self.title, &self.x_label, &self.y_label, xr, yr);
        for (i, band) in self.bands.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<rect x="{m}" y="{:.2}" width="{}" height="{:.2}" fill="{color}" fill-opacity="0.12"><title>{}</title></rect>"#,
                sy(band.hi),
                w - 2.0 * m,
                sy(band.lo) - sy(band.hi),
                escape(&band.name)
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
                m + 8.0,
                m + 16.0 + 14.0 * i as f64,
                escape(&series.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }

    /// Long-format data behind the plot: one row per plotted point or band.
    pub fn sidecar(&self) -> CsvTable {
        let mut table = CsvTable::new(&["kind", "name", "x", "y"]);
        for s in &self.series {
            for &(x, y) in &s.points {
                table.push(vec!["series".into(), s.name.clone(), fmt_real(x), fmt_real(y)]);
            }
        }
        for b in &self.bands {
            table.push(vec!["band_lo".into(), b.name.clone(), String::new(), fmt_real(b.lo)]);
            table.push(vec!["band_hi".into(), b.name.clone(), String::new(), fmt_real(b.hi)]);
        }
        table
    }
}

/// Cell grid `values[i][j]` at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn render_svg(&self) -> String {
        let (nx, ny) = (self.xs.len().max(1), self.ys.len().max(1));
        let xr = (-0.5, nx as f64 - 0.5);
        let yr = (-0.5, ny as f64 - 0.5);
        let (vlo, vhi) = range(self.values.iter().flatten().copied());
        let (w, h, m) = (WIDTH, HEIGHT, MARGIN);
        let cw = (w - 2.0 * m) / nx as f64;
        let ch = (h - 2.0 * m) / ny as f64;
        let mut out = String::new();
        frame(&mut out, &self.title, &self.x_label, &self.y_label, xr, yr);
        for (i, col) in self.values.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                let f = ((v - vlo) / (vhi - vlo)).clamp(0.0, 1.0);
                let shade = (255.0 * (1.0 - f)).round() as u8;
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="#{shade:02x}{shade:02x}ff"><title>({}, {}) {}</title></rect>"##,
                    m + i as f64 * cw,
                    h - m - (j + 1) as f64 * ch,
                    fmt_real(self.xs[i]),
                    fmt_real(self.ys[j]),
                    fmt_real(v)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">range [{vlo:.4}, {vhi:.4}]</text>"#,
            w - m,
            m - 8.0
        );
        out.push_str("</svg>\n");
        out
    }

    pub fn sidecar(&self) -> CsvTable {
        let mut table = CsvTable::new(&["x", "y", "value"]);
        for (i, col) in self.values.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                table.push_reals(&[self.xs[i], self.ys[j], v]);
            }
        }
        table
    }
}

/// Writes `<stem>.svg` and its sidecar `<stem>.csv` into `dir`.
pub fn write_plot(dir: &Path, stem: &str, svg: &str, sidecar: &CsvTable) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    sidecar.write(&dir.join(format!("{stem}.csv")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        x: f64,
        n: usize,
        bad: f64,
        tag: &'static str,
    }

    #[test]
    fn json_reals_have_seventeen_digits() {
        let s = to_json(&Sample {
            x: 0.1,
            n: 3,
            bad: f64::NAN,
            tag: "t",
        })
        .unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"bad\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["t", "z"]);
        t.push_reals(&[0.0, -4.0]);
        assert_eq!(t.render(), "t,z\n0.0000000000000000e0,-4.0000000000000000e0\n");
    }

    #[test]
    fn line_plot_sidecar_matches_points() {
        let plot = LinePlot {
            title: "z <t>".into(),
            x_label: "t".into(),
            y_label: "z".into(),
            series: vec![Series {
                name: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0)],
            }],
            bands: vec![Band {
                name: "w".into(),
                lo: -1.0,
                hi: 1.0,
            }],
        };
        let svg = plot.render_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("z &lt;t&gt;"));
        assert_eq!(plot.sidecar().rows.len(), 4);
    }

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let map = Heatmap {
            title: "gap".into(),
            x_label: "a".into(),
            y_label: "b".into(),
            xs: vec![0.0, 1.0],
            ys: vec![0.0, 1.0, 2.0],
            values: vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        };
        assert_eq!(map.render_svg().matches("<title>").count(), 6);
        assert_eq!(map.sidecar().rows.len(), 6);
    }
}
